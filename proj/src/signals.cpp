#include "rpb/signals.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace rpb {

Signal::Signal(Index dim, Index horizon) {
  if (dim <= 0 || horizon < 0) {
    throw InvalidSignal("signal needs positive dimension and nonnegative horizon");
  }
  values_ = Mat::Zero(dim, horizon + 1);
}

Signal::Signal(Mat values) : values_(std::move(values)) {
  if (values_.rows() <= 0 || values_.cols() <= 0) {
    throw InvalidSignal("signal needs positive dimension and at least one step");
  }
}

Signal Signal::constant(const Vec& value, Index horizon) {
  Signal s(value.size(), horizon);
  s.values_.colwise() = value;
  return s;
}

Signal Signal::slice(Index t0, Index t1) const {
  if (t0 < 0 || t1 < t0 || t1 > horizon()) {
    throw std::out_of_range("signal slice out of range");
  }
  return Signal(Mat(values_.middleCols(t0, t1 - t0 + 1)));
}

Signal Signal::operator-(const Signal& other) const {
  require_dim(other.dim(), dim(), "signal difference");
  require_dim(other.steps(), steps(), "signal difference horizon");
  return Signal(Mat(values_ - other.values_));
}

Signal Signal::operator+(const Signal& other) const {
  require_dim(other.dim(), dim(), "signal sum");
  require_dim(other.steps(), steps(), "signal sum horizon");
  return Signal(Mat(values_ + other.values_));
}

Signal Signal::operator*(double c) const { return Signal(Mat(values_ * c)); }

double vector_norm(const Eigen::Ref<const Vec>& v, double p) {
  if (std::isinf(p)) return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
  if (p == 2.0) return v.norm();
  if (p == 1.0) return v.cwiseAbs().sum();
  return std::pow(v.cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

namespace {

double suffix_norm(const Signal& s, Index t0, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("norm order must be >= 1");
  if (!s.is_finite()) throw InvalidSignal("signal has non-finite entries");
  if (std::isinf(p)) {
    double m = 0.0;
    for (Index t = t0; t <= s.horizon(); ++t) m = std::max(m, vector_norm(s.at(t), p));
    return m;
  }
  // Scale by the largest step norm so tiny tails do not underflow.
  double scale = 0.0;
  for (Index t = t0; t <= s.horizon(); ++t) scale = std::max(scale, vector_norm(s.at(t), p));
  if (scale == 0.0) return 0.0;
  double acc = 0.0;
  for (Index t = t0; t <= s.horizon(); ++t) acc += std::pow(vector_norm(s.at(t), p) / scale, p);
  return scale * std::pow(acc, 1.0 / p);
}

}  // namespace

double lp_norm(const Signal& s, double p) { return suffix_norm(s, 0, p); }

double tail_energy(const Signal& s, Index t0, double p) {
  if (t0 < 0 || t0 > s.horizon()) throw std::out_of_range("tail_energy: index out of range");
  return suffix_norm(s, t0, p);
}

void write_csv(std::ostream& os, const Signal& s, const std::vector<std::string>& names) {
  os << "t";
  for (Index i = 0; i < s.dim(); ++i) {
    os << ',' << (static_cast<std::size_t>(i) < names.size() ? names[i] : "c" + std::to_string(i));
  }
  os << '\n' << std::setprecision(17);
  for (Index t = 0; t <= s.horizon(); ++t) {
    os << t;
    for (Index i = 0; i < s.dim(); ++i) os << ',' << s.at(t)(i);
    os << '\n';
  }
}

void write_csv(const std::string& path, const Signal& s, const std::vector<std::string>& names) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path + " for writing");
  write_csv(f, s, names);
}

Signal read_csv(std::istream& is, std::vector<std::string>* names) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidSignal("empty CSV");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2) throw InvalidSignal("CSV needs a time column and at least one value column");
  const Index dim = static_cast<Index>(header.size()) - 1;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    std::getline(ss, cell, ',');  // time index
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<Index>(row.size()) != dim) throw InvalidSignal("CSV row has wrong column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidSignal("CSV has no data rows");
  Mat values(dim, static_cast<Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (Index i = 0; i < dim; ++i) values(i, static_cast<Index>(t)) = rows[t][i];
  if (names) names->assign(header.begin() + 1, header.end());
  return Signal(std::move(values));
}

Signal read_csv(const std::string& path, std::vector<std::string>* names) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  return read_csv(f, names);
}

Signal StepOperator::apply(const Signal& input) {
  require_dim(input.dim(), input_dim(), "operator input");
  reset();
  Signal out(output_dim(), input.horizon());
  for (Index t = 0; t <= input.horizon(); ++t) out.at(t) = step(input.at(t));
  return out;
}

Signal gaussian_signal(Index dim, Index horizon, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Signal s(dim, horizon);
  for (Index t = 0; t <= horizon; ++t)
    for (Index i = 0; i < dim; ++i) s.at(t)(i) = n(rng);
  return s;
}

bool check_causality(SequenceOperator& op, int trials, std::uint64_t seed, Index horizon) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> cut_dist(0, horizon - 1);
  for (int k = 0; k < trials; ++k) {
    Signal a = gaussian_signal(op.input_dim(), horizon, 1.0, rng);
    Signal b = gaussian_signal(op.input_dim(), horizon, 1.0, rng);
    const Index cut = cut_dist(rng);
    b.values().leftCols(cut + 1) = a.values().leftCols(cut + 1);
    op.reset();
    const Signal ya = op.apply(a);
    op.reset();
    const Signal yb = op.apply(b);
    const Mat diff = ya.values().leftCols(cut + 1) - yb.values().leftCols(cut + 1);
    if (diff.cwiseAbs().maxCoeff() > 1e-12 * (1.0 + ya.values().cwiseAbs().maxCoeff())) return false;
  }
  return true;
}

}  // namespace rpb
