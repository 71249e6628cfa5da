#include "rpb/boost.hpp"

#include <cmath>

namespace rpb {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

BoundedMlp::BoundedMlp(std::vector<Index> widths, double bound)
    : widths_(std::move(widths)), bound_(bound) {
  if (widths_.size() < 2) throw DimensionMismatch("MLP needs at least an input and output width");
  for (Index w : widths_)
    if (w <= 0) throw DimensionMismatch("MLP widths must be positive");
  if (!(bound_ > 0.0)) throw std::invalid_argument("MLP output bound must be positive");
  Index off = 0;
  for (std::size_t k = 0; k + 1 < widths_.size(); ++k) {
    offsets_.push_back(off);
    off += widths_[k + 1] * widths_[k] + widths_[k + 1];
  }
  params_ = Vec::Zero(off);
}

void BoundedMlp::set_params(const Vec& theta) {
  require_dim(theta.size(), params_.size(), "MLP parameters");
  params_ = theta;
}

Eigen::Map<const Mat> BoundedMlp::weight(std::size_t k) const {
  return Eigen::Map<const Mat>(params_.data() + offsets_[k], widths_[k + 1], widths_[k]);
}

Eigen::Map<const Vec> BoundedMlp::bias(std::size_t k) const {
  return Eigen::Map<const Vec>(params_.data() + offsets_[k] + widths_[k + 1] * widths_[k],
                               widths_[k + 1]);
}

Vec BoundedMlp::forward(const Vec& input, Cache* cache) const {
  require_dim(input.size(), input_dim(), "MLP input");
  const std::size_t layers = widths_.size() - 1;
  if (cache) {
    cache->activations.resize(layers + 1);
    cache->activations[0] = input;
  }
  Vec a = input;
  for (std::size_t k = 0; k < layers; ++k) {
    Vec z = weight(k) * a + bias(k);
    if (k + 1 < layers) {
      a = z.unaryExpr([](double x) { return sigmoid(x); });
    } else {
      a = z.unaryExpr([this](double x) { return bound_ * (2.0 * sigmoid(x) - 1.0); });
    }
    if (cache) cache->activations[k + 1] = a;
  }
  return a;
}

Vec BoundedMlp::backward(const Cache& cache, const Vec& g_output, Eigen::Ref<Vec> grad) const {
  const std::size_t layers = widths_.size() - 1;
  // Output activation y = B (2 s - 1): dy/dz = 2B s (1 - s) = (B^2 - y^2) / (2B).
  const Vec& y = cache.activations[layers];
  Vec gz = g_output.cwiseProduct(((bound_ * bound_) - y.array().square()).matrix() / (2.0 * bound_));
  for (std::size_t k = layers; k-- > 0;) {
    const Vec& a_in = cache.activations[k];
    Eigen::Map<Mat> gW(grad.data() + offsets_[k], widths_[k + 1], widths_[k]);
    Eigen::Map<Vec> gb(grad.data() + offsets_[k] + widths_[k + 1] * widths_[k], widths_[k + 1]);
    gW.noalias() += gz * a_in.transpose();
    gb += gz;
    Vec ga = weight(k).transpose() * gz;
    if (k > 0) {
      gz = ga.cwiseProduct(a_in.cwiseProduct((1.0 - a_in.array()).matrix()));
    } else {
      return ga;
    }
  }
  return gz;  // unreachable
}

std::vector<Index> BoostConfig::mlp_widths() const {
  std::vector<Index> w;
  w.push_back(input_dim + reference_dim);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(mlp_output_dim());
  return w;
}

BoostOperator::BoostOperator(const BoostConfig& config)
    : config_(config),
      ren_params_(RenFreeParams::zeros(config.ren_dims())),
      mlp_(config.mlp_widths(), config.bound) {
  ren_ = realize(ren_params_, config_.output_scale);
}

BoostOperator BoostOperator::random(const BoostConfig& config, double stddev, std::mt19937_64& rng) {
  BoostOperator m(config);
  std::normal_distribution<double> n(0.0, stddev);
  Vec theta(m.param_count());
  for (Index i = 0; i < theta.size(); ++i) theta(i) = n(rng);
  m.set_params(theta);
  return m;
}

Vec BoostOperator::params() const {
  Vec theta(param_count());
  theta << ren_params_.theta, mlp_.params();
  return theta;
}

void BoostOperator::set_params(const Vec& theta) {
  require_dim(theta.size(), param_count(), "boost parameters");
  ren_params_.theta = theta.head(ren_param_count());
  mlp_.set_params(theta.tail(mlp_.param_count()));
  ren_ = realize(ren_params_, config_.output_scale);
}

void BoostOperator::set_output_scale(double beta) {
  config_.output_scale = beta;
  ren_.output_scale = beta;
}

BoostOperator::State BoostOperator::initial_state() const {
  return State{Vec::Zero(config_.ren_state), 0};
}

Vec BoostOperator::shifted_input(const Vec& w_hat, const Vec& x_ref, Index t) const {
  if (!config_.reference_relative_input || t != 0) return w_hat;
  Vec z = w_hat;
  const Index n = std::min<Index>(x_ref.size(), z.size());
  z.head(n) -= x_ref.head(n);
  return z;
}

Vec BoostOperator::step(State& state, const Vec& w_hat, const Vec& x_ref, StepCache* cache) const {
  require_dim(w_hat.size(), config_.input_dim, "boost disturbance input");
  require_dim(x_ref.size(), config_.reference_dim, "boost reference input");
  const Vec z = shifted_input(w_hat, x_ref, state.t);
  Vec mlp_in(config_.input_dim + config_.reference_dim);
  mlp_in << z, x_ref;

  RenStepOut r = ren_step(ren_, state.xi, z, cache ? &cache->ren : nullptr);
  Vec y2 = mlp_.forward(mlp_in, cache ? &cache->mlp : nullptr);
  state.xi = std::move(r.next_state);
  ++state.t;

  Vec u = config_.gate == GateMode::kScalar ? Vec(r.output * y2(0)) : Vec(r.output.cwiseProduct(y2));
  if (cache) {
    cache->y1 = std::move(r.output);
    cache->y2 = std::move(y2);
  }
  return u;
}

BoostOperator::StepAdjoint BoostOperator::step_vjp(const StepCache& c, const Vec& g_u,
                                                   const Vec& g_next_xi, RenGrad& ren_grad,
                                                   Eigen::Ref<Vec> mlp_grad) const {
  Vec g_y1, g_y2;
  if (config_.gate == GateMode::kScalar) {
    g_y1 = g_u * c.y2(0);
    g_y2 = Vec::Constant(1, g_u.dot(c.y1));
  } else {
    g_y1 = g_u.cwiseProduct(c.y2);
    g_y2 = g_u.cwiseProduct(c.y1);
  }
  const Vec g_mlp_in = mlp_.backward(c.mlp, g_y2, mlp_grad);
  RenStepAdjoint ra = ren_step_vjp(ren_, c.ren, g_y1, g_next_xi, ren_grad);
  // The t = 0 shift is a constant offset, so dz/dw_hat = I.
  StepAdjoint adj;
  adj.w_hat = ra.u + g_mlp_in.head(config_.input_dim);
  adj.xi = std::move(ra.xi);
  return adj;
}

Signal BoostOperator::apply(const Signal& w_hat, const Signal& x_ref) const {
  require_dim(x_ref.steps(), w_hat.steps(), "boost reference horizon");
  State s = initial_state();
  Signal u(config_.control_dim, w_hat.horizon());
  for (Index t = 0; t <= w_hat.horizon(); ++t) u.at(t) = step(s, w_hat.at(t), x_ref.at(t));
  return u;
}

Signal BoostOperator::apply_ren(const Signal& w_hat, const Signal& x_ref) const {
  Signal z(w_hat.dim(), w_hat.horizon());
  for (Index t = 0; t <= w_hat.horizon(); ++t) z.at(t) = shifted_input(w_hat.at(t), x_ref.at(t), t);
  return ren_rollout(ren_, z);
}

double fit_decay_rate(const Signal& s, Index t0, Index t1) {
  if (t1 < 0) t1 = s.horizon();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (Index t = t0; t <= t1; ++t) {
    const double v = s.at(t).norm();
    if (!(v > 1e-280)) continue;
    const double y = std::log(v);
    sx += t;
    sy += y;
    sxx += double(t) * t;
    sxy += t * y;
    ++n;
  }
  if (n < 2) return 0.0;
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return std::exp(slope);
}

bool lp_output_guarantee_test(const BoostOperator& m, int trials, std::uint64_t seed,
                              const LpGuaranteeOptions& o) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  const BoostConfig& c = m.config();
  const Index settle = (o.active_until + o.horizon) / 2;
  for (int k = 0; k < trials; ++k) {
    Signal w(c.input_dim, o.horizon);
    for (Index t = 0; t <= o.active_until; ++t)
      for (Index i = 0; i < c.input_dim; ++i) w.at(t)(i) = n(rng);
    // Bounded, non-decaying reference: offset plus a persistent oscillation.
    Signal x_ref(c.reference_dim, o.horizon);
    Vec offset(c.reference_dim), amp(c.reference_dim);
    for (Index i = 0; i < c.reference_dim; ++i) {
      offset(i) = unif(rng);
      amp(i) = unif(rng);
    }
    for (Index t = 0; t <= o.horizon; ++t)
      x_ref.at(t) = offset + amp * std::sin(0.05 * double(t));
    const Signal u = m.apply(w, x_ref);
    if (!u.is_finite()) return false;
    const double total = lp_norm(u, o.p);
    if (total == 0.0) continue;
    if (tail_energy(u, settle, o.p) > o.tail_ratio_tolerance * total) return false;
  }
  return true;
}

}  // namespace rpb
