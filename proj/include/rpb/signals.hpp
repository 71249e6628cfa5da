#pragma once

#include "rpb/types.hpp"

#include <iosfwd>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace rpb {

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

/// Finite-horizon sequence x_0, ..., x_T of vectors with a fixed dimension.
///
/// Values are stored column-wise (one column per time step).
class Signal {
 public:
  Signal() = default;
  Signal(Index dim, Index horizon);
  explicit Signal(Mat values);

  static Signal constant(const Vec& value, Index horizon);

  Index dim() const { return values_.rows(); }
  Index horizon() const { return values_.cols() - 1; }
  Index steps() const { return values_.cols(); }

  auto at(Index t) const { return values_.col(t); }
  auto at(Index t) { return values_.col(t); }

  const Mat& values() const { return values_; }
  Mat& values() { return values_; }

  bool is_finite() const { return values_.allFinite(); }

  /// Copy of steps t0..t1 (inclusive).
  Signal slice(Index t0, Index t1) const;

  Signal operator-(const Signal& other) const;
  Signal operator+(const Signal& other) const;
  Signal operator*(double c) const;

 private:
  Mat values_;
};

/// (sum_t |s_t|_p^p)^(1/p) with the vector p-norm per step; p = kInfNorm gives sup_t |s_t|_inf.
double lp_norm(const Signal& s, double p = 2.0);

/// lp_norm of the suffix s_{t0..T}.
double tail_energy(const Signal& s, Index t0, double p = 2.0);

double vector_norm(const Eigen::Ref<const Vec>& v, double p);

// CSV with a header row; one row per time step.
void write_csv(std::ostream& os, const Signal& s, const std::vector<std::string>& names = {});
void write_csv(const std::string& path, const Signal& s, const std::vector<std::string>& names = {});
Signal read_csv(std::istream& is, std::vector<std::string>* names = nullptr);
Signal read_csv(const std::string& path, std::vector<std::string>* names = nullptr);

/// Sequence-to-sequence operator with resettable internal state.
///
/// Causality (output at t depends on inputs 0..t only) is a contract that
/// implementations must honor; check_causality() probes it.
class SequenceOperator {
 public:
  virtual ~SequenceOperator() = default;
  virtual Index input_dim() const = 0;
  virtual Index output_dim() const = 0;
  virtual void reset() = 0;
  virtual Signal apply(const Signal& input) = 0;
};

/// Operator defined by a per-step update; apply() resets and steps through the input.
class StepOperator : public SequenceOperator {
 public:
  virtual Vec step(const Vec& input) = 0;
  Signal apply(const Signal& input) override;
};

/// Randomized prefix-perturbation test: pairs of inputs that agree on 0..t must
/// produce outputs that agree on 0..t.
bool check_causality(SequenceOperator& op, int trials, std::uint64_t seed = 0, Index horizon = 16);

Signal gaussian_signal(Index dim, Index horizon, double stddev, std::mt19937_64& rng);

}  // namespace rpb
