#pragma once

#include "rpb/signals.hpp"
#include "rpb/types.hpp"

#include <cstdint>
#include <random>

namespace rpb {

struct RenDims {
  Index state = 12;
  Index nonlinear = 12;
  Index input = 1;
  Index output = 1;

  void validate() const;
  bool operator==(const RenDims&) const = default;
};

/// Number of free parameters of the contracting REN direct parametrization.
Index ren_param_count(const RenDims& dims);

/// Unconstrained parameter vector for a contracting acyclic REN.
///
/// Layout (column-major blocks, concatenated): X (2n+q square), Y (n x n), B2 (n x m),
/// C2 (p x n), D12 (q x m), D21 (p x q), D22 (p x m), where n = state, q = nonlinear,
/// m = input, p = output.
struct RenFreeParams {
  RenDims dims;
  Vec theta;

  static RenFreeParams zeros(const RenDims& dims);
  static RenFreeParams gaussian(const RenDims& dims, double stddev, std::mt19937_64& rng);
};

/// Explicit state-space form of a REN:
///   v = C1 xi + D11 w + D12 u + bv,  w = tanh(v)   (D11 strictly lower triangular)
///   xi+ = A xi + B1 w + B2 u + bx
///   y = scale * (C2 xi + D21 w + D22 u + by)
/// together with a contraction certificate |xi+_a - xi+_b|_P <= rate |xi_a - xi_b|_P.
struct RenRealization {
  RenDims dims;
  Mat A, B1, B2, C1, D11, D12, C2, D21, D22;
  Vec bx, bv, by;
  Mat metric;          // P, symmetric positive definite
  Vec multiplier;      // diagonal sector multiplier of the equilibrium layer, positive
  double rate = 1.0;   // contraction rate bound in [0, 1) for certified realizations
  double output_scale = 1.0;

  /// Zero realization with identity metric; useful for hand-built tests.
  static RenRealization zeros(const RenDims& dims);
};

/// Regularizer added to X^T X so that the certificate is strictly feasible.
inline constexpr double kRenEpsilon = 1e-4;

/// Total map from free parameters to a contracting realization.
RenRealization realize(const RenFreeParams& params, double output_scale = 1.0,
                       double epsilon = kRenEpsilon);

/// Adjoints of the realization matrices that depend on theta.
struct RenGrad {
  Mat A, B1, B2, C1, D11, D12, C2, D21, D22;

  static RenGrad zeros(const RenDims& dims);
  RenGrad& operator+=(const RenGrad& other);
};

/// Pulls realization adjoints back to the free parameter vector.
Vec realize_vjp(const RenFreeParams& params, const RenGrad& grad, double epsilon = kRenEpsilon);

/// Forward values kept for the backward pass of one step.
struct RenStepCache {
  Vec xi, u, w;
};

struct RenStepOut {
  Vec next_state;
  Vec output;
};

RenStepOut ren_step(const RenRealization& r, const Vec& xi, const Vec& u,
                    RenStepCache* cache = nullptr);

/// Reverse pass of ren_step. Accumulates into grad and returns adjoints of (xi, u).
struct RenStepAdjoint {
  Vec xi;
  Vec u;
};
RenStepAdjoint ren_step_vjp(const RenRealization& r, const RenStepCache& cache,
                            const Vec& g_output, const Vec& g_next_state, RenGrad& grad);

/// Runs the REN from xi0 (zero by default) over a whole input sequence.
Signal ren_rollout(const RenRealization& r, const Signal& input, const Vec* xi0 = nullptr);

/// Geometric-decay check of the state discrepancy in the certificate metric.
bool verify_contraction(const RenRealization& r, int trials, Index horizon, std::uint64_t seed = 0);

/// Sampled lower bound on the incremental gain of the input-output map (xi0 = 0).
double empirical_incremental_gain(const RenRealization& r, int trials, Index horizon,
                                  double p = 2.0, std::uint64_t seed = 0);

/// Upper bound on the incremental l2 gain derived from the contraction certificate
/// (comparison-system argument). Conservative; +inf when rate >= 1.
double incremental_gain_bound(const RenRealization& r);

/// Largest eigenvalue of the explicit-form contraction inequality
///   [A B1]^T P [A B1] - diag(rate^2 P, 0) + 2 S(multiplier) <= 0,
/// where S encodes the slope-restricted sector condition of tanh. A realization
/// carries a valid certificate when this is <= 1e-8 (scaled by the problem size).
double contraction_residual(const RenRealization& r);

/// SequenceOperator adapter: state starts at zero.
class RenOperator : public StepOperator {
 public:
  explicit RenOperator(RenRealization r);
  Index input_dim() const override { return r_.dims.input; }
  Index output_dim() const override { return r_.dims.output; }
  void reset() override;
  Vec step(const Vec& input) override;
  const RenRealization& realization() const { return r_; }

 private:
  RenRealization r_;
  Vec xi_;
};

}  // namespace rpb
