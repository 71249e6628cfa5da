#pragma once

#include "rpb/ren.hpp"
#include "rpb/signals.hpp"

#include <random>
#include <vector>

namespace rpb {

/// Feedforward network with sigmoid hidden layers and output bound * (2 sigmoid(z) - 1),
/// so every output entry lies in (-bound, bound).
class BoundedMlp {
 public:
  BoundedMlp() = default;
  /// widths = {input, hidden..., output}.
  BoundedMlp(std::vector<Index> widths, double bound);

  Index input_dim() const { return widths_.front(); }
  Index output_dim() const { return widths_.back(); }
  const std::vector<Index>& widths() const { return widths_; }
  double bound() const { return bound_; }
  Index param_count() const { return params_.size(); }

  const Vec& params() const { return params_; }
  void set_params(const Vec& theta);

  struct Cache {
    std::vector<Vec> activations;  // input, hidden outputs..., output
  };

  Vec forward(const Vec& input, Cache* cache = nullptr) const;

  /// Accumulates dL/dtheta into grad and returns dL/dinput.
  Vec backward(const Cache& cache, const Vec& g_output, Eigen::Ref<Vec> grad) const;

  /// Weight matrix / bias of layer k as views into the flat parameter vector.
  Eigen::Map<const Mat> weight(std::size_t k) const;
  Eigen::Map<const Vec> bias(std::size_t k) const;

 private:
  std::vector<Index> widths_;
  std::vector<Index> offsets_;  // weight offset per layer; bias follows the weight
  double bound_ = 1.0;
  Vec params_;
};

double sigmoid(double z);

/// How the REN output y1 and the MLP output y2 combine into the control input.
enum class GateMode {
  kElementwise,  // u = y1 .* y2, y2 has the control dimension
  kScalar,       // u = y1 * y2, y2 is a scalar
};

struct BoostConfig {
  Index input_dim = 12;      // dimension of the disturbance estimate
  Index reference_dim = 8;   // dimension of x_ref
  Index control_dim = 4;
  Index ren_state = 12;
  Index ren_nonlinear = 12;
  std::vector<Index> hidden = {15, 20, 14};
  double bound = 1.0;
  double output_scale = 1.0;
  GateMode gate = GateMode::kElementwise;
  /// Subtract (x_ref,0, 0) from the disturbance estimate at t = 0 so that a system
  /// started on its reference produces zero input for both factors.
  bool reference_relative_input = false;

  RenDims ren_dims() const { return {ren_state, ren_nonlinear, input_dim, control_dim}; }
  Index mlp_output_dim() const { return gate == GateMode::kScalar ? 1 : control_dim; }
  std::vector<Index> mlp_widths() const;
};

/// u_t = M1(w_hat)_t (.) M2(w_hat_t, x_ref_t): a contracting REN times a bounded MLP.
///
/// The parameter vector is theta = (theta1, theta2) with theta1 the REN free
/// parameters and theta2 the MLP weights.
class BoostOperator {
 public:
  BoostOperator() = default;
  explicit BoostOperator(const BoostConfig& config);

  static BoostOperator random(const BoostConfig& config, double stddev, std::mt19937_64& rng);

  const BoostConfig& config() const { return config_; }
  Index param_count() const { return ren_params_.theta.size() + mlp_.param_count(); }
  Index ren_param_count() const { return ren_params_.theta.size(); }

  Vec params() const;
  void set_params(const Vec& theta);
  void set_output_scale(double beta);

  const RenFreeParams& ren_params() const { return ren_params_; }
  const RenRealization& ren() const { return ren_; }
  const BoundedMlp& mlp() const { return mlp_; }
  BoundedMlp& mutable_mlp() { return mlp_; }

  /// Replaces the realization directly (for hand-built tests); set_params() re-realizes.
  void override_realization(RenRealization r) { ren_ = std::move(r); }

  struct State {
    Vec xi;
    Index t = 0;
  };
  State initial_state() const;

  struct StepCache {
    RenStepCache ren;
    BoundedMlp::Cache mlp;
    Vec y1, y2;
  };

  /// One step of the operator; advances state.
  Vec step(State& state, const Vec& w_hat, const Vec& x_ref, StepCache* cache = nullptr) const;

  struct StepAdjoint {
    Vec w_hat;
    Vec xi;
  };
  /// Reverse of step(): given dL/du and dL/dxi_{t+1}, accumulates REN realization and MLP
  /// parameter adjoints and returns dL/dw_hat, dL/dxi_t.
  StepAdjoint step_vjp(const StepCache& cache, const Vec& g_u, const Vec& g_next_xi,
                       RenGrad& ren_grad, Eigen::Ref<Vec> mlp_grad) const;

  /// Applies the operator to whole sequences.
  Signal apply(const Signal& w_hat, const Signal& x_ref) const;

  /// REN factor alone on a whole sequence (with the same input shift as apply()).
  Signal apply_ren(const Signal& w_hat, const Signal& x_ref) const;

 private:
  Vec shifted_input(const Vec& w_hat, const Vec& x_ref, Index t) const;

  BoostConfig config_;
  RenFreeParams ren_params_;
  RenRealization ren_;
  BoundedMlp mlp_;
};

/// Tail-decay test of lp preservation: for w_hat vanishing after t0 and a
/// bounded, non-decaying x_ref, the control tail must decay geometrically.
struct LpGuaranteeOptions {
  Index horizon = 400;
  Index active_until = 20;  // w_hat is random on [0, active_until], zero afterwards
  double tail_ratio_tolerance = 1e-3;
  double p = 2.0;
};
bool lp_output_guarantee_test(const BoostOperator& m, int trials, std::uint64_t seed,
                              const LpGuaranteeOptions& options = {});

/// Least-squares geometric decay rate of |s_t| on [t0, T] (fits log|s_t| = a + t log r).
double fit_decay_rate(const Signal& s, Index t0, Index t1 = -1);

}  // namespace rpb
