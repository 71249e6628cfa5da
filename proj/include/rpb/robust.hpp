#pragma once

#include "rpb/train.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rpb {

/// Small-gain summary for a mismatched plant under a boosted controller.
struct GainReport {
  double alpha_delta = 0.0;
  double alpha_fx = 0.0;
  double alpha_m = 0.0;
  double margin = 1.0;  // 1 - alpha_delta alpha_m (alpha_fx + 1)
  bool admissible = true;
  double u_gain = 0.0;  // NaN when not admissible
  double e_gain = 0.0;

  std::string to_json() const;
  std::string to_table() const;
};

struct ConditionResult {
  bool holds = true;
  double margin = 1.0;
  double threshold = 0.0;  // largest admissible alpha_m (+inf without mismatch)
};

ConditionResult small_gain_condition(double alpha_delta, double alpha_fx, double alpha_m);

struct ClosedLoopBounds {
  double u_gain = 0.0;
  double e_gain = 0.0;
};

/// Throws ConditionViolated when the margin is not positive.
ClosedLoopBounds closed_loop_bounds(double alpha_delta, double alpha_fx, double alpha_m);

GainReport make_gain_report(double alpha_delta, double alpha_fx, double alpha_m);

using SignalMap = std::function<Signal(const Signal&)>;

/// Largest output/input difference ratio over sampled input pairs. The pairs are drawn
/// from a fixed stream, so more trials never give a smaller value. Throws Error when no
/// pair has a nonzero input difference.
double estimate_incremental_gain(const SignalMap& op, Index input_dim, int trials, Index horizon,
                                 double p = 2.0, std::uint64_t seed = 0);
double estimate_incremental_gain(SequenceOperator& op, int trials, Index horizon, double p = 2.0,
                                 std::uint64_t seed = 0);

/// Open-loop map (u, w, x_ref) -> x of the true plant.
Signal simulate_plant_state(const Plant& plant, const Signal& u, const Signal& w, const Signal& x_ref);

/// Gain of the input-to-state map measured against the undisturbed trajectory that sits
/// on an achievable reference: |x - x_ref| / (|u| + |w - w_ref|).
double estimate_fx_gain(const Plant& plant, const Layout& layout, int trials, Index horizon,
                        double p = 2.0, std::uint64_t seed = 0);

/// Copy of m whose MLP ignores the disturbance estimate and whose REN sees w_hat - w_hat_ref.
/// The result has incremental gain at most bound * alpha(M1) for every fixed reference.
BoostOperator reference_gated(const BoostOperator& m);

/// bound * certified REN gain (including the output scale); meaningful for gated operators.
double boost_gain_bound(const BoostOperator& m);

struct RobustValidation {
  int trials = 0;
  int decayed = 0;
  double max_u_ratio = 0.0;  // |u| / |w - w_ref|
  double max_e_ratio = 0.0;  // |e| / |w - w_ref|
  double mean_u_ratio = 0.0;
  double mean_e_ratio = 0.0;
  double max_tail_e = 0.0;  // tail_energy / lp_norm at 0.8 T
  double max_tail_u = 0.0;
};

/// Closed-loop rollouts of the mismatched plant with the nominal internal model. Disturbances
/// act on [0, horizon / 5] and references are constant targets from the layout.
RobustValidation validate_robust_tracking(const Plant& plant, const Plant& model, const BoostOperator& m,
                                          const Layout& layout, const DisturbanceSpec& disturbance,
                                          int trials, Index horizon, std::uint64_t seed = 0,
                                          double tail_threshold = 1e-2);

struct RobustOptions {
  int fx_trials = 100;
  double fx_safety = 1.5;
  double target_margin = 0.5;
  int trials = 50;
  Index horizon = 400;
  std::vector<double> sweep = {0.0, 0.25, 0.5, 0.75, 1.0};  // multiples of the chosen beta
  std::uint64_t seed = 0;
  double tail_threshold = 1e-2;
};

struct SweepPoint {
  double beta = 0.0;
  GainReport report;
  RobustValidation validation;
};

struct RobustAnalysis {
  GainReport report;
  double beta = 1.0;
  double unit_gain_bound = 0.0;  // bound of the gated operator at beta = 1
  RobustValidation validation;
  std::vector<SweepPoint> sweep;
  bool sweep_u_monotone = true;
  bool sweep_e_monotone = true;

  bool tails_decayed() const { return validation.decayed == validation.trials; }
  bool within_bounds() const;
};

/// Estimates the gains, picks beta so that the margin equals the target (beta = 1 when there
/// is no mismatch or no certifiable margin), validates and sweeps beta.
RobustAnalysis analyze_robustness(const TrainProblem& problem, const MismatchSpec& mismatch,
                                  const BoostOperator& m, const RobustOptions& options);

void write_sweep_csv(const std::string& path, const std::vector<SweepPoint>& sweep);

}  // namespace rpb
