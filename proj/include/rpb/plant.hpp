#pragma once

#include "rpb/signals.hpp"
#include "rpb/types.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rpb {

/// Number of point-mass robots and the dimension of the space they move in.
struct PlantLayout {
  Index robots = 2;
  Index spatial_dim = 2;

  Index plant_dim() const { return 2 * spatial_dim * robots; }  // x = (p_1, q_1, ..., p_N, q_N)
  Index integrator_dim() const { return spatial_dim * robots; }  // v = (v_1, ..., v_N)
  Index state_dim() const { return plant_dim() + integrator_dim(); }
  Index input_dim() const { return spatial_dim * robots; }  // target offsets delta_ref
  Index reference_dim() const { return plant_dim(); }

  Index position_index(Index robot) const { return 2 * spatial_dim * robot; }
  Index velocity_index(Index robot) const { return 2 * spatial_dim * robot + spatial_dim; }
  Index integrator_index(Index robot) const { return plant_dim() + spatial_dim * robot; }
  Index input_index(Index robot) const { return spatial_dim * robot; }

  bool operator==(const PlantLayout&) const = default;
};

/// Diagonal base-controller gains of one robot.
struct RobotGains {
  Vec kp, ki, kd;
};

struct RobotParams {
  double mass = 1.0;
  double drag_linear = 1.0;
  double drag_quadratic = 0.1;
  double sampling_period = 0.05;
  std::vector<RobotGains> gains;

  /// Defaults: Kp = 4 I, Ki = 0.1 I, Kd = 2 I for every robot.
  static RobotParams defaults(const PlantLayout& layout);
  void validate(const PlantLayout& layout) const;
};

/// Base-controller force F = Kp (p_bar + delta - p) - Kd q + Ki v.
Vec base_force(const RobotGains& gains, const Vec& p, const Vec& q, const Vec& v,
               const Vec& target, const Vec& offset);

enum class MismatchKind { kNone, kParametricDrag, kBoundedOperator };

/// Model mismatch Delta between the true plant and the nominal model.
///
/// kBoundedOperator applies an unmodeled force gain * tanh(L [x - x_ref; u]) to every
/// robot, with L a fixed matrix of unit spectral norm. The force is integrated like the
/// control force, so alpha(Delta) <= gain * (Ts / m) * sqrt(1 + Ts^2).
struct MismatchSpec {
  MismatchKind kind = MismatchKind::kNone;
  double gain = 0.0;
  double drag_linear_error = 0.0;
  double drag_quadratic_error = 0.0;
  std::uint64_t seed = 7;

  /// Analytic upper bound on the incremental gain of Delta (+inf when none is known).
  double alpha_bound(const RobotParams& nominal) const;
};

std::string to_string(MismatchKind kind);
MismatchKind mismatch_kind_from_string(const std::string& s);

/// Augmented system eta = (x, v) in reference-governor wiring: the control input is an
/// offset to the target tracked by the integral base controller.
class Plant {
 public:
  Plant() : Plant(PlantLayout{}) {}
  explicit Plant(PlantLayout layout, RobotParams params = {}, MismatchSpec mismatch = {});

  const PlantLayout& layout() const { return layout_; }
  const RobotParams& params() const { return params_; }
  const MismatchSpec& mismatch() const { return mismatch_; }
  const Mat& mismatch_matrix() const { return mismatch_matrix_; }  // L

  /// f(eta_t, u_t, x_ref_t) = eta_{t+1} - w_{t+1}. Throws IntegrationBlowup on non-finite output.
  Vec transition(const Vec& eta, const Vec& u, const Vec& x_ref) const;

  /// The mismatch contribution delta(x, u, x_ref) added to the plant-state block (zero if none).
  Vec mismatch_term(const Vec& eta, const Vec& u, const Vec& x_ref) const;

  struct Adjoint {
    Vec eta;
    Vec u;
  };
  /// Vector-Jacobian product of transition() with respect to (eta, u).
  Adjoint transition_vjp(const Vec& eta, const Vec& u, const Vec& x_ref, const Vec& g_next) const;

  /// Plant-state block x of an augmented state.
  Vec plant_state(const Vec& eta) const { return eta.head(layout_.plant_dim()); }
  Vec positions(const Vec& eta) const;
  Vec base_input_force(const Vec& eta, const Vec& u, const Vec& x_ref, Index robot) const;

 private:
  PlantLayout layout_;
  RobotParams params_;
  MismatchSpec mismatch_;
  Mat mismatch_matrix_;
};

/// True plant f = f_hat + Delta built from a nominal model.
Plant apply_mismatch(const MismatchSpec& spec, const Plant& nominal);

/// w_hat_t = eta_t - f_hat(eta_{t-1}, u_{t-1}, x_ref_{t-1}); w_hat_0 = eta_0.
Vec reconstruct_disturbance(const Plant& model, const Signal& eta, const Signal& u,
                            const Signal& x_ref, Index t);

struct Obstacle {
  Vec center;
  double radius = 1.0;
  double weight = 1.0;
};

struct ObstacleField {
  std::vector<Obstacle> obstacles;
  void validate() const;
};

/// Named benchmark geometry: obstacles, nominal starts and the target set.
struct Layout {
  std::string name;
  ObstacleField field;
  Vec start;              // nominal start positions (p_1, p_2)
  double target_y = 2.0;  // targets lie on this horizontal line
  double target_x_min = -2.0;
  double target_x_max = 2.0;
  double min_separation = 1.0;
};

Layout make_layout(const std::string& name);

struct DisturbanceSpec {
  double initial_std = 0.5;  // Gaussian perturbation of the start positions
  double noise_std = 0.0;    // persistent process noise on x for 1 <= t <= noise_until
  Index noise_until = 0;
};

/// w_0 = (x_0, 0_v) with x_0 the perturbed start at rest; w_t (t >= 1) per spec. The
/// integrator block is always zero.
Signal sample_disturbance(const PlantLayout& layout, const Vec& start, const DisturbanceSpec& spec,
                          Index horizon, std::mt19937_64& rng);

/// Uniform sample of target positions (p_1, p_2) from the layout's target set by rejection.
Vec sample_reference(const Layout& layout, std::mt19937_64& rng, int budget = 10000);

/// Constant x_ref signal with the given target positions and zero velocities.
Signal reference_signal(const PlantLayout& layout, const Vec& targets, Index horizon);

/// Tracking error e = x - x_ref over the whole plant state.
Signal tracking_error(const PlantLayout& layout, const Signal& eta, const Signal& x_ref);

}  // namespace rpb
