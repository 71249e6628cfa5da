#pragma once

#include "rpb/plant.hpp"
#include "rpb/signals.hpp"

namespace rpb {

/// Weights of the transient cost
///   sum_t [ sum_i (p_i - p_bar_i)^T Q (p_i - p_bar_i) + R |u|^2
///           + ca softplus(k (d_min - |p_1 - p_2|))^2
///           + co sum_obs w_obs softplus(k (r_obs - |p_i - c_obs|))^2 ].
struct LossSpec {
  Vec tracking_weight = Vec::Ones(2);  // diagonal of Q, shared by all robots
  double input_weight = 0.0;           // R
  double collision_weight = 100.0;     // ca
  double safety_distance = 0.5;        // d_min
  double obstacle_weight = 500.0;      // co
  double sharpness = 10.0;             // k

  void validate(const PlantLayout& layout) const;
};

double softplus(double x);

class Loss {
 public:
  Loss(LossSpec spec, ObstacleField field, PlantLayout layout);

  /// Per-step loss; optionally accumulates its gradient with respect to eta and u.
  double step(const Vec& eta, const Vec& u, const Vec& x_ref, Vec* g_eta = nullptr,
              Vec* g_u = nullptr) const;

  double trajectory(const Signal& eta, const Signal& u, const Signal& x_ref) const;

  const LossSpec& spec() const { return spec_; }
  const ObstacleField& field() const { return field_; }
  const PlantLayout& layout() const { return layout_; }

 private:
  LossSpec spec_;
  ObstacleField field_;
  PlantLayout layout_;
};

}  // namespace rpb
