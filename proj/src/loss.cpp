#include "rpb/loss.hpp"

#include <cmath>

namespace rpb {

void LossSpec::validate(const PlantLayout& layout) const {
  if (tracking_weight.size() != layout.spatial_dim) throw ConfigError("tracking weight must match the spatial dimension");
  if ((tracking_weight.array() <= 0.0).any()) throw ConfigError("tracking weight must be positive definite");
  if (input_weight < 0.0 || collision_weight < 0.0 || obstacle_weight < 0.0) {
    throw ConfigError("loss weights must be nonnegative");
  }
  if (safety_distance < 0.0 || !(sharpness > 0.0)) throw ConfigError("invalid barrier parameters");
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

namespace {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// weight * softplus(k (radius - dist))^2 and its derivative with respect to dist.
double barrier(double weight, double k, double radius, double dist, double* d_dist) {
  const double a = k * (radius - dist);
  const double s = softplus(a);
  if (d_dist) *d_dist = -2.0 * weight * s * logistic(a) * k;
  return weight * s * s;
}

}  // namespace

Loss::Loss(LossSpec spec, ObstacleField field, PlantLayout layout)
    : spec_(std::move(spec)), field_(std::move(field)), layout_(layout) {
  spec_.validate(layout_);
  field_.validate();
}

double Loss::step(const Vec& eta, const Vec& u, const Vec& x_ref, Vec* g_eta, Vec* g_u) const {
  const Index d = layout_.spatial_dim;
  double total = 0.0;
  for (Index i = 0; i < layout_.robots; ++i) {
    const Index ip = layout_.position_index(i);
    const Vec e = eta.segment(ip, d) - x_ref.segment(ip, d);
    total += e.dot(spec_.tracking_weight.cwiseProduct(e));
    if (g_eta) g_eta->segment(ip, d) += 2.0 * spec_.tracking_weight.cwiseProduct(e);
  }
  if (spec_.input_weight > 0.0) {
    total += spec_.input_weight * u.squaredNorm();
    if (g_u) *g_u += 2.0 * spec_.input_weight * u;
  }
  if (spec_.collision_weight > 0.0) {
    for (Index i = 0; i < layout_.robots; ++i) {
      for (Index j = i + 1; j < layout_.robots; ++j) {
        const Vec diff = eta.segment(layout_.position_index(i), d) - eta.segment(layout_.position_index(j), d);
        const double dist = diff.norm();
        double dd = 0.0;
        total += barrier(spec_.collision_weight, spec_.sharpness, spec_.safety_distance, dist, &dd);
        if (g_eta && dist > 0.0) {
          const Vec g = dd * diff / dist;
          g_eta->segment(layout_.position_index(i), d) += g;
          g_eta->segment(layout_.position_index(j), d) -= g;
        }
      }
    }
  }
  if (spec_.obstacle_weight > 0.0 && d == 2) {
    for (Index i = 0; i < layout_.robots; ++i) {
      const Index ip = layout_.position_index(i);
      for (const Obstacle& o : field_.obstacles) {
        const Vec diff = eta.segment(ip, d) - o.center;
        const double dist = diff.norm();
        double dd = 0.0;
        total += barrier(spec_.obstacle_weight * o.weight, spec_.sharpness, o.radius, dist, &dd);
        if (g_eta && dist > 0.0) g_eta->segment(ip, d) += dd * diff / dist;
      }
    }
  }
  return total;
}

double Loss::trajectory(const Signal& eta, const Signal& u, const Signal& x_ref) const {
  double total = 0.0;
  for (Index t = 0; t <= eta.horizon(); ++t) total += step(eta.at(t), u.at(t), x_ref.at(t));
  return total;
}

}  // namespace rpb
