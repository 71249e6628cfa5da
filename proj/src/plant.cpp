#include "rpb/plant.hpp"

#include <cmath>
#include <limits>

namespace rpb {

RobotParams RobotParams::defaults(const PlantLayout& layout) {
  RobotParams p;
  const Index d = layout.spatial_dim;
  for (Index i = 0; i < layout.robots; ++i) {
    p.gains.push_back({Vec::Constant(d, 4.0), Vec::Constant(d, 0.1), Vec::Constant(d, 2.0)});
  }
  return p;
}

void RobotParams::validate(const PlantLayout& layout) const {
  if (!(mass > 0.0) || !(sampling_period > 0.0)) throw ConfigError("mass and sampling period must be positive");
  if (drag_linear < 0.0 || drag_quadratic < 0.0) throw ConfigError("drag coefficients must be nonnegative");
  if (static_cast<Index>(gains.size()) != layout.robots) throw ConfigError("need one gain set per robot");
  for (const auto& g : gains) {
    if (g.kp.size() != layout.spatial_dim || g.ki.size() != layout.spatial_dim ||
        g.kd.size() != layout.spatial_dim) {
      throw ConfigError("gain vectors must match the spatial dimension");
    }
  }
}

Vec base_force(const RobotGains& g, const Vec& p, const Vec& q, const Vec& v, const Vec& target,
               const Vec& offset) {
  return g.kp.cwiseProduct(target + offset - p) - g.kd.cwiseProduct(q) + g.ki.cwiseProduct(v);
}

double MismatchSpec::alpha_bound(const RobotParams& nominal) const {
  switch (kind) {
    case MismatchKind::kNone:
      return 0.0;
    case MismatchKind::kBoundedOperator:
      return nominal.sampling_period / nominal.mass * std::abs(gain) *
             std::sqrt(1.0 + nominal.sampling_period * nominal.sampling_period);
    case MismatchKind::kParametricDrag: {
      if (drag_quadratic_error != 0.0) return std::numeric_limits<double>::infinity();
      const double ts = nominal.sampling_period;
      return ts / nominal.mass * std::abs(drag_linear_error) * std::sqrt(1.0 + ts * ts);
    }
  }
  return std::numeric_limits<double>::infinity();
}

std::string to_string(MismatchKind kind) {
  switch (kind) {
    case MismatchKind::kNone:
      return "none";
    case MismatchKind::kParametricDrag:
      return "parametric-drag-error";
    case MismatchKind::kBoundedOperator:
      return "bounded-operator";
  }
  return "none";
}

MismatchKind mismatch_kind_from_string(const std::string& s) {
  if (s == "none") return MismatchKind::kNone;
  if (s == "parametric-drag-error") return MismatchKind::kParametricDrag;
  if (s == "bounded-operator") return MismatchKind::kBoundedOperator;
  throw ConfigError("unknown mismatch kind '" + s + "'");
}

Plant::Plant(PlantLayout layout, RobotParams params, MismatchSpec mismatch)
    : layout_(layout), params_(std::move(params)), mismatch_(mismatch) {
  if (layout_.robots <= 0 || layout_.spatial_dim <= 0) throw ConfigError("plant layout must be positive");
  if (params_.gains.empty()) {
    RobotParams d = RobotParams::defaults(layout_);
    params_.gains = d.gains;
  }
  params_.validate(layout_);
  if (mismatch_.kind == MismatchKind::kBoundedOperator) {
    const Index rows = layout_.input_dim();
    const Index cols = layout_.plant_dim() + layout_.input_dim();
    std::mt19937_64 rng(mismatch_.seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Mat L(rows, cols);
    for (Index i = 0; i < L.size(); ++i) L.data()[i] = n(rng);
    const double s = Eigen::JacobiSVD<Mat>(L).singularValues()(0);
    mismatch_matrix_ = L / s;
  }
}

Vec Plant::positions(const Vec& eta) const {
  const Index d = layout_.spatial_dim;
  Vec p(layout_.robots * d);
  for (Index i = 0; i < layout_.robots; ++i) p.segment(i * d, d) = eta.segment(layout_.position_index(i), d);
  return p;
}

Vec Plant::base_input_force(const Vec& eta, const Vec& u, const Vec& x_ref, Index i) const {
  const Index d = layout_.spatial_dim;
  return base_force(params_.gains[i], eta.segment(layout_.position_index(i), d),
                    eta.segment(layout_.velocity_index(i), d), eta.segment(layout_.integrator_index(i), d),
                    x_ref.segment(layout_.position_index(i), d), u.segment(layout_.input_index(i), d));
}

Vec Plant::mismatch_term(const Vec& eta, const Vec& u, const Vec& x_ref) const {
  const Index nx = layout_.plant_dim();
  Vec out = Vec::Zero(nx);
  if (mismatch_.kind != MismatchKind::kBoundedOperator || mismatch_.gain == 0.0) return out;
  Vec z(nx + layout_.input_dim());
  z << eta.head(nx) - x_ref, u;
  const Vec force = mismatch_.gain * (mismatch_matrix_ * z).array().tanh().matrix();
  // The unmodeled force enters through the same semi-implicit Euler step as the control force.
  const Index d = layout_.spatial_dim;
  const double k = params_.sampling_period / params_.mass;
  for (Index i = 0; i < layout_.robots; ++i) {
    const auto f = force.segment(layout_.input_index(i), d);
    out.segment(layout_.velocity_index(i), d) = k * f;
    out.segment(layout_.position_index(i), d) = params_.sampling_period * k * f;
  }
  return out;
}

Vec Plant::transition(const Vec& eta, const Vec& u, const Vec& x_ref) const {
  require_dim(eta.size(), layout_.state_dim(), "plant state");
  require_dim(u.size(), layout_.input_dim(), "plant input");
  require_dim(x_ref.size(), layout_.reference_dim(), "plant reference");
  const Index d = layout_.spatial_dim;
  const double k = params_.sampling_period / params_.mass;
  Vec next(eta.size());
  for (Index i = 0; i < layout_.robots; ++i) {
    const Index ip = layout_.position_index(i), iq = layout_.velocity_index(i), iv = layout_.integrator_index(i);
    const auto p = eta.segment(ip, d);
    const auto q = eta.segment(iq, d);
    const Vec err = x_ref.segment(ip, d) + u.segment(layout_.input_index(i), d) - p;
    const Vec force = base_input_force(eta, u, x_ref, i);
    const Vec drag = params_.drag_linear * q + params_.drag_quadratic * q.norm() * q;
    const Vec q_next = q + k * (force - drag);
    next.segment(iq, d) = q_next;
    next.segment(ip, d) = p + params_.sampling_period * q_next;
    next.segment(iv, d) = eta.segment(iv, d) + err;
  }
  if (mismatch_.kind == MismatchKind::kBoundedOperator) {
    next.head(layout_.plant_dim()) += mismatch_term(eta, u, x_ref);
  }
  if (!next.allFinite()) throw IntegrationBlowup("plant integration produced a non-finite state");
  return next;
}

Plant::Adjoint Plant::transition_vjp(const Vec& eta, const Vec& u, const Vec& x_ref,
                                     const Vec& g_next) const {
  const Index d = layout_.spatial_dim;
  const double ts = params_.sampling_period;
  const double k = ts / params_.mass;
  Adjoint adj{Vec::Zero(eta.size()), Vec::Zero(u.size())};
  for (Index i = 0; i < layout_.robots; ++i) {
    const Index ip = layout_.position_index(i), iq = layout_.velocity_index(i),
                iv = layout_.integrator_index(i), iu = layout_.input_index(i);
    const RobotGains& g = params_.gains[i];
    const Vec q = eta.segment(iq, d);
    const Vec gp_next = g_next.segment(ip, d);
    const Vec gv_next = g_next.segment(iv, d);
    const Vec gq_total = g_next.segment(iq, d) + ts * gp_next;

    Vec gp = gp_next;
    Vec gq = gq_total;
    Vec gv = gv_next;
    Vec gu = gv_next;
    gp -= gv_next;

    const Vec g_force = k * gq_total;
    const Vec g_drag = -k * gq_total;
    const double qn = q.norm();
    gq += params_.drag_linear * g_drag;
    if (qn > 0.0) gq += params_.drag_quadratic * (qn * g_drag + q * (q.dot(g_drag) / qn));

    gu += g.kp.cwiseProduct(g_force);
    gp -= g.kp.cwiseProduct(g_force);
    gq -= g.kd.cwiseProduct(g_force);
    gv += g.ki.cwiseProduct(g_force);

    adj.eta.segment(ip, d) += gp;
    adj.eta.segment(iq, d) += gq;
    adj.eta.segment(iv, d) += gv;
    adj.u.segment(iu, d) += gu;
  }
  if (mismatch_.kind == MismatchKind::kBoundedOperator && mismatch_.gain != 0.0) {
    const Index nx = layout_.plant_dim();
    Vec z(nx + layout_.input_dim());
    z << eta.head(nx) - x_ref, u;
    const Vec th = (mismatch_matrix_ * z).array().tanh().matrix();
    Vec g_force(layout_.input_dim());
    for (Index i = 0; i < layout_.robots; ++i) {
      g_force.segment(layout_.input_index(i), d) =
          k * (g_next.segment(layout_.velocity_index(i), d) + ts * g_next.segment(layout_.position_index(i), d));
    }
    const Vec gs = mismatch_.gain * g_force.cwiseProduct((1.0 - th.array().square()).matrix());
    const Vec gz = mismatch_matrix_.transpose() * gs;
    adj.eta.head(nx) += gz.head(nx);
    adj.u += gz.tail(layout_.input_dim());
  }
  return adj;
}

Plant apply_mismatch(const MismatchSpec& spec, const Plant& nominal) {
  RobotParams params = nominal.params();
  if (spec.kind == MismatchKind::kParametricDrag) {
    params.drag_linear += spec.drag_linear_error;
    params.drag_quadratic += spec.drag_quadratic_error;
  }
  return Plant(nominal.layout(), params, spec);
}

Vec reconstruct_disturbance(const Plant& model, const Signal& eta, const Signal& u, const Signal& x_ref,
                            Index t) {
  if (t < 0 || t > eta.horizon()) throw std::out_of_range("reconstruct_disturbance: time out of range");
  if (t == 0) return eta.at(0);
  if (u.horizon() < t - 1 || x_ref.horizon() < t - 1) {
    throw DimensionMismatch("reconstruct_disturbance: history shorter than t");
  }
  return eta.at(t) - model.transition(eta.at(t - 1), u.at(t - 1), x_ref.at(t - 1));
}

void ObstacleField::validate() const {
  for (const auto& o : obstacles) {
    if (!(o.radius > 0.0)) throw ConfigError("obstacle radius must be positive");
    if (o.center.size() != 2) throw ConfigError("obstacle centers are planar");
  }
}

Layout make_layout(const std::string& name) {
  Layout l;
  l.name = name;
  auto obstacle = [](double x, double y, double r) { return Obstacle{(Vec(2) << x, y).finished(), r, 1.0}; };
  if (name == "corridor") {
    l.field.obstacles = {obstacle(-2.0, 0.0, 1.0), obstacle(2.0, 0.0, 1.0)};
    l.start = (Vec(4) << -2.0, -2.0, 2.0, -2.0).finished();
    l.target_y = 2.0;
    l.target_x_min = -2.0;
    l.target_x_max = 2.0;
  } else if (name == "mountain_range") {
    for (double y : {-0.5, 0.5})
      for (double x : {-1.5, 0.0, 1.5}) l.field.obstacles.push_back(obstacle(x, y, 0.4));
    l.start = (Vec(4) << -2.0, -2.5, 2.0, -2.5).finished();
    l.target_y = 2.5;
    l.target_x_min = -2.5;
    l.target_x_max = 2.5;
  } else if (name == "free") {
    l.start = (Vec(4) << -2.0, -2.0, 2.0, -2.0).finished();
  } else {
    throw ConfigError("unknown layout '" + name + "'");
  }
  l.field.validate();
  return l;
}

Signal sample_disturbance(const PlantLayout& layout, const Vec& start, const DisturbanceSpec& spec,
                          Index horizon, std::mt19937_64& rng) {
  require_dim(start.size(), layout.robots * layout.spatial_dim, "nominal start");
  const Index d = layout.spatial_dim;
  std::normal_distribution<double> n(0.0, 1.0);
  Signal w(layout.state_dim(), horizon);
  for (Index i = 0; i < layout.robots; ++i) {
    for (Index j = 0; j < d; ++j) {
      const double noise = spec.initial_std > 0.0 ? spec.initial_std * n(rng) : 0.0;
      w.at(0)(layout.position_index(i) + j) = start(i * d + j) + noise;
    }
  }
  if (spec.noise_std > 0.0) {
    for (Index t = 1; t <= std::min(spec.noise_until, horizon); ++t)
      for (Index k = 0; k < layout.plant_dim(); ++k) w.at(t)(k) = spec.noise_std * n(rng);
  }
  return w;
}

Vec sample_reference(const Layout& layout, std::mt19937_64& rng, int budget) {
  std::uniform_real_distribution<double> ux(layout.target_x_min, layout.target_x_max);
  for (int k = 0; k < budget; ++k) {
    const double x1 = ux(rng);
    const double x2 = ux(rng);
    if (std::abs(x1 - x2) >= layout.min_separation) {
      return (Vec(4) << x1, layout.target_y, x2, layout.target_y).finished();
    }
  }
  throw Error("sample_reference: rejection budget exhausted");
}

Signal reference_signal(const PlantLayout& layout, const Vec& targets, Index horizon) {
  require_dim(targets.size(), layout.robots * layout.spatial_dim, "target positions");
  const Index d = layout.spatial_dim;
  Vec x_ref = Vec::Zero(layout.reference_dim());
  for (Index i = 0; i < layout.robots; ++i) x_ref.segment(layout.position_index(i), d) = targets.segment(i * d, d);
  return Signal::constant(x_ref, horizon);
}

Signal tracking_error(const PlantLayout& layout, const Signal& eta, const Signal& x_ref) {
  const Index nx = layout.plant_dim();
  return Signal(Mat(eta.values().topRows(nx) - x_ref.values()));
}

}  // namespace rpb
