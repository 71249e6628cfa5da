#include "rpb/closedloop.hpp"

#include <cmath>
#include <numeric>

namespace rpb {

double RolloutResult::total_loss() const {
  return std::accumulate(loss_trace.begin(), loss_trace.end(), 0.0);
}

namespace {

void check_inputs(const Plant& plant, const Signal& w, const Signal& x_ref) {
  const PlantLayout& l = plant.layout();
  require_dim(w.dim(), l.state_dim(), "disturbance signal");
  require_dim(x_ref.dim(), l.reference_dim(), "reference signal");
  require_dim(x_ref.steps(), w.steps(), "reference horizon");
  if (!w.at(0).tail(l.integrator_dim()).isZero(0.0)) {
    throw InvalidSignal("w_0 must have a zero integrator block");
  }
}

}  // namespace

RolloutResult rollout(const Plant& plant, const Plant& model, const BoostOperator& m, const Signal& w,
                      const Signal& x_ref, const Loss* loss,
                      std::vector<BoostOperator::StepCache>* caches) {
  check_inputs(plant, w, x_ref);
  const PlantLayout& l = plant.layout();
  const Index T = w.horizon();
  RolloutResult r{Signal(l.state_dim(), T), Signal(l.input_dim(), T), Signal(l.plant_dim(), T),
                  Signal(l.state_dim(), T), {}};
  if (caches) caches->assign(static_cast<std::size_t>(T + 1), {});
  if (loss) r.loss_trace.resize(static_cast<std::size_t>(T + 1));

  BoostOperator::State state = m.initial_state();
  for (Index t = 0; t <= T; ++t) {
    if (t == 0) {
      r.eta.at(0) = w.at(0);
      r.w_hat.at(0) = w.at(0);
    } else {
      const Vec eta_prev = r.eta.at(t - 1);
      const Vec u_prev = r.u.at(t - 1);
      const Vec x_ref_prev = x_ref.at(t - 1);
      r.eta.at(t) = plant.transition(eta_prev, u_prev, x_ref_prev) + w.at(t);
      r.w_hat.at(t) = r.eta.at(t) - model.transition(eta_prev, u_prev, x_ref_prev);
    }
    r.u.at(t) = m.step(state, r.w_hat.at(t), x_ref.at(t),
                       caches ? &(*caches)[static_cast<std::size_t>(t)] : nullptr);
    if (loss) r.loss_trace[static_cast<std::size_t>(t)] = loss->step(r.eta.at(t), r.u.at(t), x_ref.at(t));
  }
  r.e = tracking_error(l, r.eta, x_ref);
  if (!r.u.is_finite()) throw IntegrationBlowup("control input became non-finite");
  return r;
}

RolloutResult rollout_imc(const Plant& plant, const Plant& model, ImcOperator& m, const Signal& w,
                          const Signal& x_ref) {
  check_inputs(plant, w, x_ref);
  const PlantLayout& l = plant.layout();
  const Index T = w.horizon();
  RolloutResult r{Signal(l.state_dim(), T), Signal(l.input_dim(), T), Signal(l.plant_dim(), T),
                  Signal(l.state_dim(), T), {}};
  m.reset();
  for (Index t = 0; t <= T; ++t) {
    if (t == 0) {
      r.eta.at(0) = w.at(0);
      r.w_hat.at(0) = w.at(0);
    } else {
      const Vec eta_prev = r.eta.at(t - 1);
      const Vec u_prev = r.u.at(t - 1);
      const Vec x_ref_prev = x_ref.at(t - 1);
      r.eta.at(t) = plant.transition(eta_prev, u_prev, x_ref_prev) + w.at(t);
      r.w_hat.at(t) = r.eta.at(t) - model.transition(eta_prev, u_prev, x_ref_prev);
    }
    r.u.at(t) = m.step(r.w_hat.at(t), x_ref.at(t));
  }
  r.e = tracking_error(l, r.eta, x_ref);
  return r;
}

RolloutResult rollout_policy(const Plant& plant, const Plant& model, Policy& c, const Signal& w,
                             const Signal& x_ref) {
  check_inputs(plant, w, x_ref);
  const PlantLayout& l = plant.layout();
  const Index T = w.horizon();
  RolloutResult r{Signal(l.state_dim(), T), Signal(l.input_dim(), T), Signal(l.plant_dim(), T),
                  Signal(l.state_dim(), T), {}};
  c.reset();
  for (Index t = 0; t <= T; ++t) {
    if (t == 0) {
      r.eta.at(0) = w.at(0);
      r.w_hat.at(0) = w.at(0);
    } else {
      const Vec eta_prev = r.eta.at(t - 1);
      const Vec u_prev = r.u.at(t - 1);
      const Vec x_ref_prev = x_ref.at(t - 1);
      r.eta.at(t) = plant.transition(eta_prev, u_prev, x_ref_prev) + w.at(t);
      r.w_hat.at(t) = r.eta.at(t) - model.transition(eta_prev, u_prev, x_ref_prev);
    }
    r.u.at(t) = c.act(r.eta.at(t), x_ref.at(t));
  }
  r.e = tracking_error(l, r.eta, x_ref);
  return r;
}

ClosedLoopInputOperator::ClosedLoopInputOperator(const Plant& model, PolicyFactory factory)
    : model_(model), factory_(std::move(factory)) {
  reset();
}

void ClosedLoopInputOperator::reset() {
  policy_ = factory_();
  policy_->reset();
  started_ = false;
}

Vec ClosedLoopInputOperator::step(const Vec& w_hat, const Vec& x_ref) {
  // eta_t = f(eta_{t-1}, u_{t-1}, x_ref_{t-1}) + w_t with f_0 = 0.
  eta_ = started_ ? Vec(model_.transition(eta_, u_, x_ref_prev_) + w_hat) : w_hat;
  started_ = true;
  u_ = policy_->act(eta_, x_ref);
  x_ref_prev_ = x_ref;
  return u_;
}

CompletenessReport completeness_check(const Plant& plant, const PolicyFactory& c, const Signal& w,
                                      const Signal& x_ref, double tolerance) {
  auto policy = c();
  const RolloutResult direct = rollout_policy(plant, plant, *policy, w, x_ref);
  ClosedLoopInputOperator m(plant, c);
  const RolloutResult replay = rollout_imc(plant, plant, m, w, x_ref);

  CompletenessReport rep;
  for (Index t = 0; t <= w.horizon(); ++t) {
    const double de = (direct.eta.at(t) - replay.eta.at(t)).cwiseAbs().maxCoeff();
    const double du = (direct.u.at(t) - replay.u.at(t)).cwiseAbs().maxCoeff();
    rep.max_state_error = std::max(rep.max_state_error, de);
    rep.max_input_error = std::max(rep.max_input_error, du);
    if (rep.first_mismatch < 0 && (de > tolerance || du > tolerance)) rep.first_mismatch = t;
  }
  rep.reproduced = rep.first_mismatch < 0;
  return rep;
}

double evaluate_loss(const RolloutResult& result, const Loss& loss, const Signal& x_ref) {
  return loss.trajectory(result.eta, result.u, x_ref);
}

Vec StaticFeedbackPolicy::act(const Vec& eta, const Vec& x_ref) {
  const Index d = layout_.spatial_dim;
  Vec u(layout_.input_dim());
  for (Index i = 0; i < layout_.robots; ++i) {
    const Index ip = layout_.position_index(i);
    u.segment(layout_.input_index(i), d) = gain_ * (x_ref.segment(ip, d) - eta.segment(ip, d));
  }
  return u;
}

void DelayedImpulsePolicy::reset() {
  t_ = 0;
  initial_error_.resize(0);
}

Vec DelayedImpulsePolicy::act(const Vec& eta, const Vec& x_ref) {
  const Index d = layout_.spatial_dim;
  if (t_ == 0) {
    initial_error_.resize(layout_.input_dim());
    for (Index i = 0; i < layout_.robots; ++i) {
      const Index ip = layout_.position_index(i);
      initial_error_.segment(layout_.input_index(i), d) = x_ref.segment(ip, d) - eta.segment(ip, d);
    }
  }
  Vec u = Vec::Zero(layout_.input_dim());
  if (t_ == delay_) u = amplitude_ * initial_error_;
  ++t_;
  return u;
}

}  // namespace rpb
