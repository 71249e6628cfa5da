#pragma once

#include "rpb/boost.hpp"
#include "rpb/loss.hpp"
#include "rpb/plant.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace rpb {

/// Traces of one closed-loop run over t = 0..T.
struct RolloutResult {
  Signal eta;
  Signal u;
  Signal e;      // x - x_ref
  Signal w_hat;  // disturbance reconstructed by the internal model
  std::vector<double> loss_trace;

  double total_loss() const;
};

/// IMC rollout: w_hat_t from the internal model, u_t = M_t(w_hat, x_ref), eta_{t+1} from the
/// true plant. Optionally records per-step operator caches for the reverse pass.
RolloutResult rollout(const Plant& plant, const Plant& model, const BoostOperator& m, const Signal& w,
                      const Signal& x_ref, const Loss* loss = nullptr,
                      std::vector<BoostOperator::StepCache>* caches = nullptr);

/// Causal map (w_hat, x_ref) -> u used inside the IMC loop.
class ImcOperator {
 public:
  virtual ~ImcOperator() = default;
  virtual void reset() = 0;
  virtual Vec step(const Vec& w_hat, const Vec& x_ref) = 0;
};

class BoostImcOperator : public ImcOperator {
 public:
  explicit BoostImcOperator(const BoostOperator& m) : m_(m), state_(m.initial_state()) {}
  void reset() override { state_ = m_.initial_state(); }
  Vec step(const Vec& w_hat, const Vec& x_ref) override { return m_.step(state_, w_hat, x_ref); }

 private:
  const BoostOperator& m_;
  BoostOperator::State state_;
};

/// Same wiring as rollout() for an arbitrary causal operator.
RolloutResult rollout_imc(const Plant& plant, const Plant& model, ImcOperator& m, const Signal& w,
                          const Signal& x_ref);

/// Causal state-feedback policy u_t = C_t(eta_{t:0}, x_ref_{t:0}); keeps its own history.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset() = 0;
  virtual Vec act(const Vec& eta, const Vec& x_ref) = 0;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

/// Closed loop of the plant with a state-feedback policy (no internal model in the loop;
/// w_hat is recorded against `model`).
RolloutResult rollout_policy(const Plant& plant, const Plant& model, Policy& c, const Signal& w,
                             const Signal& x_ref);

/// The closed-loop input map (w, x_ref) -> u of plant + policy, run as a causal operator:
/// it simulates its own copy of the loop driven by the incoming disturbance estimate.
class ClosedLoopInputOperator : public ImcOperator {
 public:
  ClosedLoopInputOperator(const Plant& model, PolicyFactory factory);
  void reset() override;
  Vec step(const Vec& w_hat, const Vec& x_ref) override;

 private:
  const Plant& model_;
  PolicyFactory factory_;
  std::unique_ptr<Policy> policy_;
  Vec eta_, u_, x_ref_prev_;
  bool started_ = false;
};

struct CompletenessReport {
  bool reproduced = false;
  double max_state_error = 0.0;
  double max_input_error = 0.0;
  Index first_mismatch = -1;  // first time step beyond tolerance, -1 if none
};

/// Builds M = Phi^u[F, C] and checks that the IMC loop with M reproduces C's trajectories.
CompletenessReport completeness_check(const Plant& plant, const PolicyFactory& c, const Signal& w,
                                      const Signal& x_ref, double tolerance = 1e-9);

double evaluate_loss(const RolloutResult& result, const Loss& loss, const Signal& x_ref);

/// Reference policies used by the completeness tests.
class ZeroPolicy : public Policy {
 public:
  explicit ZeroPolicy(Index input_dim) : dim_(input_dim) {}
  void reset() override {}
  Vec act(const Vec&, const Vec&) override { return Vec::Zero(dim_); }

 private:
  Index dim_;
};

/// u = gain * (p_bar - p): pushes each target further along the current error.
class StaticFeedbackPolicy : public Policy {
 public:
  StaticFeedbackPolicy(PlantLayout layout, double gain) : layout_(layout), gain_(gain) {}
  void reset() override {}
  Vec act(const Vec& eta, const Vec& x_ref) override;

 private:
  PlantLayout layout_;
  double gain_;
};

/// Single offset pulse at t = delay proportional to the error observed at t = 0.
class DelayedImpulsePolicy : public Policy {
 public:
  DelayedImpulsePolicy(PlantLayout layout, Index delay, double amplitude)
      : layout_(layout), delay_(delay), amplitude_(amplitude) {}
  void reset() override;
  Vec act(const Vec& eta, const Vec& x_ref) override;

 private:
  PlantLayout layout_;
  Index delay_;
  double amplitude_;
  Index t_ = 0;
  Vec initial_error_;
};

}  // namespace rpb
