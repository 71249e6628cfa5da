#include "rpb/bptt.hpp"

#include <omp.h>

#include <exception>
#include <string>

namespace rpb {

Tape record(const Plant& plant, const Plant& model, const BoostOperator& m, const Loss& loss,
            const Sample& sample) {
  Tape tape;
  tape.result = rollout(plant, model, m, sample.w, sample.x_ref, &loss, &tape.caches);
  tape.x_ref = sample.x_ref;
  return tape;
}

OperatorGradient OperatorGradient::zeros(const BoostOperator& m) {
  return OperatorGradient{0.0, RenGrad::zeros(m.ren().dims), Vec::Zero(m.mlp().param_count())};
}

OperatorGradient& OperatorGradient::operator+=(const OperatorGradient& o) {
  loss += o.loss;
  ren += o.ren;
  mlp += o.mlp;
  return *this;
}

namespace {

void check_finite(const Vec& v, Index t, const char* node) {
  if (!v.allFinite()) {
    throw GradientBlowup("non-finite adjoint at step " + std::to_string(t) + ", node '" + node + "'");
  }
}

}  // namespace

OperatorGradient backward_operator(const Tape& tape, const Plant& plant, const Plant& model,
                                   const BoostOperator& m, const Loss& loss) {
  const RolloutResult& r = tape.result;
  const Index T = r.eta.horizon();
  const Index nq = r.eta.dim();
  const Index nu = r.u.dim();
  OperatorGradient g = OperatorGradient::zeros(m);
  g.loss = r.total_loss();

  // g_eta[t] and g_u[t] collect contributions from steps > t before step t is processed.
  Mat g_eta = Mat::Zero(nq, T + 1);
  Mat g_u = Mat::Zero(nu, T + 1);
  Vec g_xi = Vec::Zero(m.config().ren_state);

  for (Index t = T; t >= 0; --t) {
    Vec ge = g_eta.col(t);
    Vec gu = g_u.col(t);
    loss.step(r.eta.at(t), r.u.at(t), tape.x_ref.at(t), &ge, &gu);
    check_finite(gu, t, "u");

    const BoostOperator::StepAdjoint adj =
        m.step_vjp(tape.caches[static_cast<std::size_t>(t)], gu, g_xi, g.ren, g.mlp);
    g_xi = adj.xi;
    check_finite(g_xi, t, "xi");
    const Vec& g_w_hat = adj.w_hat;
    check_finite(g_w_hat, t, "w_hat");

    ge += g_w_hat;  // w_hat_t = eta_t - f_hat(...)
    check_finite(ge, t, "eta");
    if (t == 0) break;  // w_hat_0 = eta_0 = w_0 carries no parameter dependence

    const Vec eta_prev = r.eta.at(t - 1);
    const Vec u_prev = r.u.at(t - 1);
    const Vec x_ref_prev = tape.x_ref.at(t - 1);
    const Plant::Adjoint through_plant = plant.transition_vjp(eta_prev, u_prev, x_ref_prev, ge);
    const Plant::Adjoint through_model = model.transition_vjp(eta_prev, u_prev, x_ref_prev, g_w_hat);
    g_eta.col(t - 1) += through_plant.eta - through_model.eta;
    g_u.col(t - 1) += through_plant.u - through_model.u;
  }
  return g;
}

Vec theta_gradient(const BoostOperator& m, const OperatorGradient& g) {
  Vec out(m.param_count());
  out << realize_vjp(m.ren_params(), g.ren), g.mlp;
  return out;
}

Vec backward(const Tape& tape, const Plant& plant, const Plant& model, const BoostOperator& m,
             const Loss& loss) {
  return theta_gradient(m, backward_operator(tape, plant, model, m, loss));
}

namespace {

BatchResult reduce(const BoostOperator& m, const std::vector<OperatorGradient>& parts) {
  OperatorGradient total = OperatorGradient::zeros(m);
  for (const auto& p : parts) total += p;
  const double inv = parts.empty() ? 0.0 : 1.0 / static_cast<double>(parts.size());
  BatchResult b;
  b.mean_loss = total.loss * inv;
  b.grad = theta_gradient(m, total) * inv;
  return b;
}

OperatorGradient sample_gradient(const Plant& plant, const Plant& model, const BoostOperator& m,
                                 const Loss& loss, const Sample& s) {
  const Tape tape = record(plant, model, m, loss, s);
  return backward_operator(tape, plant, model, m, loss);
}

}  // namespace

BatchResult batch_gradient_serial(const Plant& plant, const Plant& model, const BoostOperator& m,
                                  const Loss& loss, const std::vector<Sample>& samples,
                                  const std::vector<std::size_t>& indices) {
  std::vector<OperatorGradient> parts;
  parts.reserve(indices.size());
  for (std::size_t i : indices) parts.push_back(sample_gradient(plant, model, m, loss, samples[i]));
  return reduce(m, parts);
}

BatchResult batch_gradient_parallel(const Plant& plant, const Plant& model, const BoostOperator& m,
                                    const Loss& loss, const std::vector<Sample>& samples,
                                    const std::vector<std::size_t>& indices) {
  const auto n = static_cast<std::ptrdiff_t>(indices.size());
  std::vector<OperatorGradient> parts(indices.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      parts[static_cast<std::size_t>(k)] =
          sample_gradient(plant, model, m, loss, samples[indices[static_cast<std::size_t>(k)]]);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return reduce(m, parts);
}

std::vector<double> batch_loss_serial(const Plant& plant, const Plant& model, const BoostOperator& m,
                                      const Loss& loss, const std::vector<Sample>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(rollout(plant, model, m, s.w, s.x_ref, &loss).total_loss());
  return out;
}

std::vector<double> batch_loss_parallel(const Plant& plant, const Plant& model, const BoostOperator& m,
                                        const Loss& loss, const std::vector<Sample>& samples) {
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  std::vector<double> out(samples.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      const Sample& s = samples[static_cast<std::size_t>(k)];
      out[static_cast<std::size_t>(k)] = rollout(plant, model, m, s.w, s.x_ref, &loss).total_loss();
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace rpb
