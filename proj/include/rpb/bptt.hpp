#pragma once

#include "rpb/closedloop.hpp"

#include <vector>

namespace rpb {

/// One training sample: disturbance (including the initial condition) and reference.
struct Sample {
  Signal w;
  Signal x_ref;
};

/// Forward record of one rollout, enough to replay it backwards.
struct Tape {
  RolloutResult result;
  std::vector<BoostOperator::StepCache> caches;
  Signal x_ref;
};

Tape record(const Plant& plant, const Plant& model, const BoostOperator& m, const Loss& loss,
            const Sample& sample);

/// Adjoints with respect to the REN realization and the MLP weights.
struct OperatorGradient {
  double loss = 0.0;
  RenGrad ren;
  Vec mlp;

  static OperatorGradient zeros(const BoostOperator& m);
  OperatorGradient& operator+=(const OperatorGradient& other);
};

/// Reverse pass through loss, true plant, disturbance reconstruction and the operator.
/// Throws GradientBlowup naming the rollout step and node on a non-finite adjoint.
OperatorGradient backward_operator(const Tape& tape, const Plant& plant, const Plant& model,
                                   const BoostOperator& m, const Loss& loss);

/// Full dL/dtheta (through realize()).
Vec theta_gradient(const BoostOperator& m, const OperatorGradient& g);

/// dL/dtheta for one recorded rollout.
Vec backward(const Tape& tape, const Plant& plant, const Plant& model, const BoostOperator& m,
             const Loss& loss);

struct BatchResult {
  double mean_loss = 0.0;
  Vec grad;  // gradient of the mean loss
};

// Serial reference kernel and its OpenMP counterpart. Per-sample results are reduced in
// index order, so both return bitwise-identical values.
BatchResult batch_gradient_serial(const Plant& plant, const Plant& model, const BoostOperator& m,
                                  const Loss& loss, const std::vector<Sample>& samples,
                                  const std::vector<std::size_t>& indices);
BatchResult batch_gradient_parallel(const Plant& plant, const Plant& model, const BoostOperator& m,
                                    const Loss& loss, const std::vector<Sample>& samples,
                                    const std::vector<std::size_t>& indices);

std::vector<double> batch_loss_serial(const Plant& plant, const Plant& model, const BoostOperator& m,
                                      const Loss& loss, const std::vector<Sample>& samples);
std::vector<double> batch_loss_parallel(const Plant& plant, const Plant& model, const BoostOperator& m,
                                        const Loss& loss, const std::vector<Sample>& samples);

}  // namespace rpb
