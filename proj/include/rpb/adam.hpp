#pragma once

#include "rpb/types.hpp"

#include <cmath>

namespace rpb {

/// Adam with bias correction.
class Adam {
 public:
  struct Options {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam(Index dim, Options options) : opt_(options), m_(Vec::Zero(dim)), v_(Vec::Zero(dim)) {}

  void step(Vec& theta, const Vec& grad) {
    ++t_;
    m_ = opt_.beta1 * m_ + (1.0 - opt_.beta1) * grad;
    v_ = opt_.beta2 * v_ + (1.0 - opt_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    theta.array() -= opt_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + opt_.epsilon);
  }

  long steps() const { return t_; }
  void set_learning_rate(double lr) { opt_.learning_rate = lr; }

 private:
  Options opt_;
  Vec m_, v_;
  long t_ = 0;
};

/// Rescales grad to the given global norm if it is larger. Returns true when clipping occurred.
inline bool clip_global_norm(Vec& grad, double max_norm) {
  const double n = grad.norm();
  if (n > max_norm) {
    grad *= max_norm / n;
    return true;
  }
  return false;
}

}  // namespace rpb
