#include "rpb/train.hpp"

#include "rpb/adam.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace rpb {

std::string to_string(ReferenceMode mode) {
  return mode == ReferenceMode::kFixed ? "fixed" : "sampled";
}

ReferenceMode reference_mode_from_string(const std::string& s) {
  if (s == "sampled") return ReferenceMode::kSampled;
  if (s == "fixed") return ReferenceMode::kFixed;
  throw ConfigError("unknown reference mode '" + s + "' (expected 'sampled' or 'fixed')");
}

void TrainConfig::validate() const {
  if (samples <= 0) throw ConfigError("train.samples must be positive");
  if (epochs < 0) throw ConfigError("train.epochs must be nonnegative");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(final_learning_rate_ratio > 0.0 && final_learning_rate_ratio <= 1.0)) {
    throw ConfigError("train.final_learning_rate_ratio must lie in (0, 1]");
  }
  if (batch_size <= 0) throw ConfigError("train.batch_size must be positive");
  if (horizon <= 0) throw ConfigError("train.horizon must be positive");
  if (!(init_std >= 0.0)) throw ConfigError("train.init_std must be nonnegative");
  if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm must be positive");
  if (stability_check_every < 0 || checkpoint_every < 0) {
    throw ConfigError("train check intervals must be nonnegative");
  }
}

TrainProblem TrainProblem::nominal(const std::string& layout_name) {
  TrainProblem p;
  p.layout = make_layout(layout_name);
  p.plant_layout = PlantLayout{};
  p.plant = Plant(p.plant_layout, RobotParams::defaults(p.plant_layout));
  p.model = p.plant;
  p.boost.input_dim = p.plant_layout.state_dim();
  p.boost.reference_dim = p.plant_layout.reference_dim();
  p.boost.control_dim = p.plant_layout.input_dim();
  return p;
}

Loss TrainProblem::make_loss() const { return Loss(loss, layout.field, plant_layout); }

Vec TrainProblem::crossing_targets() const {
  const Index d = plant_layout.spatial_dim;
  const Index n = plant_layout.robots;
  Vec t(d * n);
  for (Index i = 0; i < n; ++i) {
    t.segment(d * i, d) = layout.start.segment(d * (n - 1 - i), d);
    t(d * i + d - 1) = layout.target_y;
  }
  return t;
}

Vec TrainProblem::straight_targets() const {
  const Index d = plant_layout.spatial_dim;
  Vec t = layout.start;
  for (Index i = 0; i < plant_layout.robots; ++i) t(d * i + d - 1) = layout.target_y;
  return t;
}

std::vector<Sample> draw_samples(const TrainProblem& problem, Index count, Index horizon,
                                 ReferenceMode mode, const Vec& fixed_targets, std::mt19937_64& rng) {
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  const Vec fixed = fixed_targets.size() > 0 ? fixed_targets : problem.crossing_targets();
  for (Index s = 0; s < count; ++s) {
    Sample sample;
    sample.w = sample_disturbance(problem.plant_layout, problem.layout.start, problem.disturbance, horizon, rng);
    const Vec targets = mode == ReferenceMode::kFixed ? fixed : sample_reference(problem.layout, rng);
    sample.x_ref = reference_signal(problem.plant_layout, targets, horizon);
    out.push_back(std::move(sample));
  }
  return out;
}

namespace {

double pool_loss(const TrainProblem& problem, const BoostOperator& m, const Loss& loss,
                 const std::vector<Sample>& pool, bool parallel) {
  const std::vector<double> losses = parallel ? batch_loss_parallel(problem.plant, problem.model, m, loss, pool)
                                              : batch_loss_serial(problem.plant, problem.model, m, loss, pool);
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

void check_divergence(double loss, double threshold, int epoch) {
  if (!std::isfinite(loss) || loss > threshold) {
    std::ostringstream os;
    os << "training diverged at epoch " << epoch << ": mean loss " << loss << " exceeds " << threshold;
    throw TrainingDiverged(os.str());
  }
}

}  // namespace

StabilityCheck tracking_spot_check(const TrainProblem& problem, const BoostOperator& m,
                                   const Sample& sample, Index horizon, double threshold) {
  const Index active = horizon / 5;
  Signal w(sample.w.dim(), horizon);
  const Index copy_until = std::min(active, sample.w.horizon());
  w.values().leftCols(copy_until + 1) = sample.w.values().leftCols(copy_until + 1);
  const Signal x_ref = Signal::constant(sample.x_ref.at(0), horizon);
  const RolloutResult r = rollout(problem.plant, problem.model, m, w, x_ref);
  const Index tail = (4 * horizon) / 5;
  auto ratio = [tail](const Signal& s) {
    const double total = lp_norm(s);
    return total > 0.0 ? tail_energy(s, tail) / total : 0.0;
  };
  StabilityCheck c;
  c.e_ratio = ratio(r.e);
  c.u_ratio = ratio(r.u);
  c.passed = c.e_ratio < threshold && c.u_ratio < threshold;
  return c;
}

TrainResult train(const TrainProblem& problem, const TrainConfig& config,
                  const CheckpointCallback& on_checkpoint, const BoostOperator* initial) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  TrainResult result;
  result.model = initial ? *initial : BoostOperator::random(problem.boost, config.init_std, rng);
  const std::vector<Sample> pool =
      draw_samples(problem, config.samples, config.horizon, config.mode, config.fixed_targets, rng);
  const Loss loss = problem.make_loss();

  result.loss_history.push_back(pool_loss(problem, result.model, loss, pool, config.parallel));
  result.clipped_steps.push_back(0);
  check_divergence(result.loss_history.back(), config.divergence_threshold, 0);

  Adam adam(result.model.param_count(), Adam::Options{config.learning_rate});
  Vec theta = result.model.params();
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double progress = config.epochs > 1 ? static_cast<double>(epoch - 1) / (config.epochs - 1) : 0.0;
    const double ratio = config.final_learning_rate_ratio;
    adam.set_learning_rate(config.learning_rate * (ratio + (1.0 - ratio) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress))));
    std::shuffle(order.begin(), order.end(), rng);
    int clipped = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(start + batch, order.size())));
      BatchResult b = config.parallel
                          ? batch_gradient_parallel(problem.plant, problem.model, result.model, loss, pool, idx)
                          : batch_gradient_serial(problem.plant, problem.model, result.model, loss, pool, idx);
      if (clip_global_norm(b.grad, config.clip_norm)) ++clipped;
      adam.step(theta, b.grad);
      result.model.set_params(theta);
    }
    result.loss_history.push_back(pool_loss(problem, result.model, loss, pool, config.parallel));
    result.clipped_steps.push_back(clipped);
    check_divergence(result.loss_history.back(), config.divergence_threshold, epoch);

    if (config.stability_check_every > 0 && epoch % config.stability_check_every == 0) {
      StabilityCheck c = tracking_spot_check(problem, result.model, pool.front(), std::max<Index>(3 * config.horizon, 400));
      c.epoch = epoch;
      result.stability.push_back(c);
    }
    if (on_checkpoint && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
      on_checkpoint(epoch, result.model);
    }
  }
  return result;
}

namespace {

struct ScenarioMetrics {
  double loss = 0.0;
  bool collision = false;
  Index penetration_frames = 0;
  double final_error = 0.0;
};

ScenarioMetrics evaluate_one(const TrainProblem& problem, const BoostOperator& m, const Loss& loss,
                             const Sample& s) {
  const RolloutResult r = rollout(problem.plant, problem.model, m, s.w, s.x_ref, &loss);
  const PlantLayout& pl = problem.plant_layout;
  const Index d = pl.spatial_dim;
  ScenarioMetrics out;
  out.loss = r.total_loss();
  for (Index t = 0; t <= r.eta.horizon(); ++t) {
    const auto eta = r.eta.at(t);
    for (Index i = 0; i < pl.robots; ++i) {
      const Vec pi = eta.segment(pl.position_index(i), d);
      for (Index j = i + 1; j < pl.robots; ++j) {
        if ((pi - eta.segment(pl.position_index(j), d)).norm() < problem.loss.safety_distance) out.collision = true;
      }
      if (d == 2) {
        for (const Obstacle& o : problem.layout.field.obstacles) {
          if ((pi - o.center).norm() < o.radius) ++out.penetration_frames;
        }
      }
    }
  }
  const Index T = r.eta.horizon();
  double err = 0.0;
  for (Index i = 0; i < pl.robots; ++i) {
    err += (r.eta.at(T).segment(pl.position_index(i), d) - s.x_ref.at(T).segment(pl.position_index(i), d)).norm();
  }
  out.final_error = err / static_cast<double>(pl.robots);
  return out;
}

}  // namespace

EvalMetrics evaluate(const TrainProblem& problem, const BoostOperator& m, const std::vector<Sample>& samples,
                     bool parallel) {
  EvalMetrics metrics;
  metrics.scenarios = static_cast<Index>(samples.size());
  if (samples.empty()) return metrics;
  const Loss loss = problem.make_loss();
  std::vector<ScenarioMetrics> per(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    try {
      per[static_cast<std::size_t>(k)] = evaluate_one(problem, m, loss, samples[static_cast<std::size_t>(k)]);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  Index clean = 0;
  for (const ScenarioMetrics& s : per) {
    metrics.mean_loss += s.loss;
    metrics.final_tracking_error += s.final_error;
    metrics.collisions += s.collision ? 1 : 0;
    metrics.penetration_frames += s.penetration_frames;
    metrics.scenarios_with_penetration += s.penetration_frames > 0 ? 1 : 0;
    clean += (!s.collision && s.penetration_frames == 0) ? 1 : 0;
  }
  const double inv = 1.0 / static_cast<double>(per.size());
  metrics.mean_loss *= inv;
  metrics.final_tracking_error *= inv;
  metrics.collision_free_fraction = static_cast<double>(clean) * inv;
  return metrics;
}

}  // namespace rpb
