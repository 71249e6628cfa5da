#pragma once

#include "rpb/bptt.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace rpb {

/// How training references are drawn.
enum class ReferenceMode {
  kSampled,  // a fresh target pair per sample from the layout's target set
  kFixed,    // one target pair shared by every sample
};

std::string to_string(ReferenceMode mode);
ReferenceMode reference_mode_from_string(const std::string& s);

struct TrainConfig {
  Index samples = 30;
  int epochs = 100;
  double learning_rate = 1e-4;
  double final_learning_rate_ratio = 1.0;  // cosine decay to this fraction over the run; 1 keeps it constant
  Index batch_size = 30;
  Index horizon = 200;
  std::uint64_t seed = 0;
  double init_std = 1e-2;
  double clip_norm = 10.0;
  double divergence_threshold = 1e8;
  int stability_check_every = 0;  // 0 disables the spot check
  int checkpoint_every = 0;       // 0 disables periodic checkpoints
  ReferenceMode mode = ReferenceMode::kSampled;
  Vec fixed_targets;              // empty: mirrored starts on the target line
  bool parallel = true;

  void validate() const;
};

/// Everything that defines the learning problem apart from the optimizer settings.
struct TrainProblem {
  Layout layout;
  PlantLayout plant_layout;
  Plant plant;  // true system
  Plant model;  // internal model used for disturbance reconstruction
  LossSpec loss;
  DisturbanceSpec disturbance;
  BoostConfig boost;

  /// Nominal problem on a named layout with a perfect internal model.
  static TrainProblem nominal(const std::string& layout_name);
  Loss make_loss() const;
  /// Target pair used in fixed-reference mode when none is given: each robot heads to the
  /// target line above the other robot's start.
  Vec crossing_targets() const;
  /// Target pair straight above the starts.
  Vec straight_targets() const;
};

std::vector<Sample> draw_samples(const TrainProblem& problem, Index count, Index horizon,
                                 ReferenceMode mode, const Vec& fixed_targets, std::mt19937_64& rng);

struct StabilityCheck {
  int epoch = 0;
  double e_ratio = 0.0;
  double u_ratio = 0.0;
  bool passed = false;
};

struct TrainResult {
  BoostOperator model;
  std::vector<double> loss_history;  // [0] before training, [k] after epoch k
  std::vector<int> clipped_steps;    // per epoch; [0] is always 0
  std::vector<StabilityCheck> stability;
};

using CheckpointCallback = std::function<void(int epoch, const BoostOperator&)>;

/// Adam on the mean loss of a fixed pool of samples, reshuffled every epoch.
/// Throws TrainingDiverged when the pool loss exceeds the divergence threshold.
TrainResult train(const TrainProblem& problem, const TrainConfig& config,
                  const CheckpointCallback& on_checkpoint = {}, const BoostOperator* initial = nullptr);

/// Tail ratios of e and u for a disturbance that vanishes after horizon / 5.
StabilityCheck tracking_spot_check(const TrainProblem& problem, const BoostOperator& m,
                                   const Sample& sample, Index horizon, double threshold = 1e-2);

struct EvalMetrics {
  Index scenarios = 0;
  double mean_loss = 0.0;
  Index collisions = 0;              // scenarios with inter-robot distance < d_min at some step
  Index penetration_frames = 0;      // (step, robot, obstacle) triples inside an obstacle
  Index scenarios_with_penetration = 0;
  double collision_free_fraction = 0.0;  // neither robot collision nor penetration
  double final_tracking_error = 0.0;     // mean position error at t = T
};

EvalMetrics evaluate(const TrainProblem& problem, const BoostOperator& m,
                     const std::vector<Sample>& samples, bool parallel = true);

}  // namespace rpb
