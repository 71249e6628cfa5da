#pragma once

#include "rpb/robust.hpp"
#include "rpb/train.hpp"

#include <string>

namespace rpb {

struct BaseGains {
  double kp = 4.0;
  double ki = 0.1;
  double kd = 2.0;
};

struct RobotConfig {
  double mass = 1.0;
  double drag_linear = 1.0;
  double drag_quadratic = 0.1;
  double sampling_period = 0.05;
  BaseGains gains;

  RobotParams params(const PlantLayout& layout) const;
};

struct EvalConfig {
  Index scenarios = 50;
  std::uint64_t seed = 1000;
  ReferenceMode mode = ReferenceMode::kSampled;
  Vec fixed_targets;  // empty: targets straight above the starts
};

struct SimulateConfig {
  Index rollouts = 1;
  Index horizon = 200;
  Vec targets;  // empty: sampled from the layout
};

/// One file that fully describes an experiment.
struct ExperimentConfig {
  std::string layout = "corridor";
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  RobotConfig robot;
  LossSpec loss;
  TrainConfig train;
  BoostConfig boost;
  DisturbanceSpec disturbance;
  MismatchSpec mismatch;
  RobustOptions robustness;
  EvalConfig eval;
  SimulateConfig simulate;

  void validate() const;
};

/// Parses the JSON form; missing keys keep their defaults, unknown keys are errors.
ExperimentConfig config_from_string(const std::string& text);
std::string config_to_string(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

/// Learning problem described by a config. The internal model is always nominal; the true
/// plant carries the configured mismatch only when requested.
TrainProblem make_problem(const ExperimentConfig& config, bool with_mismatch = false);

}  // namespace rpb
