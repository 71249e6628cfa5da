#include "rpb/checkpoint.hpp"
#include "rpb/config.hpp"
#include "rpb/robust.hpp"
#include "rpb/svg.hpp"
#include "rpb/train.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rpb;

namespace {

struct Options {
  std::string config;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> epochs;
  std::optional<Index> rollouts;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.train.seed = *o.seed;
    c.robustness.seed = *o.seed;
  }
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.epochs) c.train.epochs = *o.epochs;
  c.validate();
  fs::create_directories(c.output_dir);
  return c;
}

std::string path_in(const ExperimentConfig& c, const std::string& name) { return (fs::path(c.output_dir) / name).string(); }

void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << j.dump(2) << '\n';
}

json metrics_json(const EvalMetrics& m) {
  return {{"scenarios", m.scenarios},
          {"mean_loss", m.mean_loss},
          {"collisions", m.collisions},
          {"penetration_frames", m.penetration_frames},
          {"scenarios_with_penetration", m.scenarios_with_penetration},
          {"collision_free_fraction", m.collision_free_fraction},
          {"final_tracking_error", m.final_tracking_error}};
}

BoostOperator operator_for(const Options& o, const TrainProblem& p) {
  return o.checkpoint.empty() ? BoostOperator(p.boost) : load_checkpoint(o.checkpoint);
}

std::vector<Trajectory> render_rollouts(const TrainProblem& p, const BoostOperator& m, const std::vector<Sample>& samples) {
  std::vector<Trajectory> out;
  for (const Sample& s : samples) {
    const RolloutResult r = rollout(p.plant, p.model, m, s.w, s.x_ref);
    Vec targets(p.plant_layout.input_dim());
    for (Index i = 0; i < p.plant_layout.robots; ++i) {
      targets.segment(p.plant_layout.spatial_dim * i, p.plant_layout.spatial_dim) =
          s.x_ref.at(0).segment(p.plant_layout.position_index(i), p.plant_layout.spatial_dim);
    }
    out.push_back({r.eta, targets});
  }
  return out;
}

int cmd_simulate(const Options& o) {
  ExperimentConfig c = load(o);
  if (o.rollouts) c.simulate.rollouts = *o.rollouts;
  const TrainProblem p = make_problem(c, true);
  const BoostOperator m = operator_for(o, p);
  std::mt19937_64 rng(c.seed);
  const ReferenceMode mode = c.simulate.targets.size() > 0 ? ReferenceMode::kFixed : ReferenceMode::kSampled;
  const std::vector<Sample> samples = draw_samples(p, c.simulate.rollouts, c.simulate.horizon, mode, c.simulate.targets, rng);
  const Loss loss = p.make_loss();
  json record = {{"command", "simulate"}, {"checkpoint", o.checkpoint}, {"rollouts", json::array()}};
  std::vector<Trajectory> trajectories;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const RolloutResult r = rollout(p.plant, p.model, m, samples[k].w, samples[k].x_ref, &loss);
    const std::string stem = "rollout_" + std::to_string(k);
    write_csv(path_in(c, stem + "_eta.csv"), r.eta);
    write_csv(path_in(c, stem + "_u.csv"), r.u);
    write_csv(path_in(c, stem + "_e.csv"), r.e);
    record["rollouts"].push_back({{"index", k}, {"loss", r.total_loss()}, {"final_error_norm", r.e.at(r.e.horizon()).norm()}});
  }
  trajectories = render_rollouts(p, m, samples);
  write_svg(path_in(c, "trajectories.svg"), p.plant_layout, p.layout.field, trajectories);
  write_json(path_in(c, "simulate.json"), record);
  std::cout << "simulated " << samples.size() << " rollout(s) into " << c.output_dir << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  ExperimentConfig c = load(o);
  if (o.rollouts) c.train.samples = *o.rollouts;
  c.train.validate();
  const TrainProblem p = make_problem(c, false);
  const auto on_checkpoint = [&c](int epoch, const BoostOperator& m) {
    save_checkpoint(m, path_in(c, "checkpoint_epoch_" + std::to_string(epoch) + ".json"));
  };
  std::optional<BoostOperator> initial;
  if (!o.checkpoint.empty()) initial = load_checkpoint(o.checkpoint);
  const TrainResult r = train(p, c.train, on_checkpoint, initial ? &*initial : nullptr);
  save_checkpoint(r.model, path_in(c, "checkpoint.json"));
  save_config(c, path_in(c, "config.json"));
  {
    std::ofstream os(path_in(c, "loss_history.csv"));
    os.precision(17);
    os << "epoch,mean_loss,clipped_steps\n";
    for (std::size_t e = 0; e < r.loss_history.size(); ++e) os << e << ',' << r.loss_history[e] << ',' << r.clipped_steps[e] << '\n';
  }
  json stability = json::array();
  for (const StabilityCheck& s : r.stability) {
    stability.push_back({{"epoch", s.epoch}, {"e_ratio", s.e_ratio}, {"u_ratio", s.u_ratio}, {"passed", s.passed}});
  }
  std::mt19937_64 rng(c.eval.seed);
  const std::vector<Sample> show = draw_samples(p, 2, c.train.horizon, c.train.mode, c.train.fixed_targets, rng);
  write_svg(path_in(c, "trajectories.svg"), p.plant_layout, p.layout.field, render_rollouts(p, r.model, show));
  write_json(path_in(c, "train.json"), {{"command", "train"},
                                        {"mode", to_string(c.train.mode)},
                                        {"epochs", c.train.epochs},
                                        {"samples", c.train.samples},
                                        {"initial_loss", r.loss_history.front()},
                                        {"final_loss", r.loss_history.back()},
                                        {"stability_checks", stability}});
  std::cout << "loss " << r.loss_history.front() << " -> " << r.loss_history.back() << " after " << c.train.epochs
            << " epoch(s); checkpoint in " << path_in(c, "checkpoint.json") << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  ExperimentConfig c = load(o);
  if (o.checkpoint.empty()) throw ConfigError("eval requires --checkpoint");
  if (o.rollouts) c.eval.scenarios = *o.rollouts;
  const TrainProblem p = make_problem(c, true);
  const BoostOperator m = load_checkpoint(o.checkpoint);
  std::mt19937_64 rng(c.eval.seed);
  const Vec fixed = c.eval.fixed_targets.size() > 0 ? c.eval.fixed_targets : p.straight_targets();
  const std::vector<Sample> samples = draw_samples(p, c.eval.scenarios, c.train.horizon, c.eval.mode, fixed, rng);
  const EvalMetrics metrics = evaluate(p, m, samples);
  const json j = metrics_json(metrics);
  write_json(path_in(c, "metrics.json"), j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_check_robustness(const Options& o) {
  ExperimentConfig c = load(o);
  if (o.rollouts) c.robustness.trials = static_cast<int>(*o.rollouts);
  const TrainProblem p = make_problem(c, false);
  std::mt19937_64 rng(c.seed);
  const BoostOperator m = o.checkpoint.empty() ? BoostOperator::random(p.boost, c.train.init_std, rng) : load_checkpoint(o.checkpoint);
  const RobustAnalysis a = analyze_robustness(p, c.mismatch, m, c.robustness);
  std::cout << "mismatch       " << to_string(c.mismatch.kind) << '\n' << a.report.to_table();
  std::cout << "beta           " << a.beta << '\n';
  std::cout << "decayed tails  " << a.validation.decayed << '/' << a.validation.trials << '\n';
  std::cout << "max |u|/|w|    " << a.validation.max_u_ratio << '\n';
  std::cout << "max |e|/|w|    " << a.validation.max_e_ratio << '\n';
  if (!a.report.admissible) std::cout << "advisory: small-gain condition not satisfied, bounds are not certified\n";
  write_json(path_in(c, "gain_report.json"), json::parse(a.report.to_json()));
  write_sweep_csv(path_in(c, "beta_sweep.csv"), a.sweep);
  write_json(path_in(c, "robustness.json"), {{"command", "check-robustness"},
                                              {"beta", a.beta},
                                              {"unit_gain_bound", a.unit_gain_bound},
                                              {"report", json::parse(a.report.to_json())},
                                              {"decayed", a.validation.decayed},
                                              {"trials", a.validation.trials},
                                              {"max_u_ratio", a.validation.max_u_ratio},
                                              {"max_e_ratio", a.validation.max_e_ratio},
                                              {"within_bounds", a.within_bounds()},
                                              {"sweep_u_monotone", a.sweep_u_monotone}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference performance boosting: simulate, train, evaluate and analyze robustness"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Experiment config (JSON)");
    sub->add_option("--checkpoint", o.checkpoint, "Operator checkpoint (JSON)");
    sub->add_option("--seed", o.seed, "Seed override");
    sub->add_option("--out", o.out, "Output directory override");
    sub->add_option("--epochs", o.epochs, "Epoch count override");
    sub->add_option("--rollouts", o.rollouts, "Rollout count override");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "Run closed-loop rollouts and render them");
  CLI::App* train_cmd = app.add_subcommand("train", "Train the boosting operator");
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on held-out scenarios");
  CLI::App* robust_cmd = app.add_subcommand("check-robustness", "Small-gain analysis under model mismatch");
  for (CLI::App* s : {simulate, train_cmd, eval_cmd, robust_cmd}) add_common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*train_cmd) return cmd_train(o);
    if (*eval_cmd) return cmd_eval(o);
    if (*robust_cmd) return cmd_check_robustness(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
