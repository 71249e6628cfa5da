// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "rpb/config.hpp"
#include "rpb/robust.hpp"
#include "rpb/svg.hpp"
#include "rpb/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

using namespace rpb;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentConfig config_file(const std::string& name) {
  return load_config((std::filesystem::path(RPB_CONFIG_DIR) / name).string());
}

std::vector<Sample> corridor_draws(const TrainProblem& p, int count, Index T, std::mt19937_64& rng, double noise) {
  TrainProblem q = p;
  q.disturbance.noise_std = noise;
  q.disturbance.noise_until = noise > 0.0 ? T / 5 : 0;
  return draw_samples(q, count, T, ReferenceMode::kSampled, Vec(), rng);
}

Outcome imc_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainProblem p = TrainProblem::nominal("corridor");
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (const Sample& s : corridor_draws(p, 100, 200, rng, 0.05)) {
    const BoostOperator m = BoostOperator::random(p.boost, 0.1, rng);
    const RolloutResult r = rollout(p.plant, p.model, m, s.w, s.x_ref);
    worst = std::max(worst, (r.w_hat.values() - s.w.values()).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 10.0, fmt("max |w_hat - w| = %.3e", worst) + fmt(", %.2f s", secs)};
}

Outcome open_loop_equivalence() {
  const TrainProblem p = TrainProblem::nominal("corridor");
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (const Sample& s : corridor_draws(p, 100, 200, rng, 0.05)) {
    const BoostOperator m = BoostOperator::random(p.boost, 0.1, rng);
    const RolloutResult r = rollout(p.plant, p.model, m, s.w, s.x_ref);
    worst = std::max(worst, (r.u.values() - m.apply(s.w, s.x_ref).values()).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-10, fmt("sup |u_loop - M(w, x_ref)| = %.3e over 100 instances", worst)};
}

Outcome tracking_preservation() {
  const TrainProblem p = TrainProblem::nominal("corridor");
  std::mt19937_64 rng(303);
  const Index T = 600;
  double worst_e = 0.0, worst_u = 0.0;
  int k = 0;
  for (const Sample& s : corridor_draws(p, 50, T, rng, 0.05)) {
    BoostConfig cfg = p.boost;
    cfg.reference_relative_input = k % 2 == 1;
    const BoostOperator m = BoostOperator::random(cfg, k % 3 == 0 ? 1.0 : 0.1, rng);
    const RolloutResult r = rollout(p.plant, p.model, m, s.w, s.x_ref);
    worst_e = std::max(worst_e, tail_energy(r.e, 4 * T / 5) / lp_norm(r.e));
    const double nu = lp_norm(r.u);
    worst_u = std::max(worst_u, nu > 0.0 ? tail_energy(r.u, 4 * T / 5) / nu : 0.0);
    ++k;
  }
  return {worst_e < 1e-2 && worst_u < 1e-2,
          fmt("worst tail ratios: e %.3e", worst_e) + fmt(", u %.3e over 50 random theta", worst_u)};
}

Outcome completeness() {
  const TrainProblem p = TrainProblem::nominal("corridor");
  const PlantLayout pl = p.plant_layout;
  const std::vector<std::pair<std::string, PolicyFactory>> policies = {
      {"zero", [] { return std::make_unique<ZeroPolicy>(4); }},
      {"static-feedback", [pl] { return std::make_unique<StaticFeedbackPolicy>(pl, 0.3); }},
      {"delayed-impulse", [pl] { return std::make_unique<DelayedImpulsePolicy>(pl, 10, 0.5); }},
  };
  std::mt19937_64 rng(404);
  bool ok = true;
  double worst = 0.0;
  for (const auto& [name, factory] : policies) {
    for (const Sample& s : corridor_draws(p, 5, 200, rng, 0.05)) {
      const CompletenessReport rep = completeness_check(p.plant, factory, s.w, s.x_ref, 1e-9);
      ok = ok && rep.reproduced;
      worst = std::max({worst, rep.max_state_error, rep.max_input_error});
    }
  }
  return {ok, fmt("3 policies x 5 draws, worst replay error %.3e", worst)};
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  const PlantLayout pl{1, 1};
  const Plant plant(pl, RobotParams::defaults(pl));
  BoostConfig cfg;
  cfg.input_dim = 3;
  cfg.reference_dim = 2;
  cfg.control_dim = 1;
  cfg.ren_state = 2;
  cfg.ren_nonlinear = 2;
  cfg.hidden = {4, 3};
  cfg.bound = 2.0;
  LossSpec spec;
  spec.tracking_weight = Vec::Ones(1);
  spec.input_weight = 0.1;
  const Loss loss(spec, ObstacleField{}, pl);
  std::mt19937_64 rng(505);
  std::normal_distribution<double> n(0.0, 0.5);
  const Index T = 5;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    BoostOperator m = BoostOperator::random(cfg, 0.5, rng);
    Sample s{Signal(3, T), Signal(2, T)};
    s.w.at(0) << 1.0 + n(rng), n(rng), 0.0;
    for (Index t = 1; t <= T; ++t) s.w.at(t) << 0.1 * n(rng), 0.1 * n(rng), 0.0;
    const double target = n(rng);
    for (Index t = 0; t <= T; ++t) s.x_ref.at(t) << target, 0.0;
    const Vec g = backward(record(plant, plant, m, loss, s), plant, plant, m, loss);
    const Vec theta = m.params();
    Vec fd(theta.size());
    const double h = 1e-6;
    for (Index i = 0; i < theta.size(); ++i) {
      Vec a = theta, b = theta;
      a(i) += h;
      b(i) -= h;
      m.set_params(a);
      const double la = rollout(plant, plant, m, s.w, s.x_ref, &loss).total_loss();
      m.set_params(b);
      const double lb = rollout(plant, plant, m, s.w, s.x_ref, &loss).total_loss();
      fd(i) = (la - lb) / (2 * h);
    }
    worst = std::max(worst, (g - fd).norm() / fd.norm());
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 30.0, fmt("worst relative error %.3e over 20 instances", worst) + fmt(", %.2f s", secs)};
}

Outcome ren_certificates() {
  std::mt19937_64 rng(606);
  const RenDims d{12, 12, 12, 4};
  int certified = 0;
  for (int k = 0; k < 100; ++k) {
    const RenRealization r = realize(RenFreeParams::gaussian(d, k % 2 == 0 ? 0.1 : 1.0, rng));
    const bool ok = contraction_residual(r) <= 1e-8 * (1.0 + r.metric.norm()) && r.rate < 1.0 &&
                    verify_contraction(r, 3, 30, static_cast<std::uint64_t>(k));
    certified += ok ? 1 : 0;
  }
  const RenFreeParams params = RenFreeParams::gaussian(d, 0.5, rng);
  const double g1 = empirical_incremental_gain(realize(params, 1.0), 30, 50, 2.0, 9);
  double worst = 0.0;
  for (double beta : {0.1, 0.5, 2.0, 3.0}) {
    const double gb = empirical_incremental_gain(realize(params, beta), 30, 50, 2.0, 9);
    worst = std::max(worst, std::abs(gb - beta * g1) / std::max(1.0, beta * g1));
  }
  return {certified == 100 && worst <= 1e-9,
          std::to_string(certified) + "/100 certified" + fmt(", gain scaling error %.3e", worst)};
}

// Shared by criteria 7 to 9.
struct CorridorRuns {
  ExperimentConfig rpb_config, bpb_config;
  TrainResult rpb, bpb;
  double rpb_seconds = 0.0;
};

const CorridorRuns& corridor_runs() {
  static std::optional<CorridorRuns> runs;
  if (!runs) {
    CorridorRuns r;
    r.rpb_config = config_file("corridor_rpb.json");
    r.bpb_config = config_file("corridor_bpb.json");
    const auto t0 = std::chrono::steady_clock::now();
    r.rpb = train(make_problem(r.rpb_config), r.rpb_config.train);
    r.rpb_seconds = seconds_since(t0);
    r.bpb = train(make_problem(r.bpb_config), r.bpb_config.train);
    runs = std::move(r);
  }
  return *runs;
}

Outcome robustness() {
  const CorridorRuns& runs = corridor_runs();
  ExperimentConfig c = runs.rpb_config;
  c.mismatch.kind = MismatchKind::kBoundedOperator;
  c.mismatch.gain = 0.2;
  c.robustness.target_margin = 0.5;
  c.robustness.trials = 50;
  const RobustAnalysis a = analyze_robustness(make_problem(c, false), c.mismatch, runs.rpb.model, c.robustness);
  const ClosedLoopBounds hand = closed_loop_bounds(0.2, 1.0, 0.5);
  const bool hand_ok = std::abs(hand.u_gain - 0.75) <= 1e-12 && std::abs(hand.e_gain - 1.75) <= 1e-12;
  const bool margin_ok = std::abs(a.report.margin - 0.5) <= 1e-12;
  std::ostringstream os;
  os << "margin " << a.report.margin << ", decayed " << a.validation.decayed << "/" << a.validation.trials
     << ", |u|/|w| " << a.validation.max_u_ratio << " <= " << a.report.u_gain << ", |e|/|w| "
     << a.validation.max_e_ratio << " <= " << a.report.e_gain << ", hand bounds " << hand.u_gain << "/"
     << hand.e_gain;
  return {hand_ok && margin_ok && a.tails_decayed() && a.within_bounds(), os.str()};
}

Outcome corridor_training() {
  const CorridorRuns& runs = corridor_runs();
  const TrainProblem p = make_problem(runs.rpb_config);
  const std::vector<double>& h = runs.rpb.loss_history;
  const double reduction = 1.0 - h.back() / h.front();
  std::mt19937_64 rng(runs.rpb_config.eval.seed);
  const auto held_out = draw_samples(p, 50, runs.rpb_config.train.horizon, ReferenceMode::kSampled, Vec(), rng);
  const EvalMetrics m = evaluate(p, runs.rpb.model, held_out);
  std::ostringstream os;
  os << "loss " << h.front() << " -> " << h.back() << " (" << 100.0 * reduction << "% lower), collision-free "
     << 100.0 * m.collision_free_fraction << "% of 50 held-out (" << m.collisions << " robot collisions, "
     << m.scenarios_with_penetration << " with penetration), " << fmt("%.1f s", runs.rpb_seconds);
  return {reduction >= 0.5 && m.collision_free_fraction >= 0.9, os.str()};
}

Outcome generalization_contrast() {
  const CorridorRuns& runs = corridor_runs();
  const TrainProblem p = make_problem(runs.bpb_config);
  std::mt19937_64 rng(runs.bpb_config.eval.seed);
  const auto draws = draw_samples(p, runs.bpb_config.eval.scenarios, runs.bpb_config.train.horizon,
                                  ReferenceMode::kFixed, runs.bpb_config.eval.fixed_targets, rng);
  const EvalMetrics fixed = evaluate(p, runs.bpb.model, draws);
  const EvalMetrics sampled = evaluate(p, runs.rpb.model, draws);
  std::ostringstream os;
  os << "penetration frames on the swapped pair: fixed-reference " << fixed.penetration_frames
     << ", sampled-reference " << sampled.penetration_frames << " (" << draws.size() << " draws)";
  return {fixed.penetration_frames > sampled.penetration_frames, os.str()};
}

Outcome mountain_smoke() {
  const ExperimentConfig c = config_file("mountain.json");
  const TrainProblem p = make_problem(c);
  const TrainResult r = train(p, c.train);
  std::mt19937_64 rng(c.eval.seed);
  const auto draws = draw_samples(p, 5, c.train.horizon, ReferenceMode::kSampled, Vec(), rng);
  std::vector<Trajectory> traj;
  for (const Sample& s : draws) {
    const RolloutResult rr = rollout(p.plant, p.model, r.model, s.w, s.x_ref);
    traj.push_back({rr.eta, (Vec(4) << s.x_ref.at(0).segment(0, 2), s.x_ref.at(0).segment(4, 2)).finished()});
  }
  const std::string path = "acceptance_mountain.svg";
  write_svg(path, p.plant_layout, p.layout.field, traj);
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  const bool rendered = ss.str().find("class=\"obstacle\"") != std::string::npos &&
                        ss.str().find("class=\"path\"") != std::string::npos;
  std::ostringstream os;
  os << "loss " << r.loss_history.front() << " -> " << r.loss_history.back() << ", trajectories "
     << (rendered ? "rendered to " + path : "missing");
  return {r.loss_history.back() < r.loss_history.front() && rendered, os.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 IMC exactness", imc_exactness},
      {"2 open-loop equivalence", open_loop_equivalence},
      {"3 tracking preservation", tracking_preservation},
      {"4 completeness replay", completeness},
      {"5 gradient correctness", gradient_check},
      {"6 REN certificates", ren_certificates},
      {"7 robustness under mismatch", robustness},
      {"8 corridor training", corridor_training},
      {"9 generalization contrast", generalization_contrast},
      {"10 mountain-range smoke run", mountain_smoke},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
