#include "rpb/robust.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace rpb {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonnegative(double a, const char* name) {
  if (!(a >= 0.0)) throw Error(std::string(name) + " must be nonnegative");
}
}  // namespace

ConditionResult small_gain_condition(double alpha_delta, double alpha_fx, double alpha_m) {
  require_nonnegative(alpha_delta, "alpha_delta");
  require_nonnegative(alpha_fx, "alpha_fx");
  require_nonnegative(alpha_m, "alpha_m");
  ConditionResult c;
  if (alpha_delta == 0.0) {
    c.threshold = kInf;
    return c;
  }
  c.threshold = 1.0 / (alpha_delta * (alpha_fx + 1.0));
  c.margin = 1.0 - alpha_delta * alpha_m * (alpha_fx + 1.0);
  c.holds = alpha_m < c.threshold;
  return c;
}

ClosedLoopBounds closed_loop_bounds(double alpha_delta, double alpha_fx, double alpha_m) {
  const ConditionResult c = small_gain_condition(alpha_delta, alpha_fx, alpha_m);
  if (!c.holds || !(c.margin > 0.0)) {
    std::ostringstream os;
    os << "small-gain condition violated: margin " << c.margin << " (alpha_m " << alpha_m
       << ", threshold " << c.threshold << ")";
    throw ConditionViolated(os.str());
  }
  const double den = c.margin;
  return {alpha_m * (alpha_delta * alpha_fx + 1.0) / den,
          alpha_fx * (1.0 + alpha_m * (1.0 - alpha_delta)) / den};
}

GainReport make_gain_report(double alpha_delta, double alpha_fx, double alpha_m) {
  GainReport r;
  r.alpha_delta = alpha_delta;
  r.alpha_fx = alpha_fx;
  r.alpha_m = alpha_m;
  const ConditionResult c = small_gain_condition(alpha_delta, alpha_fx, alpha_m);
  r.margin = c.margin;
  r.admissible = c.holds && c.margin > 0.0;
  if (r.admissible) {
    const ClosedLoopBounds b = closed_loop_bounds(alpha_delta, alpha_fx, alpha_m);
    r.u_gain = b.u_gain;
    r.e_gain = b.e_gain;
  } else {
    r.u_gain = kNaN;
    r.e_gain = kNaN;
  }
  return r;
}

namespace {
nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
}  // namespace

std::string GainReport::to_json() const {
  nlohmann::json j;
  j["alpha_delta"] = number_or_null(alpha_delta);
  j["alpha_fx"] = number_or_null(alpha_fx);
  j["alpha_m"] = number_or_null(alpha_m);
  j["margin"] = number_or_null(margin);
  j["admissible"] = admissible;
  j["u_gain"] = number_or_null(u_gain);
  j["e_gain"] = number_or_null(e_gain);
  return j.dump(2);
}

std::string GainReport::to_table() const {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "alpha(Delta)   " << alpha_delta << '\n'
     << "alpha(F^x)     " << alpha_fx << '\n'
     << "alpha(M)       " << alpha_m << '\n'
     << "margin         " << margin << (admissible ? "  (admissible)" : "  (not admissible)") << '\n';
  if (admissible) {
    os << "u gain bound   " << u_gain << '\n' << "e gain bound   " << e_gain << '\n';
  }
  return os.str();
}

double estimate_incremental_gain(const SignalMap& op, Index input_dim, int trials, Index horizon, double p,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> scale(-3.0, 1.0);
  double best = -1.0;
  for (int k = 0; k < trials; ++k) {
    Signal a(input_dim, horizon), b(input_dim, horizon);
    const double amp = std::pow(10.0, scale(rng));
    for (Index t = 0; t <= horizon; ++t)
      for (Index i = 0; i < input_dim; ++i) a.at(t)(i) = n(rng);
    switch (k % 3) {
      case 0:  // independent pair
        for (Index t = 0; t <= horizon; ++t)
          for (Index i = 0; i < input_dim; ++i) b.at(t)(i) = n(rng);
        break;
      case 1:  // local perturbation
        b = a;
        for (Index t = 0; t <= horizon; ++t)
          for (Index i = 0; i < input_dim; ++i) b.at(t)(i) += amp * n(rng);
        break;
      default:  // against the zero input
        b = Signal(input_dim, horizon);
        break;
    }
    const double din = lp_norm(a - b, p);
    if (!(din > 0.0)) continue;
    best = std::max(best, lp_norm(op(a) - op(b), p) / din);
  }
  if (best < 0.0) throw Error("estimate_incremental_gain: no admissible input pairs");
  return best;
}

double estimate_incremental_gain(SequenceOperator& op, int trials, Index horizon, double p, std::uint64_t seed) {
  const SignalMap f = [&op](const Signal& in) {
    op.reset();
    return op.apply(in);
  };
  return estimate_incremental_gain(f, op.input_dim(), trials, horizon, p, seed);
}

Signal simulate_plant_state(const Plant& plant, const Signal& u, const Signal& w, const Signal& x_ref) {
  const PlantLayout& pl = plant.layout();
  require_dim(w.dim(), pl.state_dim(), "disturbance");
  require_dim(u.dim(), pl.input_dim(), "input");
  Signal x(pl.plant_dim(), w.horizon());
  Vec eta = w.at(0);
  for (Index t = 0;; ++t) {
    x.at(t) = eta.head(pl.plant_dim());
    if (t == w.horizon()) break;
    eta = plant.transition(eta, u.at(t), x_ref.at(t)) + w.at(t + 1);
  }
  return x;
}

namespace {

/// w_ref = (x_ref_0, 0) at t = 0 and zero afterwards.
Signal reference_disturbance(const PlantLayout& pl, const Signal& x_ref) {
  Signal w(pl.state_dim(), x_ref.horizon());
  w.at(0).head(pl.plant_dim()) = x_ref.at(0);
  return w;
}

}  // namespace

double estimate_fx_gain(const Plant& plant, const Layout& layout, int trials, Index horizon, double p,
                        std::uint64_t seed) {
  const PlantLayout& pl = plant.layout();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double best = -1.0;
  for (int k = 0; k < trials; ++k) {
    const Vec targets = sample_reference(layout, rng);
    const Signal x_ref = reference_signal(pl, targets, horizon);
    const Signal w_ref = reference_disturbance(pl, x_ref);
    Signal w = w_ref;
    Signal u(pl.input_dim(), horizon);
    const double amp = 0.05 + 2.0 * unit(rng);
    const Index active = 1 + static_cast<Index>(unit(rng) * static_cast<double>(horizon / 5));
    switch (k % 4) {
      case 0: {  // start away from the target, at rest
        for (Index i = 0; i < pl.robots; ++i)
          for (Index j = 0; j < pl.spatial_dim; ++j)
            w.at(0)(pl.position_index(i) + j) = layout.start(i * pl.spatial_dim + j) + 0.5 * n(rng);
        break;
      }
      case 1: {  // persistent process noise
        for (Index t = 1; t <= active; ++t)
          for (Index i = 0; i < pl.plant_dim(); ++i) w.at(t)(i) = 0.1 * amp * n(rng);
        break;
      }
      case 2: {  // piecewise-constant input offset
        Vec level(pl.input_dim());
        for (Index t = 0; t <= active; ++t) {
          if (t % 10 == 0)
            for (Index i = 0; i < level.size(); ++i) level(i) = amp * n(rng);
          u.at(t) = level;
        }
        break;
      }
      default: {  // mixed
        for (Index i = 0; i < pl.plant_dim(); ++i) w.at(0)(i) += amp * n(rng);
        for (Index t = 0; t <= active; ++t)
          for (Index i = 0; i < pl.input_dim(); ++i) u.at(t)(i) = amp * n(rng);
        break;
      }
    }
    const Signal x = simulate_plant_state(plant, u, w, x_ref);
    const double din = lp_norm(u, p) + lp_norm(w - w_ref, p);
    if (!(din > 0.0)) continue;
    best = std::max(best, lp_norm(x - x_ref, p) / din);
  }
  if (best < 0.0) throw Error("estimate_fx_gain: no admissible input pairs");
  return best;
}

BoostOperator reference_gated(const BoostOperator& m) {
  BoostConfig cfg = m.config();
  cfg.reference_relative_input = true;
  BoostOperator gated(cfg);
  Vec theta = m.params();
  // The first MLP weight block is column-major (out x (input + reference)); its first
  // input_dim columns read the disturbance estimate.
  const Index out = cfg.mlp_widths()[1];
  theta.segment(m.ren_param_count(), out * cfg.input_dim).setZero();
  gated.set_params(theta);
  return gated;
}

double boost_gain_bound(const BoostOperator& m) { return m.config().bound * incremental_gain_bound(m.ren()); }

RobustValidation validate_robust_tracking(const Plant& plant, const Plant& model, const BoostOperator& m,
                                          const Layout& layout, const DisturbanceSpec& disturbance, int trials,
                                          Index horizon, std::uint64_t seed, double tail_threshold) {
  const PlantLayout& pl = plant.layout();
  DisturbanceSpec spec = disturbance;
  spec.noise_until = std::min(spec.noise_until, horizon / 5);
  std::mt19937_64 rng(seed);
  RobustValidation v;
  v.trials = trials;
  const Index tail = (4 * horizon) / 5;
  for (int k = 0; k < trials; ++k) {
    const Signal w = sample_disturbance(pl, layout.start, spec, horizon, rng);
    const Signal x_ref = reference_signal(pl, sample_reference(layout, rng), horizon);
    const RolloutResult r = rollout(plant, model, m, w, x_ref);
    const double dw = lp_norm(w - reference_disturbance(pl, x_ref));
    const double ne = lp_norm(r.e);
    const double nu = lp_norm(r.u);
    const double tail_e = ne > 0.0 ? tail_energy(r.e, tail) / ne : 0.0;
    const double tail_u = nu > 0.0 ? tail_energy(r.u, tail) / nu : 0.0;
    v.max_tail_e = std::max(v.max_tail_e, tail_e);
    v.max_tail_u = std::max(v.max_tail_u, tail_u);
    if (tail_e < tail_threshold && tail_u < tail_threshold) ++v.decayed;
    if (dw > 0.0) {
      v.max_u_ratio = std::max(v.max_u_ratio, nu / dw);
      v.max_e_ratio = std::max(v.max_e_ratio, ne / dw);
      v.mean_u_ratio += nu / dw;
      v.mean_e_ratio += ne / dw;
    }
  }
  if (trials > 0) {
    v.mean_u_ratio /= trials;
    v.mean_e_ratio /= trials;
  }
  return v;
}

bool RobustAnalysis::within_bounds() const {
  if (!report.admissible) return false;
  return validation.max_u_ratio <= report.u_gain && validation.max_e_ratio <= report.e_gain;
}

RobustAnalysis analyze_robustness(const TrainProblem& problem, const MismatchSpec& mismatch, const BoostOperator& m,
                                  const RobustOptions& options) {
  const Plant plant = apply_mismatch(mismatch, problem.model);
  RobustAnalysis a;
  const double alpha_delta = mismatch.alpha_bound(problem.model.params());
  const double alpha_fx =
      options.fx_safety * estimate_fx_gain(plant, problem.layout, options.fx_trials, options.horizon, 2.0, options.seed);

  BoostOperator gated = reference_gated(m);
  gated.set_output_scale(1.0);
  a.unit_gain_bound = boost_gain_bound(gated);

  a.beta = m.config().output_scale;
  if (alpha_delta > 0.0 && std::isfinite(alpha_delta) && std::isfinite(a.unit_gain_bound) && a.unit_gain_bound > 0.0) {
    const double target_alpha_m = (1.0 - options.target_margin) / (alpha_delta * (alpha_fx + 1.0));
    a.beta = target_alpha_m / a.unit_gain_bound;
  }

  auto run = [&](double beta) {
    SweepPoint pt;
    pt.beta = beta;
    BoostOperator scaled = gated;
    scaled.set_output_scale(beta);
    const double alpha_m = beta * a.unit_gain_bound;
    pt.report = std::isfinite(alpha_delta) ? make_gain_report(alpha_delta, alpha_fx, alpha_m) : GainReport{};
    if (!std::isfinite(alpha_delta)) {
      pt.report.alpha_delta = alpha_delta;
      pt.report.alpha_fx = alpha_fx;
      pt.report.alpha_m = alpha_m;
      pt.report.margin = -kInf;
      pt.report.admissible = false;
      pt.report.u_gain = pt.report.e_gain = kNaN;
    }
    pt.validation = validate_robust_tracking(plant, problem.model, scaled, problem.layout, problem.disturbance,
                                             options.trials, options.horizon, options.seed + 1,
                                             options.tail_threshold);
    return pt;
  };

  const SweepPoint main = run(a.beta);
  a.report = main.report;
  a.validation = main.validation;
  for (double f : options.sweep) {
    a.sweep.push_back(run(f * a.beta));
    if (a.sweep.size() > 1) {
      const RobustValidation& prev = a.sweep[a.sweep.size() - 2].validation;
      const RobustValidation& cur = a.sweep.back().validation;
      if (cur.max_u_ratio < prev.max_u_ratio) a.sweep_u_monotone = false;
      if (cur.max_e_ratio < prev.max_e_ratio) a.sweep_e_monotone = false;
    }
  }
  return a;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepPoint>& sweep) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << std::setprecision(10);
  os << "beta,alpha_m,margin,u_gain,e_gain,max_u_ratio,max_e_ratio,mean_u_ratio,mean_e_ratio,decayed,trials\n";
  for (const SweepPoint& s : sweep) {
    os << s.beta << ',' << s.report.alpha_m << ',' << s.report.margin << ',' << s.report.u_gain << ','
       << s.report.e_gain << ',' << s.validation.max_u_ratio << ',' << s.validation.max_e_ratio << ','
       << s.validation.mean_u_ratio << ',' << s.validation.mean_e_ratio << ',' << s.validation.decayed << ','
       << s.validation.trials << '\n';
  }
}

}  // namespace rpb
