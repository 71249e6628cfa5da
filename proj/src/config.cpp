#include "rpb/config.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace rpb {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

/// Reads optional keys of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + path_ + "' must be an object");
  }
  ~Section() = default;

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("invalid value for '" + where(key) + "'");
    }
  }

  void read_vec(const char* key, Vec& out) {
    std::vector<double> v;
    if (!j_.contains(key)) {
      seen_.insert(key);
      return;
    }
    read(key, v);
    out = Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, where(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + where(it.key()) + "'");
    }
  }

 private:
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

RobotParams RobotConfig::params(const PlantLayout& layout) const {
  RobotParams p;
  p.mass = mass;
  p.drag_linear = drag_linear;
  p.drag_quadratic = drag_quadratic;
  p.sampling_period = sampling_period;
  const Index d = layout.spatial_dim;
  for (Index i = 0; i < layout.robots; ++i) {
    p.gains.push_back({Vec::Constant(d, gains.kp), Vec::Constant(d, gains.ki), Vec::Constant(d, gains.kd)});
  }
  return p;
}

void ExperimentConfig::validate() const {
  make_layout(layout);
  const PlantLayout pl;
  robot.params(pl).validate(pl);
  loss.validate(pl);
  train.validate();
  if (!(boost.bound > 0.0)) throw ConfigError("boost.bound must be positive");
  if (!(boost.output_scale >= 0.0)) throw ConfigError("boost.output_scale must be nonnegative");
  if (boost.ren_state <= 0 || boost.ren_nonlinear <= 0) throw ConfigError("boost REN sizes must be positive");
  for (Index h : boost.hidden) {
    if (h <= 0) throw ConfigError("boost.hidden widths must be positive");
  }
  if (disturbance.initial_std < 0.0 || disturbance.noise_std < 0.0 || disturbance.noise_until < 0) {
    throw ConfigError("disturbance parameters must be nonnegative");
  }
  if (mismatch.gain < 0.0) throw ConfigError("mismatch.gain must be nonnegative");
  if (robustness.trials < 0 || robustness.fx_trials <= 0 || robustness.horizon <= 0) {
    throw ConfigError("invalid robustness trial counts");
  }
  if (!(robustness.target_margin > 0.0 && robustness.target_margin < 1.0)) {
    throw ConfigError("robustness.target_margin must lie in (0, 1)");
  }
  if (eval.scenarios < 0) throw ConfigError("eval.scenarios must be nonnegative");
  if (eval.fixed_targets.size() != 0 && eval.fixed_targets.size() != pl.input_dim()) {
    throw ConfigError("eval.fixed_targets must hold one position per robot");
  }
  if (train.fixed_targets.size() != 0 && train.fixed_targets.size() != pl.input_dim()) {
    throw ConfigError("train.fixed_targets must hold one position per robot");
  }
  if (simulate.rollouts < 0 || simulate.horizon <= 0) throw ConfigError("invalid simulate settings");
  if (simulate.targets.size() != 0 && simulate.targets.size() != pl.input_dim()) {
    throw ConfigError("simulate.targets must hold one position per robot");
  }
}

ExperimentConfig config_from_string(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section s(root, "");
  s.read("layout", c.layout);
  s.read("seed", c.seed);
  s.read("output_dir", c.output_dir);

  {
    Section r = s.sub("robot");
    r.read("mass", c.robot.mass);
    r.read("drag_linear", c.robot.drag_linear);
    r.read("drag_quadratic", c.robot.drag_quadratic);
    r.read("sampling_period", c.robot.sampling_period);
    Section g = r.sub("gains");
    g.read("kp", c.robot.gains.kp);
    g.read("ki", c.robot.gains.ki);
    g.read("kd", c.robot.gains.kd);
    g.finish();
    r.finish();
  }
  {
    Section l = s.sub("loss");
    l.read_vec("tracking_weight", c.loss.tracking_weight);
    l.read("input_weight", c.loss.input_weight);
    l.read("collision_weight", c.loss.collision_weight);
    l.read("safety_distance", c.loss.safety_distance);
    l.read("obstacle_weight", c.loss.obstacle_weight);
    l.read("sharpness", c.loss.sharpness);
    l.finish();
  }
  {
    Section t = s.sub("train");
    t.read("samples", c.train.samples);
    t.read("epochs", c.train.epochs);
    t.read("learning_rate", c.train.learning_rate);
    t.read("final_learning_rate_ratio", c.train.final_learning_rate_ratio);
    t.read("batch_size", c.train.batch_size);
    t.read("horizon", c.train.horizon);
    t.read("init_std", c.train.init_std);
    t.read("clip_norm", c.train.clip_norm);
    t.read("divergence_threshold", c.train.divergence_threshold);
    t.read("stability_check_every", c.train.stability_check_every);
    t.read("checkpoint_every", c.train.checkpoint_every);
    std::string mode = to_string(c.train.mode);
    t.read("mode", mode);
    c.train.mode = reference_mode_from_string(mode);
    t.read_vec("fixed_targets", c.train.fixed_targets);
    t.read("parallel", c.train.parallel);
    t.finish();
  }
  {
    Section b = s.sub("boost");
    b.read("ren_state", c.boost.ren_state);
    b.read("ren_nonlinear", c.boost.ren_nonlinear);
    b.read("hidden", c.boost.hidden);
    b.read("bound", c.boost.bound);
    b.read("output_scale", c.boost.output_scale);
    std::string gate = c.boost.gate == GateMode::kScalar ? "scalar" : "elementwise";
    b.read("gate", gate);
    if (gate != "scalar" && gate != "elementwise") throw ConfigError("boost.gate must be 'elementwise' or 'scalar'");
    c.boost.gate = gate == "scalar" ? GateMode::kScalar : GateMode::kElementwise;
    b.read("reference_relative_input", c.boost.reference_relative_input);
    b.finish();
  }
  {
    Section d = s.sub("disturbance");
    d.read("initial_std", c.disturbance.initial_std);
    d.read("noise_std", c.disturbance.noise_std);
    d.read("noise_until", c.disturbance.noise_until);
    d.finish();
  }
  {
    Section m = s.sub("mismatch");
    std::string kind = to_string(c.mismatch.kind);
    m.read("kind", kind);
    c.mismatch.kind = mismatch_kind_from_string(kind);
    m.read("gain", c.mismatch.gain);
    m.read("drag_linear_error", c.mismatch.drag_linear_error);
    m.read("drag_quadratic_error", c.mismatch.drag_quadratic_error);
    m.read("seed", c.mismatch.seed);
    m.finish();
  }
  {
    Section r = s.sub("robustness");
    r.read("fx_trials", c.robustness.fx_trials);
    r.read("fx_safety", c.robustness.fx_safety);
    r.read("target_margin", c.robustness.target_margin);
    r.read("trials", c.robustness.trials);
    r.read("horizon", c.robustness.horizon);
    r.read("sweep", c.robustness.sweep);
    r.read("tail_threshold", c.robustness.tail_threshold);
    r.finish();
  }
  {
    Section e = s.sub("eval");
    e.read("scenarios", c.eval.scenarios);
    e.read("seed", c.eval.seed);
    std::string mode = to_string(c.eval.mode);
    e.read("mode", mode);
    c.eval.mode = reference_mode_from_string(mode);
    e.read_vec("fixed_targets", c.eval.fixed_targets);
    e.finish();
  }
  {
    Section m = s.sub("simulate");
    m.read("rollouts", c.simulate.rollouts);
    m.read("horizon", c.simulate.horizon);
    m.read_vec("targets", c.simulate.targets);
    m.finish();
  }
  s.finish();
  c.train.seed = c.seed;
  c.robustness.seed = c.seed;
  c.validate();
  return c;
}

std::string config_to_string(const ExperimentConfig& c) {
  json j;
  j["layout"] = c.layout;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["robot"] = {{"mass", c.robot.mass},
                {"drag_linear", c.robot.drag_linear},
                {"drag_quadratic", c.robot.drag_quadratic},
                {"sampling_period", c.robot.sampling_period},
                {"gains", {{"kp", c.robot.gains.kp}, {"ki", c.robot.gains.ki}, {"kd", c.robot.gains.kd}}}};
  j["loss"] = {{"tracking_weight", vec_json(c.loss.tracking_weight)},
               {"input_weight", c.loss.input_weight},
               {"collision_weight", c.loss.collision_weight},
               {"safety_distance", c.loss.safety_distance},
               {"obstacle_weight", c.loss.obstacle_weight},
               {"sharpness", c.loss.sharpness}};
  j["train"] = {{"samples", c.train.samples},
                {"epochs", c.train.epochs},
                {"learning_rate", c.train.learning_rate},
                {"final_learning_rate_ratio", c.train.final_learning_rate_ratio},
                {"batch_size", c.train.batch_size},
                {"horizon", c.train.horizon},
                {"init_std", c.train.init_std},
                {"clip_norm", c.train.clip_norm},
                {"divergence_threshold", c.train.divergence_threshold},
                {"stability_check_every", c.train.stability_check_every},
                {"checkpoint_every", c.train.checkpoint_every},
                {"mode", to_string(c.train.mode)},
                {"fixed_targets", vec_json(c.train.fixed_targets)},
                {"parallel", c.train.parallel}};
  j["boost"] = {{"ren_state", c.boost.ren_state},
                {"ren_nonlinear", c.boost.ren_nonlinear},
                {"hidden", c.boost.hidden},
                {"bound", c.boost.bound},
                {"output_scale", c.boost.output_scale},
                {"gate", c.boost.gate == GateMode::kScalar ? "scalar" : "elementwise"},
                {"reference_relative_input", c.boost.reference_relative_input}};
  j["disturbance"] = {{"initial_std", c.disturbance.initial_std},
                      {"noise_std", c.disturbance.noise_std},
                      {"noise_until", c.disturbance.noise_until}};
  j["mismatch"] = {{"kind", to_string(c.mismatch.kind)},
                   {"gain", c.mismatch.gain},
                   {"drag_linear_error", c.mismatch.drag_linear_error},
                   {"drag_quadratic_error", c.mismatch.drag_quadratic_error},
                   {"seed", c.mismatch.seed}};
  j["robustness"] = {{"fx_trials", c.robustness.fx_trials},
                     {"fx_safety", c.robustness.fx_safety},
                     {"target_margin", c.robustness.target_margin},
                     {"trials", c.robustness.trials},
                     {"horizon", c.robustness.horizon},
                     {"sweep", c.robustness.sweep},
                     {"tail_threshold", c.robustness.tail_threshold}};
  j["eval"] = {{"scenarios", c.eval.scenarios},
               {"seed", c.eval.seed},
               {"mode", to_string(c.eval.mode)},
               {"fixed_targets", vec_json(c.eval.fixed_targets)}};
  j["simulate"] = {{"rollouts", c.simulate.rollouts},
                   {"horizon", c.simulate.horizon},
                   {"targets", vec_json(c.simulate.targets)}};
  return j.dump(2);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_string(ss.str());
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << config_to_string(config) << '\n';
}

TrainProblem make_problem(const ExperimentConfig& config, bool with_mismatch) {
  TrainProblem p = TrainProblem::nominal(config.layout);
  const RobotParams params = config.robot.params(p.plant_layout);
  p.model = Plant(p.plant_layout, params);
  p.plant = with_mismatch ? apply_mismatch(config.mismatch, p.model) : p.model;
  p.loss = config.loss;
  p.disturbance = config.disturbance;
  BoostConfig b = config.boost;
  b.input_dim = p.plant_layout.state_dim();
  b.reference_dim = p.plant_layout.reference_dim();
  b.control_dim = p.plant_layout.input_dim();
  p.boost = b;
  return p;
}

}  // namespace rpb
