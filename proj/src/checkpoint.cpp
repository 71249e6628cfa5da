#include "rpb/checkpoint.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace rpb {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace

std::string checkpoint_to_string(const BoostOperator& m) {
  const BoostConfig& c = m.config();
  json j;
  j["format"] = "rpb-checkpoint";
  j["version"] = kCheckpointVersion;
  j["input_dim"] = c.input_dim;
  j["reference_dim"] = c.reference_dim;
  j["control_dim"] = c.control_dim;
  j["ren_state"] = c.ren_state;
  j["ren_nonlinear"] = c.ren_nonlinear;
  j["hidden"] = c.hidden;
  j["bound"] = c.bound;
  j["output_scale"] = c.output_scale;
  j["gate"] = c.gate == GateMode::kScalar ? "scalar" : "elementwise";
  j["reference_relative_input"] = c.reference_relative_input;
  j["theta1"] = vec_json(m.ren_params().theta);
  j["theta2"] = vec_json(m.mlp().params());
  return j.dump(1);
}

BoostOperator checkpoint_from_string(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "rpb-checkpoint") throw ConfigError("not a checkpoint file");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ConfigError("unsupported checkpoint version " + std::to_string(version));
    }
    BoostConfig c;
    c.input_dim = j.at("input_dim").get<Index>();
    c.reference_dim = j.at("reference_dim").get<Index>();
    c.control_dim = j.at("control_dim").get<Index>();
    c.ren_state = j.at("ren_state").get<Index>();
    c.ren_nonlinear = j.at("ren_nonlinear").get<Index>();
    c.hidden = j.at("hidden").get<std::vector<Index>>();
    c.bound = j.at("bound").get<double>();
    c.output_scale = j.at("output_scale").get<double>();
    const std::string gate = j.at("gate").get<std::string>();
    if (gate != "scalar" && gate != "elementwise") throw ConfigError("unknown gate '" + gate + "'");
    c.gate = gate == "scalar" ? GateMode::kScalar : GateMode::kElementwise;
    c.reference_relative_input = j.at("reference_relative_input").get<bool>();

    BoostOperator m(c);
    const Vec t1 = json_vec(j.at("theta1"));
    const Vec t2 = json_vec(j.at("theta2"));
    if (t1.size() != m.ren_param_count() || t2.size() != m.mlp().param_count()) {
      throw ConfigError("checkpoint parameter sizes do not match its configuration");
    }
    Vec theta(m.param_count());
    theta << t1, t2;
    m.set_params(theta);
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const BoostOperator& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write checkpoint " + path);
  os << checkpoint_to_string(m) << '\n';
}

BoostOperator load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return checkpoint_from_string(ss.str());
}

}  // namespace rpb
