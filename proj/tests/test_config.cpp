#include "rpb/checkpoint.hpp"
#include "rpb/config.hpp"
#include "rpb/svg.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <stack>

#include <unistd.h>

using namespace rpb;

namespace {

// Minimal well-formedness check: every element opened is closed in order.
bool balanced_xml(const std::string& doc, std::string* why) {
  std::stack<std::string> open;
  std::size_t i = 0;
  while ((i = doc.find('<', i)) != std::string::npos) {
    const std::size_t j = doc.find('>', i);
    if (j == std::string::npos) {
      *why = "unterminated tag";
      return false;
    }
    const std::string tag = doc.substr(i + 1, j - i - 1);
    i = j + 1;
    if (tag.empty() || tag[0] == '?' || tag[0] == '!') continue;
    if (tag.back() == '/') continue;
    const std::string name = tag.substr(tag[0] == '/' ? 1 : 0, tag.find_first_of(" \t\n") - (tag[0] == '/' ? 1 : 0));
    if (tag[0] == '/') {
      if (open.empty() || open.top() != name) {
        *why = "unexpected </" + name + ">";
        return false;
      }
      open.pop();
    } else {
      open.push(name);
    }
  }
  if (!open.empty()) *why = "unclosed <" + open.top() + ">";
  return open.empty();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("rpb_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  ExperimentConfig c;
  c.layout = "mountain_range";
  c.seed = 42;
  c.train.epochs = 7;
  c.train.final_learning_rate_ratio = 0.1;
  c.boost.hidden = {3, 4};
  c.boost.reference_relative_input = true;
  c.mismatch.kind = MismatchKind::kBoundedOperator;
  c.mismatch.gain = 0.2;
  c.eval.fixed_targets = (Vec(4) << -1.0, 2.0, 1.0, 2.0).finished();
  const ExperimentConfig d = config_from_string(config_to_string(c));
  EXPECT_EQ(config_to_string(d), config_to_string(c));
  EXPECT_EQ(d.layout, "mountain_range");
  EXPECT_EQ(d.train.seed, 42u);
  EXPECT_EQ(d.robustness.seed, 42u);
  EXPECT_EQ(d.boost.hidden, (std::vector<Index>{3, 4}));
  EXPECT_EQ(d.mismatch.kind, MismatchKind::kBoundedOperator);
  EXPECT_EQ(d.eval.fixed_targets, c.eval.fixed_targets);
}

TEST(Config, EmptyDocumentGivesDefaults) {
  const ExperimentConfig c = config_from_string("{}");
  EXPECT_EQ(c.layout, "corridor");
  EXPECT_EQ(c.train.samples, 30);
  EXPECT_EQ(c.train.horizon, 200);
  EXPECT_EQ(c.loss.collision_weight, 100.0);
  EXPECT_EQ(c.loss.obstacle_weight, 500.0);
  EXPECT_EQ(c.boost.hidden, (std::vector<Index>{15, 20, 14}));
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(config_from_string(R"({"layuot": "corridor"})"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"train": {"epoch": 3}})"), ConfigError);
}

TEST(Config, InvalidValuesRejected) {
  EXPECT_THROW(config_from_string("not json"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"layout": "atlantis"})"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"train": {"learning_rate": -1}})"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"train": {"epochs": "many"}})"), ConfigError);
  EXPECT_THROW(config_from_string(R"({"mismatch": {"kind": "gremlins"}})"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ProblemCarriesMismatchOnlyWhenAsked) {
  ExperimentConfig c;
  c.mismatch.kind = MismatchKind::kBoundedOperator;
  c.mismatch.gain = 0.2;
  EXPECT_EQ(make_problem(c, false).plant.mismatch().kind, MismatchKind::kNone);
  const TrainProblem p = make_problem(c, true);
  EXPECT_EQ(p.plant.mismatch().kind, MismatchKind::kBoundedOperator);
  EXPECT_EQ(p.model.mismatch().kind, MismatchKind::kNone);
  EXPECT_EQ(p.boost.input_dim, 12);
}

TEST(Config, SaveAndLoadFile) {
  ExperimentConfig c;
  c.train.epochs = 3;
  const auto path = temp_path("config.json");
  save_config(c, path.string());
  EXPECT_EQ(load_config(path.string()).train.epochs, 3);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RoundTripPreservesOperator) {
  BoostConfig cfg;
  cfg.hidden = {4, 5};
  cfg.output_scale = 0.3;
  cfg.reference_relative_input = true;
  std::mt19937_64 rng(1);
  const BoostOperator m = BoostOperator::random(cfg, 0.2, rng);
  const auto path = temp_path("ckpt.json");
  save_checkpoint(m, path.string());
  const BoostOperator r = load_checkpoint(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(r.params(), m.params());
  EXPECT_EQ(r.config().hidden, cfg.hidden);
  EXPECT_EQ(r.config().output_scale, 0.3);
  EXPECT_TRUE(r.config().reference_relative_input);
  const Signal w = gaussian_signal(12, 10, 1.0, rng);
  const Signal x(8, 10);
  EXPECT_EQ(r.apply(w, x).values(), m.apply(w, x).values());
}

TEST(Checkpoint, MalformedFilesRejected) {
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.json"), ConfigError);
  EXPECT_THROW(checkpoint_from_string("{}"), ConfigError);
  EXPECT_THROW(checkpoint_from_string(R"({"format": "rpb-checkpoint", "version": 99})"), ConfigError);
  BoostOperator m{BoostConfig{}};
  std::string text = checkpoint_to_string(m);
  text = std::regex_replace(text, std::regex("\"theta2\":\\s*\\["), "\"theta2\": [1.0, ");
  EXPECT_THROW(checkpoint_from_string(text), ConfigError);
}

TEST(Svg, WellFormedWithObstaclesAndPaths) {
  const PlantLayout pl;
  const Layout layout = make_layout("mountain_range");
  std::mt19937_64 rng(2);
  const Plant plant(pl, RobotParams::defaults(pl));
  Signal eta(12, 50);
  eta.at(0).head(8) = reference_signal(pl, layout.start, 0).at(0);
  const Vec targets = sample_reference(layout, rng);
  const Signal x_ref = reference_signal(pl, targets, 50);
  for (Index t = 0; t < 50; ++t) eta.at(t + 1) = plant.transition(eta.at(t), Vec::Zero(4), x_ref.at(t));
  const std::string svg = render_svg(pl, layout.field, {{eta, targets}});
  std::string why;
  EXPECT_TRUE(balanced_xml(svg, &why)) << why;
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.find("<svg") != std::string::npos, true);
  auto count = [&](const std::string& needle) {
    std::size_t n = 0, i = 0;
    while ((i = svg.find(needle, i)) != std::string::npos) {
      ++n;
      i += needle.size();
    }
    return n;
  };
  EXPECT_EQ(count("class=\"obstacle\""), 6u);
  EXPECT_EQ(count("class=\"path\""), 2u);
  EXPECT_EQ(count("class=\"start\""), 2u);
  EXPECT_EQ(count("class=\"target\""), 2u);
}
