// Copyright 2026 The fedcrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "fedcrl/config.hpp"

#include <filesystem>

#include <gtest/gtest.h>
#include <json.hpp>

#include "fedcrl/errors.hpp"

namespace fedcrl {
namespace {

using nlohmann::json;

std::string field_of(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "<no error>";
}

TEST(Config, RandomMdpDefaults) {
  const RunConfig cfg = parse_config(R"({"env": "random-mdp"})");
  EXPECT_EQ(cfg.env.kind, EnvKind::kRandomMdp);
  EXPECT_EQ(cfg.mode, RunMode::kFedNpg);
  EXPECT_EQ(cfg.federation.local_steps, 5);
  EXPECT_EQ(cfg.federation.compat.n_samples, 10);
  EXPECT_DOUBLE_EQ(cfg.federation.lr_theta, 1e-3);
  EXPECT_DOUBLE_EQ(cfg.federation.lr_lambda, 1e-3);
  EXPECT_DOUBLE_EQ(cfg.federation.lambda_max, 10.0);
  EXPECT_DOUBLE_EQ(cfg.federation.compat.step_size, 0.125);
  EXPECT_EQ(cfg.federation.n_agents, cfg.env.random_mdp.n_constraints);
  EXPECT_EQ(cfg.federation.log_every, 100);
  EXPECT_FALSE(cfg.env.instance_seed.has_value());
  EXPECT_TRUE(cfg.reference);
}

TEST(Config, WindyCliffDefaults) {
  const RunConfig cfg = parse_config(R"({"env": {"name": "windy-cliff"}})");
  EXPECT_EQ(cfg.env.kind, EnvKind::kWindyCliff);
  EXPECT_DOUBLE_EQ(cfg.env.wind_prob, 0.4);
  EXPECT_DOUBLE_EQ(cfg.env.grid_discount, 0.95);
  EXPECT_EQ(cfg.federation.n_agents, 3);
  EXPECT_EQ(cfg.federation.total_steps, 150000);
}

TEST(Config, CartPoleDefaults) {
  const RunConfig cfg = parse_config(R"({"env": "cartpole-c"})");
  EXPECT_EQ(cfg.mode, RunMode::kFedPpo);
  EXPECT_EQ(cfg.federation.n_agents, 2);
  EXPECT_EQ(cfg.federation.local_steps, 1);
  EXPECT_DOUBLE_EQ(cfg.federation.lambda_max, 1.0);
  EXPECT_EQ(cfg.ppo.optimizer, OptimizerKind::kAdam);
  EXPECT_DOUBLE_EQ(cfg.ppo.cost_discount, 1.0);
  EXPECT_DOUBLE_EQ(cfg.ppo.discount, 0.99);
  EXPECT_EQ(cfg.ppo.horizon, 10000);
  EXPECT_EQ(cfg.ppo.hidden, (std::vector<int>{64, 64}));
  EXPECT_FALSE(cfg.reference);
}

TEST(Config, UnknownKeysNameTheirPath) {
  EXPECT_EQ(field_of(R"({"env": "random-mdp", "federation": {"lr_thet": 1}})"),
            "federation.lr_thet");
  EXPECT_EQ(field_of(R"({"env": "random-mdp", "extra": 1})"), "extra");
  EXPECT_EQ(field_of(R"({"env": {"name": "windy-cliff", "n_states": 3}})"), "env.n_states");
}

TEST(Config, TypeAndRangeErrorsNameTheirPath) {
  EXPECT_EQ(field_of(R"({"env": "random-mdp", "federation": {"lr_theta": "fast"}})"),
            "federation.lr_theta");
  EXPECT_EQ(field_of(R"({"env": "random-mdp", "federation": {"local_steps": 1.5}})"),
            "federation.local_steps");
  EXPECT_EQ(field_of(R"({"env": "random-mdp", "federation": {"seed": -1}})"), "federation.seed");
  EXPECT_EQ(field_of(R"({"env": {"name": "random-mdp", "discount": 1.0}})"), "env.discount");
  EXPECT_EQ(field_of(R"({"env": "cartpole-c", "ppo": {"optimizer": "rmsprop"}})"),
            "ppo.optimizer");
  EXPECT_EQ(field_of(R"({"env": "cartpole-c", "ppo": {"cost_discount": 1.5}})"),
            "ppo.cost_discount");
  EXPECT_EQ(field_of(R"({"env": "nowhere"})"), "env.name");
  EXPECT_EQ(field_of(R"({"mode": "fednpg"})"), "env");
  EXPECT_EQ(field_of("[1, 2]"), "");
  EXPECT_EQ(field_of("{not json"), "");
}

TEST(Config, ModeChecks) {
  EXPECT_EQ(parse_config(R"({"env": "random-mdp", "mode": "local:2"})").local_index, 2);
  EXPECT_EQ(field_of(R"({"env": "random-mdp", "mode": "local:9"})"), "mode");
  EXPECT_EQ(field_of(R"({"env": "random-mdp", "mode": "local:"})"), "mode");
  EXPECT_EQ(field_of(R"({"env": "random-mdp", "mode": "fedppo"})"), "mode");
  EXPECT_EQ(field_of(R"({"env": "cartpole-c", "mode": "fednpg"})"), "mode");
  EXPECT_EQ(parse_config(R"({"env": "cartpole-c", "mode": "omniscient"})").mode,
            RunMode::kOmniscient);
}

TEST(Config, OverridesApplyBeforeValidation) {
  const RunConfig cfg = parse_config(
      R"({"env": "random-mdp"})",
      {"federation.lr_theta=0.01", "env.n_states=7", "mode=omniscient", "output=somewhere"});
  EXPECT_DOUBLE_EQ(cfg.federation.lr_theta, 0.01);
  EXPECT_EQ(cfg.env.random_mdp.n_states, 7);
  EXPECT_EQ(cfg.mode, RunMode::kOmniscient);
  EXPECT_EQ(cfg.output, "somewhere");

  // An override may switch the environment named by a bare string.
  EXPECT_EQ(parse_config(R"({"env": "random-mdp"})", {"env.name=windy-cliff"}).env.kind,
            EnvKind::kWindyCliff);
  EXPECT_EQ(field_of(R"({"env": "random-mdp"})", {"federation.lr_theta"}), "--set");
  EXPECT_EQ(field_of(R"({"env": "random-mdp"})", {"federation.lr_theta=-1"}),
            "federation.lr_theta");
  EXPECT_EQ(field_of(R"({"env": "random-mdp"})", {"federation.bogus=1"}), "federation.bogus");
}

TEST(Config, ConstraintAssignmentSetsAgentCount) {
  const RunConfig cfg = parse_config(
      R"({"env": "random-mdp", "federation": {"constraint_assignment": [[0, 1], [2, 3]]}})");
  EXPECT_EQ(cfg.federation.n_agents, 2);
  EXPECT_EQ(cfg.federation.assignment(1), (std::vector<int>{2, 3}));
  EXPECT_EQ(field_of(
                R"({"env": "random-mdp", "federation": {"constraint_assignment": [[0], "x"]}})"),
            "federation.constraint_assignment[1]");
}

TEST(Config, EffectiveJsonIsAFixedPoint) {
  for (const char* text :
       {R"({"env": "random-mdp", "federation": {"seed": 4}})", R"({"env": "windy-cliff"})",
        R"({"env": "cartpole-c", "ppo": {"clip": 0.1}})"}) {
    const RunConfig first = parse_config(text);
    const RunConfig second = parse_config(first.effective_json);
    EXPECT_EQ(second.effective_json, first.effective_json) << text;
  }
  const json eff = json::parse(parse_config(R"({"env": "random-mdp"})").effective_json);
  EXPECT_TRUE(eff["federation"]["n_agents"].is_number_integer());
  EXPECT_TRUE(eff["ppo"].contains("cost_discount"));
}

TEST(Config, DefaultDocumentParses) {
  for (const char* name : {"random-mdp", "windy-cliff", "cartpole-c"}) {
    EXPECT_NO_THROW(parse_config(default_config_json(name))) << name;
  }
}

TEST(Config, FileEnvironmentNeedsPath) {
  EXPECT_EQ(field_of(R"({"env": "file"})"), "env.path");
}

TEST(Config, ShippedConfigsValidate) {
  int n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(FEDCRL_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(entry.path().string())) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 3);
}

}  // namespace
}  // namespace fedcrl
