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


#include "fedcrl/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "fedcrl/cmdp.hpp"
#include "fedcrl/errors.hpp"

namespace fedcrl {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fedcrl_exp_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
};

constexpr const char* kSmall =
    R"({"env": {"name": "random-mdp", "n_states": 3, "n_actions": 2, "n_constraints": 2},
        "federation": {"total_steps": 40, "log_every": 10, "seed": 3}})";

TEST_F(ExperimentTest, ZeroStepsWritesHeaderOnlyCsv) {
  const RunConfig cfg = parse_config(kSmall, {"federation.total_steps=0"});
  const RunOutcome out = run_experiment(cfg, dir_.string());
  EXPECT_TRUE(out.logs.empty());
  EXPECT_EQ(slurp(dir_ / "metrics.csv"), csv_header(2) + "\n");
  EXPECT_TRUE(fs::exists(dir_ / "run.json"));
  EXPECT_TRUE(fs::exists(dir_ / "summary.json"));
  EXPECT_TRUE(fs::exists(dir_ / "checkpoints" / "policy.json"));
  EXPECT_TRUE(fs::exists(dir_ / "checkpoints" / "env.json"));
}

TEST_F(ExperimentTest, RunDirectoryIsComplete) {
  const RunConfig cfg = parse_config(kSmall);
  const RunOutcome out = run_experiment(cfg, dir_.string());
  const std::vector<RoundLog> rows = read_csv((dir_ / "metrics.csv").string());
  EXPECT_EQ(rows.size(), out.logs.size());
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows.back().iteration, 40);

  const json summary = json::parse(slurp(dir_ / "summary.json"));
  EXPECT_EQ(summary["mode"], "fednpg");
  EXPECT_EQ(summary["seed"], 3);
  EXPECT_EQ(summary["final"]["j_c"].size(), 2u);
  EXPECT_FALSE(summary["reference"].is_null());
  EXPECT_TRUE(summary["metrics"]["mvr"].is_number());
  EXPECT_TRUE(summary.contains("truncations"));

  // The saved environment is the one that was trained on.
  const TabularCmdp env = load_cmdp((dir_ / "checkpoints" / "env.json").string());
  EXPECT_EQ(env.n_states, 3);
  EXPECT_EQ(env.n_constraints(), 2);
}

TEST_F(ExperimentTest, RunJsonReproducesTheRun) {
  const RunConfig cfg = parse_config(kSmall, {"federation.lr_theta=0.01"});
  run_experiment(cfg, (dir_ / "a").string());
  const RunConfig again = load_config((dir_ / "a" / "run.json").string());
  run_experiment(again, (dir_ / "b").string());
  EXPECT_EQ(slurp(dir_ / "a" / "metrics.csv"), slurp(dir_ / "b" / "metrics.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "summary.json"), slurp(dir_ / "b" / "summary.json"));
}

TEST_F(ExperimentTest, BaselineModesRun) {
  for (const char* mode : {"local:1", "omniscient"}) {
    const RunConfig cfg = parse_config(kSmall, {std::string("mode=") + mode});
    const RunOutcome out = run_experiment(cfg, "");
    EXPECT_EQ(out.final_values.j_c.size(), 2u) << mode;
    EXPECT_TRUE(out.reference.has_value()) << mode;
  }
  const RunOutcome omni = run_experiment(parse_config(kSmall, {"mode=omniscient"}), "");
  EXPECT_DOUBLE_EQ(*omni.metrics.rr, 1.0);
  EXPECT_DOUBLE_EQ(*omni.metrics.mrvr, 1.0);
}

TEST_F(ExperimentTest, NoReferenceLeavesRatiosUndefined) {
  const RunOutcome out = run_experiment(parse_config(kSmall, {"reference=false"}), "");
  EXPECT_FALSE(out.metrics.rr.has_value());
  EXPECT_FALSE(out.metrics.mrvr.has_value());
  EXPECT_TRUE(out.metrics.mvr.has_value());
}

TEST_F(ExperimentTest, WindyCliffSummaryCarriesRawScale) {
  const RunConfig cfg = parse_config(
      R"({"env": "windy-cliff", "reference": false, "federation": {"total_steps": 5}})");
  run_experiment(cfg, dir_.string());
  const json summary = json::parse(slurp(dir_ / "summary.json"));
  ASSERT_TRUE(summary.contains("raw_scale"));
  EXPECT_EQ(summary["raw_scale"]["j_c"].size(), 3u);
}

TEST_F(ExperimentTest, SweepSingleSeed) {
  const SweepOutcome out = run_sweep(kSmall, {}, {7}, dir_.string(), 1);
  EXPECT_EQ(out.failures, 0);
  ASSERT_EQ(out.rows.size(), 3u);
  EXPECT_EQ(out.rows[1].label, "mean");
  EXPECT_EQ(out.rows[2].label, "se");
  EXPECT_FALSE(out.rows[2].j_r.has_value());
  EXPECT_TRUE(fs::exists(dir_ / "seed_7" / "metrics.csv"));
  std::istringstream in(slurp(dir_ / "summary.csv"));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 4);
}

TEST_F(ExperimentTest, SweepOfRepeatedSeedHasZeroSpread) {
  // A fixed instance seed and a repeated run seed give identical runs.
  const SweepOutcome out =
      run_sweep(kSmall, {"env.instance_seed=1"}, {2, 2, 2, 2, 2}, dir_.string(), 2);
  ASSERT_EQ(out.rows.size(), 7u);
  EXPECT_EQ(*out.rows[6].j_r, 0.0);
  EXPECT_EQ(*out.rows[6].metrics.mvr, 0.0);
  EXPECT_DOUBLE_EQ(*out.rows[5].j_r, *out.rows[0].j_r);
}

TEST_F(ExperimentTest, SweepIsIndependentOfWorkerCount) {
  run_sweep(kSmall, {}, {1, 2, 3}, (dir_ / "one").string(), 1);
  run_sweep(kSmall, {}, {1, 2, 3}, (dir_ / "three").string(), 3);
  EXPECT_EQ(slurp(dir_ / "one" / "summary.csv"), slurp(dir_ / "three" / "summary.csv"));
  EXPECT_EQ(slurp(dir_ / "one" / "seed_2" / "metrics.csv"),
            slurp(dir_ / "three" / "seed_2" / "metrics.csv"));
}

TEST_F(ExperimentTest, SweepRejectsBadInputUpFront) {
  EXPECT_THROW(run_sweep(R"({"env": {"name": "file", "path": 1}})", {}, {1}, dir_.string(), 1),
               ValidationError);
  EXPECT_THROW(run_sweep(kSmall, {}, {}, dir_.string(), 1), ValidationError);
  EXPECT_FALSE(fs::exists(dir_));
}

TEST_F(ExperimentTest, GenerateEnvironmentFiles) {
  fs::create_directories(dir_);
  generate_env("random-mdp", 5, (dir_ / "r.json").string());
  const TabularCmdp a = load_cmdp((dir_ / "r.json").string());
  EXPECT_EQ(a.n_states, 3);
  EXPECT_EQ(a.n_constraints(), 4);
  generate_env("windy-cliff", 0, (dir_ / "w.json").string());
  EXPECT_EQ(load_cmdp((dir_ / "w.json").string()).n_constraints(), 3);
  EXPECT_THROW(generate_env("cartpole-c", 0, (dir_ / "c.json").string()), ValidationError);

  // A generated file trains through the file environment.
  const RunConfig cfg = parse_config(
      json{{"env", {{"name", "file"}, {"path", (dir_ / "r.json").string()}}},
           {"federation", {{"total_steps", 3}}}}
          .dump());
  EXPECT_EQ(run_experiment(cfg, "").final_values.j_c.size(), 4u);
}

}  // namespace
}  // namespace fedcrl
