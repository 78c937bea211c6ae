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


#include "fedcrl/fed.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fedcrl/envs.hpp"
#include "fedcrl/errors.hpp"
#include "support.hpp"

namespace fedcrl {
namespace {

using testing::random_params;

FederationConfig small_config(int steps) {
  FederationConfig cfg;
  cfg.total_steps = steps;
  cfg.seed = 11;
  return cfg;
}

TEST(DualUpdate, SignAndProjection) {
  // Violated (estimate above threshold): the multiplier grows.
  EXPECT_NEAR(dual_update(0.5, 1.0, 3.0, 0.1, 10.0), 0.7, 1e-15);
  // Satisfied: it shrinks, and is clipped at zero.
  EXPECT_NEAR(dual_update(0.5, 3.0, 1.0, 0.1, 10.0), 0.3, 1e-15);
  EXPECT_EQ(dual_update(0.05, 3.0, 1.0, 0.1, 10.0), 0.0);
  EXPECT_EQ(dual_update(9.95, 1.0, 3.0, 0.1, 10.0), 10.0);
}

TEST(LagrangianValue, DecomposesIntoLocalTerms) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<TabularCmdp> instances;
  for (int i = 0; i < 5; ++i) instances.push_back(random_mdp(i));
  for (int draw = 0; draw < 100; ++draw) {
    const TabularCmdp& m = instances[draw % 5];
    const SoftmaxParams p = random_params(3, 5, 1000 + draw, 2.0);
    std::vector<double> lambdas(4);
    for (double& l : lambdas) l = u(rng);
    const LagrangianValue v = lagrangian_value(m, p, lambdas);
    double sum = 0.0;
    for (double l : v.local) sum += l;
    EXPECT_LE(std::abs(v.l0 - sum), 1e-10);
  }
}

TEST(AgentView, CopiesOnlyAssignedCosts) {
  const TabularCmdp m = random_mdp(0);
  const AgentView view(m, {2});
  ASSERT_EQ(view.cmdp().n_constraints(), 1);
  EXPECT_EQ(view.cmdp().costs[0], m.costs[2]);
  EXPECT_EQ(view.threshold(2), m.thresholds[2]);
  EXPECT_EQ(view.cost_signal(2), Signal::cost(0));
  EXPECT_THROW(view.cost_signal(0), ConstraintAccessError);
  EXPECT_THROW(view.threshold(3), ConstraintAccessError);
}

TEST(AgentView, UnassignedCostsCannotInfluenceALocalAgent) {
  const TabularCmdp m = random_mdp(1);
  TabularCmdp canary = m;
  for (int j = 1; j < 4; ++j) {
    canary.costs[j].setConstant(1.0);
    canary.thresholds[j] = 0.123;
  }
  const FederationConfig cfg = small_config(40);
  const TrainResult a = run_baseline_local(m, 0, cfg);
  const TrainResult b = run_baseline_local(canary, 0, cfg);
  EXPECT_EQ(a.final_params, b.final_params);
  EXPECT_EQ(a.final_lambdas[0], b.final_lambdas[0]);
}

// Replays one FedNPG local step from the documented order of random draws:
// reward SGD, then for each assigned cost its SGD and its value estimate.
TEST(LocalStep, MatchesScriptedReplay) {
  const TabularCmdp m = random_mdp(2);
  FederationConfig cfg = small_config(1);
  const SoftmaxParams theta = random_params(3, 5, 3, 0.5);
  const std::vector<double> lambdas = {0.7};
  const AgentView view(m, {1});

  AgentState agent{theta, lambdas, agent_rng(cfg.seed, 1)};
  const AgentState stepped = local_step_fednpg(view, agent, cfg, 4);

  Rng rng = agent_rng(cfg.seed, 1);
  const PolicyTable pi = to_policy(theta);
  const RowMatrix w_r = sgd_compatible(view.cmdp(), pi, Signal::reward(), cfg.compat, rng).w;
  const RowMatrix w_c = sgd_compatible(view.cmdp(), pi, Signal::cost(0), cfg.compat, rng).w;
  const double v_c =
      estimate_value_rho(view.cmdp(), pi, Signal::cost(0), cfg.compat.n_samples, rng).value;
  const RowMatrix expected_theta = theta.theta + cfg.lr_theta * (w_r / 4.0 - 0.7 * w_c);
  const double clipped_v = std::clamp(v_c, 0.0, 1.0 / (1.0 - m.discount));
  const double expected_lambda =
      std::clamp(0.7 - cfg.lr_lambda * (m.thresholds[1] - clipped_v), 0.0, cfg.lambda_max);

  EXPECT_LT((stepped.theta.theta - expected_theta).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(stepped.lambdas[0], expected_lambda, 1e-15);
}

TEST(RunFedNpg, FirstRoundAggregatesReplayedAgents) {
  const TabularCmdp m = random_mdp(3);
  FederationConfig cfg = small_config(1);
  cfg.local_steps = 1;
  const TrainResult r = run_fednpg(m, cfg);

  std::vector<SoftmaxParams> locals;
  for (int i = 0; i < 4; ++i) {
    const AgentView view(m, {i});
    AgentState a{SoftmaxParams::zeros(3, 5), {0.0}, agent_rng(cfg.seed, i)};
    locals.push_back(local_step_fednpg(view, a, cfg, 4).theta);
  }
  EXPECT_EQ(r.final_params, aggregate_softmax(locals));
}

TEST(RunFedNpg, DeterministicAndThreadCountInvariant) {
  const TabularCmdp m = random_mdp(4);
  FederationConfig cfg = small_config(60);
  cfg.log_every = 1;
  const TrainResult a = run_fednpg(m, cfg);
  const TrainResult b = run_fednpg(m, cfg);
  cfg.threads = 3;
  const TrainResult c = run_fednpg(m, cfg);
  for (const TrainResult* other : {&b, &c}) {
    EXPECT_EQ(a.final_params, other->final_params);
    EXPECT_EQ(a.final_lambdas, other->final_lambdas);
    ASSERT_EQ(a.logs.size(), other->logs.size());
    for (std::size_t i = 0; i < a.logs.size(); ++i) {
      EXPECT_EQ(a.logs[i].j_r, other->logs[i].j_r);
      EXPECT_EQ(a.logs[i].lambdas, other->logs[i].lambdas);
    }
  }
}

TEST(RunFedNpg, SingleAgentWithAllConstraintsIsTheOmniscientAgent) {
  const TabularCmdp m = random_mdp(5);
  FederationConfig cfg = small_config(30);
  const TrainResult omni = run_baseline_omniscient(m, cfg);
  cfg.n_agents = 1;
  cfg.constraint_assignment = {{0, 1, 2, 3}};
  const TrainResult fed = run_fednpg(m, cfg);
  EXPECT_EQ(fed.final_params, omni.final_params);
  EXPECT_EQ(fed.final_lambdas, omni.final_lambdas);
}

TEST(RunFedNpg, LogThinningKeepsMultiplesAndTheLastStep) {
  const TabularCmdp m = random_mdp(6);
  FederationConfig cfg = small_config(23);
  cfg.log_every = 10;
  const TrainResult r = run_fednpg(m, cfg);
  std::vector<int> agent_iters;
  std::vector<int> agg_iters;
  for (const RoundLog& row : r.logs) {
    (row.aggregated ? agg_iters : agent_iters).push_back(row.iteration);
    EXPECT_EQ(row.j_c.size(), 4u);
    EXPECT_EQ(row.lambdas.size(), 4u);
  }
  agent_iters.erase(std::unique(agent_iters.begin(), agent_iters.end()), agent_iters.end());
  EXPECT_EQ(agent_iters, (std::vector<int>{10, 20, 23}));
  // Rounds end at 5, 10, 15, 20, 23; those crossing a multiple of 10 and the last.
  EXPECT_EQ(agg_iters, (std::vector<int>{10, 20, 23}));
}

TEST(RunFedNpg, ZeroStepsProducesNoRows) {
  const TrainResult r = run_fednpg(random_mdp(0), small_config(0));
  EXPECT_TRUE(r.logs.empty());
  EXPECT_EQ(r.final_params, SoftmaxParams::zeros(3, 5));
}

TEST(RunFedNpg, UniformIterateIsOneOfTheRoundPolicies) {
  const TabularCmdp m = random_mdp(7);
  FederationConfig cfg = small_config(20);
  cfg.uniform_iterate = true;
  const TrainResult r = run_fednpg(m, cfg);
  ASSERT_TRUE(r.uniform_iterate.has_value());
  EXPECT_EQ(r.uniform_iterate->n_states(), 3);
}

TEST(FederationConfig, RejectsBadAssignments) {
  FederationConfig cfg;
  cfg.n_agents = 2;
  cfg.constraint_assignment = {{0}, {7}};
  try {
    cfg.validate(4);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "federation.constraint_assignment[1]");
  }
  cfg.constraint_assignment = {{0}};
  EXPECT_THROW(cfg.validate(4), ValidationError);
  cfg.constraint_assignment.clear();
  cfg.lr_theta = 0.0;
  EXPECT_THROW(cfg.validate(4), ValidationError);
}

TEST(ExactEstimator, UnconstrainedRunApproachesTheOptimum) {
  const TabularCmdp m = random_mdp(0);
  FederationConfig cfg = small_config(5000);
  cfg.n_agents = 1;
  cfg.constraint_assignment = {{0}};
  cfg.freeze_lambda = true;
  cfg.estimator = Estimator::kExact;
  // The exact direction tolerates a larger step; 1e-3 stalls near 0.9.
  cfg.lr_theta = 1e-2;
  cfg.log_every = 5000;
  const TrainResult r = run_fednpg(m, cfg);
  const double j = testing::iterate_j(m, to_policy(r.final_params).probs, m.reward);
  EXPECT_GE(j, 0.95 * testing::optimal_reward_value(m));
  EXPECT_EQ(r.final_lambdas[0], 0.0);
}

}  // namespace
}  // namespace fedcrl
