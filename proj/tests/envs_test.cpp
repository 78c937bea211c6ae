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


#include "fedcrl/envs.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fedcrl/errors.hpp"
#include "support.hpp"

namespace fedcrl {
namespace {

void expect_stochastic(const TabularCmdp& m) {
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < m.n_states; ++s2) {
        EXPECT_GE(m.P(s, a, s2), 0.0);
        sum += m.P(s, a, s2);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(RandomMdp, ShapeAndRanges) {
  const TabularCmdp m = random_mdp(0);
  EXPECT_EQ(m.n_states, 3);
  EXPECT_EQ(m.n_actions, 5);
  EXPECT_EQ(m.n_constraints(), 4);
  expect_stochastic(m);
  EXPECT_GE(m.reward.minCoeff(), 0.0);
  EXPECT_LE(m.reward.maxCoeff(), 1.0);
  EXPECT_NEAR(m.initial_dist.sum(), 1.0, 1e-12);
  EXPECT_NO_THROW(m.validate());
}

TEST(RandomMdp, ThresholdsAreScaledAnchorCosts) {
  RandomMdpParams p;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto [m, anchor] = random_mdp_draw(seed, 0, p);
    for (int i = 0; i < 4; ++i) {
      const double anchor_cost = testing::iterate_j(m, anchor.probs, m.costs[i]);
      EXPECT_NEAR(m.thresholds[i], 0.7 * anchor_cost, 1e-10);
      EXPECT_LT(m.thresholds[i], anchor_cost);
    }
  }
}

TEST(RandomMdp, SeededAndScreened) {
  EXPECT_EQ(cmdp_to_json(random_mdp(3)), cmdp_to_json(random_mdp(3)));
  EXPECT_NE(cmdp_to_json(random_mdp(3)), cmdp_to_json(random_mdp(4)));
  // Accepted instances are feasible for the omniscient solver up to 1%.
  EXPECT_LE(feasibility_gap(random_mdp(1)), 0.01);
}

TEST(WindyCliff, LayoutAndSignals) {
  const GridSpec spec = GridSpec::windy_cliff();
  const TabularCmdp m = windycliff(spec);
  EXPECT_EQ(m.n_states, 40);
  EXPECT_EQ(m.n_actions, 4);
  EXPECT_EQ(m.n_constraints(), 3);
  expect_stochastic(m);
  const SignalScale scale = windycliff_scale();
  for (double d : m.thresholds) EXPECT_NEAR(d * scale.cost_scale, 1.5, 1e-12);
  EXPECT_EQ(m.initial_dist(spec.state(spec.start)), 1.0);

  // The goal is absorbing and silent.
  const int goal = spec.state(spec.goal);
  for (int a = 0; a < 4; ++a) {
    EXPECT_EQ(m.P(goal, a, goal), 1.0);
    EXPECT_EQ(m.reward(goal, a), 0.0);
  }
  const auto [r_goal, c_goal] = windycliff_raw_signals(spec, spec.goal);
  EXPECT_EQ(r_goal, 20.0);
  const auto [r_zone, c_zone] = windycliff_raw_signals(spec, {3, 5});
  EXPECT_EQ(r_zone, -1.0);
  EXPECT_EQ(c_zone, (std::vector<double>{0.0, 10.0, 0.0}));
}

TEST(WindyCliff, WindFrequencyMatchesProbability) {
  const GridSpec spec = GridSpec::windy_cliff(0.4);
  const TabularCmdp m = windycliff(spec);
  // From (1, 4) moving right: (1, 5) without wind, (2, 5) with it.
  const int s = spec.state({1, 4});
  EXPECT_NEAR(m.P(s, kRight, spec.state({1, 5})), 0.6, 1e-15);
  EXPECT_NEAR(m.P(s, kRight, spec.state({2, 5})), 0.4, 1e-15);

  Rng rng(5);
  const int n = 50000;
  int blown = 0;
  for (int i = 0; i < n; ++i) {
    if (sample_next_state(m, s, kRight, rng) == spec.state({2, 5})) ++blown;
  }
  const double freq = static_cast<double>(blown) / n;
  EXPECT_NEAR(freq, 0.4, 3.0 * std::sqrt(0.4 * 0.6 / n));
}

TEST(WindyCliff, WallsAndBottomRowKeepPosition) {
  const GridSpec spec = GridSpec::windy_cliff(0.4);
  const TabularCmdp m = windycliff(spec);
  // At the bottom row the wind has nowhere to push.
  const int s = spec.state({3, 0});
  EXPECT_EQ(m.P(s, kLeft, s), 1.0);
  EXPECT_EQ(m.P(s, kDown, s), 1.0);
}

TEST(WindyCliff, RejectsBadSpecs) {
  GridSpec spec = GridSpec::windy_cliff();
  spec.wind_prob = 1.5;
  EXPECT_THROW(windycliff(spec), ValidationError);
  spec = GridSpec::windy_cliff();
  spec.zones.push_back({spec.goal});
  EXPECT_THROW(windycliff(spec), ValidationError);
}

TEST(CartPole, ZoneCostsArePureFunctionsOfPosition) {
  using CP = CartPoleConstrained;
  EXPECT_EQ(CP::zone_costs(-0.05), (std::array<double, 2>{1.0, 0.0}));
  EXPECT_EQ(CP::zone_costs(0.05), (std::array<double, 2>{0.0, 1.0}));
  EXPECT_EQ(CP::zone_costs(0.5), (std::array<double, 2>{0.0, 0.0}));
  EXPECT_EQ(CP::zone_costs(1.15), (std::array<double, 2>{1.0, 0.0}));
  EXPECT_EQ(CP::zone_costs(-1.15), (std::array<double, 2>{0.0, 1.0}));
  EXPECT_EQ(CP::zone_costs(1.15), CP::zone_costs(1.15));
}

TEST(CartPole, EpisodesTerminateAndStayFinite) {
  CartPoleConstrained env;
  Rng rng(3);
  std::bernoulli_distribution coin(0.5);
  for (int episode = 0; episode < 20; ++episode) {
    env.reset(rng);
    int steps = 0;
    while (!env.done()) {
      const StepResult r = env.step(coin(rng) ? 1 : 0);
      ++steps;
      EXPECT_EQ(r.reward, 1.0);
      EXPECT_EQ(r.costs.size(), 2u);
      for (double v : r.observation) ASSERT_TRUE(std::isfinite(v));
    }
    EXPECT_LE(steps, CartPoleConstrained::kMaxSteps);
  }
  EXPECT_THROW(env.step(0), std::logic_error);
}

TEST(CartPole, BalancedPoleRunsTheFullEpisode) {
  // Pushing toward the side the pole falls to keeps it up for the whole episode.
  CartPoleConstrained env;
  Rng rng(0);
  env.reset(rng);
  env.set_state({0.5, 0.0, 0.0, 0.0});
  std::vector<double> obs = {0.5, 0.0, 0.0, 0.0};
  int steps = 0;
  while (!env.done() && steps < 1000) {
    obs = env.step(obs[2] + 0.5 * obs[3] > 0.0 ? 1 : 0).observation;
    ++steps;
  }
  EXPECT_EQ(steps, CartPoleConstrained::kMaxSteps);
}

TEST(CartPole, BudgetsAndShape) {
  const auto env = cartpole_constrained();
  EXPECT_EQ(env->observation_dim(), 4);
  EXPECT_EQ(env->n_actions(), 2);
  EXPECT_EQ(env->budgets(), (std::vector<double>{20.0, 20.0}));
}

}  // namespace
}  // namespace fedcrl
