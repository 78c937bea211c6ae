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


#include "fedcrl/policy.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

namespace fedcrl {
namespace {

using testing::naive_softmax;
using testing::random_params;

TEST(ActionProbs, MatchesDirectSoftmax) {
  const SoftmaxParams p = random_params(4, 6, 1);
  const PolicyTable pi = to_policy(p);
  EXPECT_LT((pi.probs - naive_softmax(p)).cwiseAbs().maxCoeff(), 1e-14);
  for (int s = 0; s < 4; ++s) EXPECT_NEAR(pi.probs.row(s).sum(), 1.0, 1e-14);
}

TEST(ActionProbs, StableForLargeLogits) {
  SoftmaxParams p = SoftmaxParams::zeros(1, 3);
  p.theta << 1000.0, 999.0, -1000.0;
  const Vector probs = action_probs(p, 0);
  ASSERT_TRUE(probs.allFinite());
  EXPECT_NEAR(probs(0), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_EQ(probs(2), 0.0);
}

TEST(LogProbGrad, ClosedFormAndFiniteDifferences) {
  const SoftmaxParams p = random_params(3, 4, 2);
  const RowMatrix g = log_prob_grad(p, 1, 3);
  const RowMatrix pi = naive_softmax(p);
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 4; ++a) {
      const double expected = s == 1 ? (a == 3 ? 1.0 : 0.0) - pi(1, a) : 0.0;
      EXPECT_NEAR(g(s, a), expected, 1e-14);
      SoftmaxParams up = p;
      SoftmaxParams down = p;
      up.theta(s, a) += 1e-6;
      down.theta(s, a) -= 1e-6;
      const double fd =
          (std::log(naive_softmax(up)(1, 3)) - std::log(naive_softmax(down)(1, 3))) / 2e-6;
      EXPECT_NEAR(g(s, a), fd, 1e-8);
    }
  }
}

TEST(AggregateSoftmax, IdenticalPoliciesAreAFixedPoint) {
  const SoftmaxParams p = random_params(3, 5, 3);
  const std::vector<SoftmaxParams> same(4, p);
  const SoftmaxParams agg = aggregate_softmax(same);
  EXPECT_LT((to_policy(agg).probs - to_policy(p).probs).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(AggregateSoftmax, RepresentsThePolicyAverage) {
  const std::vector<SoftmaxParams> ps = {random_params(3, 5, 4), random_params(3, 5, 5),
                                         random_params(3, 5, 6)};
  RowMatrix mean = RowMatrix::Zero(3, 5);
  for (const auto& p : ps) mean += naive_softmax(p) / 3.0;
  const SoftmaxParams agg = aggregate_softmax(ps);
  EXPECT_LT((to_policy(agg).probs - mean).cwiseAbs().maxCoeff(), 1e-14);
  // Logits are log(mean) plus the per-state constant sum_a log(mean).
  for (int s = 0; s < 3; ++s) {
    const double c_s = mean.row(s).array().log().sum();
    for (int a = 0; a < 5; ++a) EXPECT_NEAR(agg.theta(s, a), std::log(mean(s, a)) + c_s, 1e-12);
  }
}

TEST(AggregateSoftmax, FloorsVanishingProbabilities) {
  SoftmaxParams p = SoftmaxParams::zeros(1, 2);
  p.theta << 0.0, -1e4;
  const std::vector<SoftmaxParams> ps(2, p);
  const SoftmaxParams agg = aggregate_softmax(ps);
  EXPECT_TRUE(agg.theta.allFinite());
}

TEST(AggregateParamsMean, ElementwiseMean) {
  std::vector<Vector> vs = {Vector::Constant(3, 1.0), Vector::Constant(3, 3.0)};
  EXPECT_EQ(aggregate_params_mean(vs), Vector::Constant(3, 2.0));
  vs.push_back(Vector::Zero(2));
  EXPECT_THROW(aggregate_params_mean(vs), std::invalid_argument);
}

TEST(ProjectTheta, BoxClampsAndIdentityKeeps) {
  SoftmaxParams p = SoftmaxParams::zeros(1, 3);
  p.theta << -5.0, 0.5, 7.0;
  EXPECT_EQ(project_theta(p, ThetaProjection::identity()), p);
  const SoftmaxParams q = project_theta(p, ThetaProjection::box(2.0));
  EXPECT_EQ(q.theta(0, 0), -2.0);
  EXPECT_EQ(q.theta(0, 1), 0.5);
  EXPECT_EQ(q.theta(0, 2), 2.0);
}

TEST(SoftmaxJson, RoundTripIsExact) {
  const SoftmaxParams p = random_params(3, 5, 7);
  EXPECT_EQ(softmax_from_json(softmax_to_json(p)), p);
}

}  // namespace
}  // namespace fedcrl
