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


#include "fedcrl/nn.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

namespace fedcrl {
namespace {

TEST(FeedforwardNet, ForwardMatchesHandComputation) {
  FeedforwardNet net = FeedforwardNet::zeros({2, 2, 1});
  net.weight(0) << 1.0, -1.0, 0.5, 2.0;
  net.bias(0) << 0.1, -0.2;
  net.weight(1) << 3.0, -1.0;
  net.bias(1) << 0.25;
  const std::vector<double> x = {0.3, -0.4};
  const double h0 = std::tanh(1.0 * 0.3 - 1.0 * -0.4 + 0.1);
  const double h1 = std::tanh(0.5 * 0.3 + 2.0 * -0.4 - 0.2);
  EXPECT_NEAR(net.forward(x)(0), 3.0 * h0 - h1 + 0.25, 1e-15);

  Matrix batch(2, 2);
  batch << 0.3, 1.0, -0.4, 2.0;
  const Matrix out = net.forward_batch(batch);
  EXPECT_NEAR(out(0, 0), net.forward(x)(0), 1e-15);
  EXPECT_NEAR(out(0, 1), net.forward(std::vector<double>{1.0, 2.0})(0), 1e-15);
}

TEST(FeedforwardNet, BackwardMatchesFiniteDifferences) {
  Rng rng(1);
  FeedforwardNet net({3, 5, 4, 2}, rng);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix inputs(3, 7);
  Matrix weights(2, 7);
  for (int i = 0; i < inputs.size(); ++i) inputs.data()[i] = n(rng);
  for (int i = 0; i < weights.size(); ++i) weights.data()[i] = n(rng);
  FeedforwardNet::Cache cache;
  net.forward_batch(inputs, cache);
  const Vector analytic = net.backward(cache, weights);
  const Vector base = net.flat();
  ASSERT_EQ(static_cast<std::size_t>(base.size()), net.n_params());
  for (int i = 0; i < base.size(); ++i) {
    FeedforwardNet up = net;
    FeedforwardNet down = net;
    Vector p = base;
    p(i) += 1e-6;
    up.set_flat(p);
    p(i) -= 2e-6;
    down.set_flat(p);
    const double fd = ((up.forward_batch(inputs).array() * weights.array()).sum() -
                       (down.forward_batch(inputs).array() * weights.array()).sum()) /
                      2e-6;
    EXPECT_NEAR(analytic(i), fd, 1e-7 * std::max(1.0, std::abs(fd)));
  }
}

TEST(FeedforwardNet, FlatLayoutAndJsonRoundTrip) {
  Rng rng(2);
  const FeedforwardNet net({4, 8, 2}, rng, 0.01);
  EXPECT_EQ(net.n_params(), 4u * 8 + 8 + 8 * 2 + 2);
  FeedforwardNet copy = FeedforwardNet::zeros({4, 8, 2});
  copy.set_flat(net.flat());
  EXPECT_EQ(copy.flat(), net.flat());
  const FeedforwardNet back = FeedforwardNet::from_json(net.to_json());
  EXPECT_EQ(back.flat(), net.flat());
  EXPECT_EQ(back.sizes(), net.sizes());
  // W0 comes first, column-major.
  EXPECT_EQ(net.flat()(1), net.weight(0)(1, 0));
}

TEST(FeedforwardNet, InitialisationRanges) {
  Rng rng(3);
  const FeedforwardNet net({4, 64, 2}, rng, 0.01);
  EXPECT_LE(net.weight(0).cwiseAbs().maxCoeff(), 0.5);
  EXPECT_LE(net.weight(1).cwiseAbs().maxCoeff(), 0.01 / 8.0);
  EXPECT_EQ(net.bias(0), Vector::Zero(64));
}

TEST(Optimizers, SgdAndFirstAdamStep) {
  FeedforwardNet net = FeedforwardNet::zeros({1, 1});
  Vector grad(2);
  grad << 2.0, -0.5;
  Adam adam;
  apply_gradient(net, grad, 0.1, OptimizerKind::kSgd, adam);
  EXPECT_NEAR(net.flat()(0), -0.2, 1e-15);
  EXPECT_NEAR(net.flat()(1), 0.05, 1e-15);

  Adam fresh;
  const Vector step = fresh.step(grad, 0.01);
  // Bias-corrected first step is lr * g / (|g| + eps).
  EXPECT_NEAR(step(0), 0.01, 1e-9);
  EXPECT_NEAR(step(1), -0.01, 1e-9);
  EXPECT_EQ(fresh.t, 1);
}

}  // namespace
}  // namespace fedcrl
