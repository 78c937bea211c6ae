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

#ifndef FEDCRL_POLICY_HPP_
#define FEDCRL_POLICY_HPP_

#include <span>
#include <string>
#include <vector>

#include "fedcrl/cmdp.hpp"

namespace fedcrl {

// Tabular softmax logits theta(s, a).
struct SoftmaxParams {
  RowMatrix theta;

  static SoftmaxParams zeros(int n_states, int n_actions) {
    return {RowMatrix::Zero(n_states, n_actions)};
  }
  int n_states() const { return static_cast<int>(theta.rows()); }
  int n_actions() const { return static_cast<int>(theta.cols()); }
  friend bool operator==(const SoftmaxParams& a, const SoftmaxParams& b) {
    return a.theta.rows() == b.theta.rows() && a.theta.cols() == b.theta.cols() &&
           a.theta == b.theta;
  }
};

struct ThetaProjection {
  enum class Mode { kIdentity, kBox };
  Mode mode = Mode::kIdentity;
  double box_halfwidth = 0.0;

  static ThetaProjection identity() { return {}; }
  static ThetaProjection box(double halfwidth) { return {Mode::kBox, halfwidth}; }
};

// Softmax of theta(s, .), max-subtracted.
Vector action_probs(const SoftmaxParams& params, int s);
PolicyTable to_policy(const SoftmaxParams& params);

// Gradient of log pi(a|s) w.r.t. the whole table. Only row s is nonzero:
// d/dtheta(s, a') = 1{a' = a} - pi(a'|s).
RowMatrix log_prob_grad(const SoftmaxParams& params, int s, int a);

// Same gradient written into `row` (length |A|), given pi(.|s).
void score_row(std::span<const double> probs, int a, std::span<double> row);

// Policy-level averaging: pi_bar = mean_i pi_i, theta(s, a) = log pi_bar(a|s) + C_s
// with C_s = sum_a log pi_bar(a|s). pi_bar is floored at 1e-12 before the log.
SoftmaxParams aggregate_softmax(std::span<const SoftmaxParams> params_list);

// Elementwise mean of flat parameter vectors.
Vector aggregate_params_mean(std::span<const Vector> params_list);

SoftmaxParams project_theta(const SoftmaxParams& params, const ThetaProjection& proj);

// Checkpoint format: {"n_states", "n_actions", "theta": {"0": [...], ...}}.
std::string softmax_to_json(const SoftmaxParams& params);
SoftmaxParams softmax_from_json(const std::string& text);

}  // namespace fedcrl

#endif  // FEDCRL_POLICY_HPP_
