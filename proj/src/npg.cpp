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

#include "fedcrl/npg.hpp"

#include <vector>

#include "fedcrl/errors.hpp"

namespace fedcrl {

void CompatSgdConfig::validate() const {
  if (n_samples < 1) throw ValidationError("federation.k_samples", "must be >= 1");
  if (!(step_size > 0.0)) throw ValidationError("federation.alpha", "must be > 0");
}

RowMatrix exact_compatible_weights(const TabularCmdp& cmdp, const SoftmaxParams& params,
                                   Signal signal) {
  return q_and_advantage(cmdp, to_policy(params), signal).a;
}

RowMatrix exact_npg_direction(const TabularCmdp& cmdp, const SoftmaxParams& params,
                              Signal signal) {
  return exact_compatible_weights(cmdp, params, signal) / (1.0 - cmdp.discount);
}

double compat_error(const TabularCmdp& cmdp, const SoftmaxParams& params, Signal signal,
                    const RowMatrix& w) {
  const PolicyTable policy = to_policy(params);
  const Matrix adv = q_and_advantage(cmdp, policy, signal).a;
  const OccupancyMeasure occ = occupancy_exact(cmdp, policy);
  double total = 0.0;
  for (int s = 0; s < cmdp.n_states; ++s) {
    // w . score(s, a) = w(s, a) - sum_b pi(b|s) w(s, b)
    const double w_mean = w.row(s).dot(policy.probs.row(s));
    for (int a = 0; a < cmdp.n_actions; ++a) {
      const double diff = adv(s, a) - (w(s, a) - w_mean);
      total += occ.state_action_dist(s, a) * diff * diff;
    }
  }
  return total;
}

RowMatrix compat_gradient(const RowMatrix& w, const RowMatrix& score, double advantage) {
  const double pred = w.cwiseProduct(score).sum();
  return 2.0 * (pred - advantage) * score;
}

SgdResult sgd_compatible(const TabularCmdp& cmdp, const PolicyTable& policy, Signal signal,
                         const CompatSgdConfig& cfg, Rng& rng) {
  const int A = cmdp.n_actions;
  RowMatrix w = RowMatrix::Zero(cmdp.n_states, A);
  RowMatrix sum = RowMatrix::Zero(cmdp.n_states, A);
  std::vector<double> score(A);
  SgdResult out;
  for (int k = 0; k < cfg.n_samples; ++k) {
    const StateAction sa = sample_occupancy_pair(cmdp, policy, rng);
    const ReturnSample q_hat = geometric_return_estimate(cmdp, policy, {sa.state, sa.action},
                                                         signal, rng);
    const ReturnSample v_hat = geometric_return_estimate(cmdp, policy, {sa.state, {}}, signal, rng);
    out.truncations += sa.truncated + q_hat.truncated + v_hat.truncated;
    const double adv = q_hat.value - v_hat.value;

    // The score is supported on row sa.state only.
    score_row(policy.row(sa.state), sa.action, score);
    double pred = 0.0;
    for (int b = 0; b < A; ++b) pred += w(sa.state, b) * score[b];
    const double scale = 2.0 * (pred - adv);
    for (int b = 0; b < A; ++b) w(sa.state, b) -= cfg.step_size * scale * score[b];
    sum += w;
  }
  out.w = sum / static_cast<double>(cfg.n_samples);
  return out;
}

SgdResult sgd_compatible(const TabularCmdp& cmdp, const SoftmaxParams& params, Signal signal,
                         const CompatSgdConfig& cfg, Rng& rng) {
  return sgd_compatible(cmdp, to_policy(params), signal, cfg, rng);
}

ValueEstimate estimate_value_rho(const TabularCmdp& cmdp, const PolicyTable& policy,
                                 Signal signal, int k_samples, Rng& rng) {
  if (k_samples < 1) throw std::invalid_argument("estimate_value_rho: K must be >= 1");
  ValueEstimate out;
  const std::span<const double> rho{cmdp.initial_dist.data(),
                                    static_cast<std::size_t>(cmdp.n_states)};
  double total = 0.0;
  for (int k = 0; k < k_samples; ++k) {
    const int s = sample_categorical(rho, rng);
    const ReturnSample r = geometric_return_estimate(cmdp, policy, {s, {}}, signal, rng);
    total += r.value;
    out.truncations += r.truncated;
  }
  out.value = total / k_samples;
  return out;
}

ValueEstimate estimate_value_rho(const TabularCmdp& cmdp, const SoftmaxParams& params,
                                 Signal signal, int k_samples, Rng& rng) {
  return estimate_value_rho(cmdp, to_policy(params), signal, k_samples, rng);
}

RowMatrix local_direction(const RowMatrix& w_reward, const RowMatrix& w_cost, double lambda,
                          int n_agents) {
  if (w_reward.rows() != w_cost.rows() || w_reward.cols() != w_cost.cols()) {
    throw std::invalid_argument("local_direction: shape mismatch");
  }
  if (n_agents < 1) throw std::invalid_argument("local_direction: n_agents must be >= 1");
  return w_reward / static_cast<double>(n_agents) - lambda * w_cost;
}

}  // namespace fedcrl
