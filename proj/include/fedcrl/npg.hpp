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

#ifndef FEDCRL_NPG_HPP_
#define FEDCRL_NPG_HPP_

// Natural policy gradient for tabular softmax policies: the closed-form
// direction, the transferred compatible function approximation error, and
// the sample-based SGD estimate of its minimiser.

#include <vector>

#include "fedcrl/cmdp.hpp"
#include "fedcrl/policy.hpp"

namespace fedcrl {

struct CompatSgdConfig {
  int n_samples = 10;       // K
  double step_size = 0.125; // alpha = 1 / (4 L^2) with L = sqrt(2)

  void validate() const;
};

// Per-step estimates of one agent: one entry per assigned constraint.
struct NpgEstimate {
  RowMatrix w_reward;
  std::vector<RowMatrix> w_costs;
  std::vector<double> v_costs_rho;
  long truncations = 0;
};

// Exact minimiser of the compatible approximation error: the advantage table
// A(s, a) itself (softmax scores span the per-state centred tables).
RowMatrix exact_compatible_weights(const TabularCmdp& cmdp, const SoftmaxParams& params,
                                   Signal signal);

// Closed-form softmax natural gradient F^+ grad J, up to the null space of F
// (per-state constant shifts): A(s, a) / (1 - gamma).
RowMatrix exact_npg_direction(const TabularCmdp& cmdp, const SoftmaxParams& params,
                              Signal signal);

// E_{(s,a)~nu} (A(s,a) - w . grad log pi(a|s))^2, computed exactly.
double compat_error(const TabularCmdp& cmdp, const SoftmaxParams& params, Signal signal,
                    const RowMatrix& w);

// Stochastic gradient of the squared compatible error at one sample:
// 2 (w . score - advantage) score.
RowMatrix compat_gradient(const RowMatrix& w, const RowMatrix& score, double advantage);

struct SgdResult {
  RowMatrix w;  // average of the K post-update iterates
  long truncations = 0;
};

SgdResult sgd_compatible(const TabularCmdp& cmdp, const PolicyTable& policy, Signal signal,
                         const CompatSgdConfig& cfg, Rng& rng);
SgdResult sgd_compatible(const TabularCmdp& cmdp, const SoftmaxParams& params, Signal signal,
                         const CompatSgdConfig& cfg, Rng& rng);

struct ValueEstimate {
  double value = 0.0;
  long truncations = 0;
};

// Mean of K geometric-horizon rollout sums started from s ~ rho.
ValueEstimate estimate_value_rho(const TabularCmdp& cmdp, const PolicyTable& policy,
                                 Signal signal, int k_samples, Rng& rng);
ValueEstimate estimate_value_rho(const TabularCmdp& cmdp, const SoftmaxParams& params,
                                 Signal signal, int k_samples, Rng& rng);

// (1 / N) w_reward - lambda w_cost.
RowMatrix local_direction(const RowMatrix& w_reward, const RowMatrix& w_cost, double lambda,
                          int n_agents);

}  // namespace fedcrl

#endif  // FEDCRL_NPG_HPP_
