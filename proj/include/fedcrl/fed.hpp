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

#ifndef FEDCRL_FED_HPP_
#define FEDCRL_FED_HPP_

// Federated primal-dual policy optimisation on tabular CMDPs (FedNPG) and
// its two baselines: local-only agents and a single omniscient agent.

#include <cstdint>
#include <optional>
#include <vector>

#include "fedcrl/cmdp.hpp"
#include "fedcrl/npg.hpp"
#include "fedcrl/policy.hpp"

namespace fedcrl {

enum class Estimator {
  kSample,  // compatible-function SGD and rollout estimates
  kExact,   // exact advantages and exact cost values (oracle mode)
};

struct FederationConfig {
  int n_agents = 4;
  int local_steps = 5;     // E
  int total_steps = 20000; // T
  double lr_theta = 1e-3;
  double lr_lambda = 1e-3;
  double lambda_max = 10.0;
  ThetaProjection theta_projection;
  CompatSgdConfig compat;
  // Gamma_i per agent; empty means Gamma_i = {i}.
  std::vector<std::vector<int>> constraint_assignment;
  std::uint64_t seed = 0;
  Estimator estimator = Estimator::kSample;
  bool freeze_lambda = false;
  bool uniform_iterate = false;
  int threads = 1;
  // Per-agent rows are kept every `log_every` iterations, aggregated rows for
  // every round that crosses a multiple of it. The last iteration is always kept.
  int log_every = 1;

  std::vector<int> assignment(int agent) const;
  // n_constraints is the number of cost functions of the target CMDP.
  void validate(int n_constraints) const;
};

// The slice of a CMDP an agent is allowed to see: the shared dynamics and
// reward plus the costs listed in its assignment. Other costs are not copied.
class AgentView {
 public:
  AgentView(const TabularCmdp& full, std::vector<int> assigned);

  const TabularCmdp& cmdp() const { return local_; }
  const std::vector<int>& assigned() const { return assigned_; }
  // Local signal for a global constraint index; throws ConstraintAccessError
  // for constraints outside the assignment.
  Signal cost_signal(int global_index) const;
  double threshold(int global_index) const;

 private:
  int local_index(int global_index) const;

  TabularCmdp local_;
  std::vector<int> assigned_;
};

struct AgentState {
  SoftmaxParams theta;
  std::vector<double> lambdas;  // one per assigned constraint, in view order
  Rng rng;
  long truncations = 0;
};

// Independent stream for (seed, slot).
Rng agent_rng(std::uint64_t seed, int slot);

// clamp(lambda - lr (threshold - j_hat), [0, lambda_max]).
double dual_update(double lambda, double threshold, double j_hat, double lr, double lambda_max);

// Reward and cost direction estimates plus cost-value estimates at rho.
NpgEstimate estimate_local(const AgentView& view, const PolicyTable& policy,
                           const FederationConfig& cfg, Rng& rng);

// One primal-dual step on the agent's local Lagrangian
// J_r / reward_share + sum_j lambda_j (d_j - J_{c_j}).
AgentState local_step_fednpg(const AgentView& view, AgentState agent,
                             const FederationConfig& cfg, int reward_share);

struct RoundLog {
  int iteration = 0;
  int agent = -1;  // -1 for the aggregated policy
  double j_r = 0.0;
  std::vector<double> j_c;
  std::vector<double> lambdas;  // global constraint order
  bool aggregated = false;
  long truncations = 0;
};

struct TrainResult {
  SoftmaxParams final_params;
  std::optional<SoftmaxParams> uniform_iterate;
  std::vector<RoundLog> logs;
  std::vector<double> final_lambdas;  // global constraint order
  long truncations = 0;
};

TrainResult run_fednpg(const TabularCmdp& cmdp, const FederationConfig& cfg);
// NPG_k: one agent that only sees constraint k, no communication.
TrainResult run_baseline_local(const TabularCmdp& cmdp, int k, const FederationConfig& cfg);
// NPG_o: one agent with all constraints and all multipliers.
TrainResult run_baseline_omniscient(const TabularCmdp& cmdp, const FederationConfig& cfg);

struct LagrangianValue {
  double l0 = 0.0;
  std::vector<double> local;  // L_i = J_r / N + lambda_i (d_i - J_{c_i})
};

LagrangianValue lagrangian_value(const TabularCmdp& cmdp, const SoftmaxParams& params,
                                 std::span<const double> lambdas);

}  // namespace fedcrl

#endif  // FEDCRL_FED_HPP_
