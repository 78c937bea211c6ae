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
#include <cstdlib>
#include <numeric>
#include <string>

#include "fedcrl/errors.hpp"
#include "fedcrl/parallel.hpp"

namespace fedcrl {

int worker_threads_from_env() {
  const char* env = std::getenv("FEDCRL_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

std::vector<int> FederationConfig::assignment(int agent) const {
  if (constraint_assignment.empty()) return {agent};
  return constraint_assignment.at(agent);
}

void FederationConfig::validate(int n_constraints) const {
  if (n_agents < 1) throw ValidationError("federation.n_agents", "must be >= 1");
  if (local_steps < 1) throw ValidationError("federation.local_steps", "must be >= 1");
  if (total_steps < 0) throw ValidationError("federation.total_steps", "must be >= 0");
  if (log_every < 1) throw ValidationError("federation.log_every", "must be >= 1");
  if (!(lr_theta > 0.0)) throw ValidationError("federation.lr_theta", "must be > 0");
  if (!(lr_lambda > 0.0)) throw ValidationError("federation.lr_lambda", "must be > 0");
  if (!(lambda_max > 0.0)) throw ValidationError("federation.lambda_max", "must be > 0");
  if (theta_projection.mode == ThetaProjection::Mode::kBox &&
      !(theta_projection.box_halfwidth > 0.0)) {
    throw ValidationError("federation.theta_box", "box half-width must be > 0");
  }
  compat.validate();
  if (!constraint_assignment.empty() &&
      static_cast<int>(constraint_assignment.size()) != n_agents) {
    throw ValidationError("federation.constraint_assignment", "need one entry per agent");
  }
  for (int i = 0; i < n_agents; ++i) {
    for (int j : assignment(i)) {
      if (j < 0 || j >= n_constraints) {
        throw ValidationError("federation.constraint_assignment[" + std::to_string(i) + "]",
                              "constraint index " + std::to_string(j) +
                                  " out of range for a cmdp with " +
                                  std::to_string(n_constraints) + " costs");
      }
    }
  }
}

AgentView::AgentView(const TabularCmdp& full, std::vector<int> assigned)
    : assigned_(std::move(assigned)) {
  local_.n_states = full.n_states;
  local_.n_actions = full.n_actions;
  local_.transition = full.transition;
  local_.reward = full.reward;
  local_.discount = full.discount;
  local_.initial_dist = full.initial_dist;
  for (int j : assigned_) {
    local_.costs.push_back(full.costs.at(j));
    local_.thresholds.push_back(full.thresholds.at(j));
  }
}

int AgentView::local_index(int global_index) const {
  auto it = std::find(assigned_.begin(), assigned_.end(), global_index);
  if (it == assigned_.end()) {
    throw ConstraintAccessError("constraint " + std::to_string(global_index) +
                                " is not accessible to this agent");
  }
  return static_cast<int>(it - assigned_.begin());
}

Signal AgentView::cost_signal(int global_index) const {
  return Signal::cost(local_index(global_index));
}

double AgentView::threshold(int global_index) const {
  return local_.thresholds[local_index(global_index)];
}

Rng agent_rng(std::uint64_t seed, int slot) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(slot), 0x5eedu};
  return Rng(seq);
}

double dual_update(double lambda, double threshold, double j_hat, double lr, double lambda_max) {
  return std::clamp(lambda - lr * (threshold - j_hat), 0.0, lambda_max);
}

NpgEstimate estimate_local(const AgentView& view, const PolicyTable& policy,
                           const FederationConfig& cfg, Rng& rng) {
  const TabularCmdp& cmdp = view.cmdp();
  const int n_costs = cmdp.n_constraints();
  NpgEstimate est;
  est.w_costs.reserve(n_costs);
  est.v_costs_rho.reserve(n_costs);

  if (cfg.estimator == Estimator::kExact) {
    est.w_reward = q_and_advantage(cmdp, policy, Signal::reward()).a;
    for (int j = 0; j < n_costs; ++j) {
      est.w_costs.push_back(q_and_advantage(cmdp, policy, Signal::cost(j)).a);
      est.v_costs_rho.push_back(evaluate_exact(cmdp, policy, Signal::cost(j)).j);
    }
    return est;
  }

  const double v_max = 1.0 / (1.0 - cmdp.discount);
  SgdResult r = sgd_compatible(cmdp, policy, Signal::reward(), cfg.compat, rng);
  est.w_reward = std::move(r.w);
  est.truncations += r.truncations;
  for (int j = 0; j < n_costs; ++j) {
    SgdResult c = sgd_compatible(cmdp, policy, Signal::cost(j), cfg.compat, rng);
    est.w_costs.push_back(std::move(c.w));
    est.truncations += c.truncations;
    const ValueEstimate v =
        estimate_value_rho(cmdp, policy, Signal::cost(j), cfg.compat.n_samples, rng);
    est.v_costs_rho.push_back(std::clamp(v.value, 0.0, v_max));
    est.truncations += v.truncations;
  }
  return est;
}

AgentState local_step_fednpg(const AgentView& view, AgentState agent,
                             const FederationConfig& cfg, int reward_share) {
  const int n_costs = view.cmdp().n_constraints();
  if (static_cast<int>(agent.lambdas.size()) != n_costs) {
    throw std::invalid_argument("local_step_fednpg: one multiplier per assigned constraint");
  }
  const PolicyTable policy = to_policy(agent.theta);
  const NpgEstimate est = estimate_local(view, policy, cfg, agent.rng);

  RowMatrix direction = est.w_reward / static_cast<double>(reward_share);
  for (int j = 0; j < n_costs; ++j) direction -= agent.lambdas[j] * est.w_costs[j];
  agent.theta =
      project_theta({agent.theta.theta + cfg.lr_theta * direction}, cfg.theta_projection);

  if (!cfg.freeze_lambda) {
    for (int j = 0; j < n_costs; ++j) {
      agent.lambdas[j] = dual_update(agent.lambdas[j], view.cmdp().thresholds[j],
                                     est.v_costs_rho[j], cfg.lr_lambda, cfg.lambda_max);
    }
  }
  agent.truncations += est.truncations;
  return agent;
}

namespace {

struct Participant {
  int slot = 0;
  std::vector<int> assigned;
};

struct StepSnapshot {
  double j_r = 0.0;
  std::vector<double> j_c;
  std::vector<double> lambdas;  // view order
  long truncations = 0;
};

void evaluate_into(const TabularCmdp& cmdp, const SoftmaxParams& params, double& j_r,
                   std::vector<double>& j_c) {
  const std::vector<Evaluation> ev = evaluate_all(cmdp, to_policy(params));
  j_r = ev[0].j;
  j_c.resize(cmdp.n_constraints());
  for (int i = 0; i < cmdp.n_constraints(); ++i) j_c[i] = ev[1 + i].j;
}

// Shared loop for all three regimes. With `federated`, participants start each
// round from the broadcast policy and are aggregated at the round barrier.
TrainResult run_primal_dual(const TabularCmdp& cmdp, const FederationConfig& cfg,
                            const std::vector<Participant>& participants, int reward_share,
                            bool federated) {
  cmdp.validate();
  const int n = static_cast<int>(participants.size());
  const int n_global = cmdp.n_constraints();

  std::vector<AgentView> views;
  std::vector<AgentState> agents;
  for (const Participant& p : participants) {
    views.emplace_back(cmdp, p.assigned);
    agents.push_back({SoftmaxParams::zeros(cmdp.n_states, cmdp.n_actions),
                      std::vector<double>(p.assigned.size(), 0.0), agent_rng(cfg.seed, p.slot)});
  }

  TrainResult result;
  SoftmaxParams global = SoftmaxParams::zeros(cmdp.n_states, cmdp.n_actions);
  Rng iterate_rng = agent_rng(cfg.seed, -1);
  long iterate_count = 0;
  auto offer_iterate = [&](const SoftmaxParams& p) {
    if (!cfg.uniform_iterate) return;
    ++iterate_count;
    std::uniform_int_distribution<long> pick(1, iterate_count);
    if (pick(iterate_rng) == 1) result.uniform_iterate = p;
  };

  auto global_lambdas = [&](const std::vector<std::vector<double>>& per_agent) {
    std::vector<double> out(n_global, 0.0);
    std::vector<bool> seen(n_global, false);
    for (int a = 0; a < n; ++a) {
      for (std::size_t k = 0; k < participants[a].assigned.size(); ++k) {
        const int j = participants[a].assigned[k];
        if (!seen[j]) {
          out[j] = per_agent[a][k];
          seen[j] = true;
        }
      }
    }
    return out;
  };

  const int round_len = federated ? cfg.local_steps : std::max(cfg.total_steps, 1);
  auto logged = [&](int iteration) {
    return iteration % cfg.log_every == 0 || iteration == cfg.total_steps;
  };
  int t = 0;
  while (t < cfg.total_steps) {
    const int steps = std::min(round_len, cfg.total_steps - t);
    if (federated) {
      for (AgentState& a : agents) a.theta = global;
    }
    std::vector<std::vector<StepSnapshot>> snaps(n, std::vector<StepSnapshot>(steps));
    parallel_for(n, cfg.threads, [&](int a) {
      for (int e = 0; e < steps; ++e) {
        agents[a] = local_step_fednpg(views[a], std::move(agents[a]), cfg, reward_share);
        StepSnapshot& snap = snaps[a][e];
        if (!logged(t + e + 1)) continue;
        evaluate_into(cmdp, agents[a].theta, snap.j_r, snap.j_c);
        snap.lambdas = agents[a].lambdas;
        snap.truncations = agents[a].truncations;
      }
    });

    for (int e = 0; e < steps; ++e) {
      if (!federated) offer_iterate(agents.front().theta);
      if (!logged(t + e + 1)) continue;
      std::vector<std::vector<double>> lam(n);
      for (int a = 0; a < n; ++a) lam[a] = snaps[a][e].lambdas;
      const std::vector<double> lam_global = global_lambdas(lam);
      for (int a = 0; a < n; ++a) {
        RoundLog row;
        row.iteration = t + e + 1;
        row.agent = participants[a].slot;
        row.j_r = snaps[a][e].j_r;
        row.j_c = std::move(snaps[a][e].j_c);
        row.lambdas = lam_global;
        row.truncations = snaps[a][e].truncations;
        result.logs.push_back(std::move(row));
      }
    }
    t += steps;

    if (federated) {
      std::vector<SoftmaxParams> locals;
      locals.reserve(n);
      for (const AgentState& a : agents) locals.push_back(a.theta);
      // Averaging a single policy with itself is the identity; keep the
      // logits untouched so N = 1 reduces exactly to single-agent NPG.
      global = n == 1 ? locals.front() : aggregate_softmax(locals);
      offer_iterate(global);
      if (t / cfg.log_every == (t - steps) / cfg.log_every && t != cfg.total_steps) continue;
      RoundLog row;
      row.iteration = t;
      row.agent = -1;
      row.aggregated = true;
      evaluate_into(cmdp, global, row.j_r, row.j_c);
      std::vector<std::vector<double>> lam(n);
      for (int a = 0; a < n; ++a) lam[a] = agents[a].lambdas;
      row.lambdas = global_lambdas(lam);
      for (const AgentState& a : agents) row.truncations += a.truncations;
      result.logs.push_back(std::move(row));
    }
  }

  result.final_params = federated ? global : agents.front().theta;
  std::vector<std::vector<double>> lam(n);
  for (int a = 0; a < n; ++a) lam[a] = agents[a].lambdas;
  result.final_lambdas = global_lambdas(lam);
  for (const AgentState& a : agents) result.truncations += a.truncations;
  return result;
}

}  // namespace

TrainResult run_fednpg(const TabularCmdp& cmdp, const FederationConfig& cfg) {
  cfg.validate(cmdp.n_constraints());
  std::vector<Participant> participants;
  for (int i = 0; i < cfg.n_agents; ++i) participants.push_back({i, cfg.assignment(i)});
  return run_primal_dual(cmdp, cfg, participants, cfg.n_agents, /*federated=*/true);
}

TrainResult run_baseline_local(const TabularCmdp& cmdp, int k, const FederationConfig& cfg) {
  if (k < 0 || k >= cmdp.n_constraints()) {
    throw ValidationError("mode", "local agent index " + std::to_string(k) + " out of range");
  }
  FederationConfig single = cfg;
  single.n_agents = 1;
  single.constraint_assignment.clear();
  single.validate(cmdp.n_constraints());
  return run_primal_dual(cmdp, single, {{k, {k}}}, 1, /*federated=*/false);
}

TrainResult run_baseline_omniscient(const TabularCmdp& cmdp, const FederationConfig& cfg) {
  FederationConfig single = cfg;
  single.n_agents = 1;
  single.constraint_assignment.clear();
  single.validate(cmdp.n_constraints());
  std::vector<int> all(cmdp.n_constraints());
  std::iota(all.begin(), all.end(), 0);
  return run_primal_dual(cmdp, single, {{0, all}}, 1, /*federated=*/false);
}

LagrangianValue lagrangian_value(const TabularCmdp& cmdp, const SoftmaxParams& params,
                                 std::span<const double> lambdas) {
  const int n = cmdp.n_constraints();
  if (static_cast<int>(lambdas.size()) != n) {
    throw std::invalid_argument("lagrangian_value: one multiplier per constraint");
  }
  const std::vector<Evaluation> ev = evaluate_all(cmdp, to_policy(params));
  LagrangianValue out;
  out.l0 = ev[0].j;
  out.local.resize(n);
  for (int i = 0; i < n; ++i) {
    if (lambdas[i] < 0.0) throw std::invalid_argument("lagrangian_value: negative multiplier");
    const double slack = cmdp.thresholds[i] - ev[1 + i].j;
    out.l0 += lambdas[i] * slack;
    out.local[i] = ev[0].j / n + lambdas[i] * slack;
  }
  return out;
}

}  // namespace fedcrl
