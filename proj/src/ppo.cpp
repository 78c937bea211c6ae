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

#include "fedcrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "fedcrl/errors.hpp"
#include "fedcrl/parallel.hpp"
#include "fedcrl/policy.hpp"

namespace fedcrl {

void PpoConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw ValidationError("ppo.clip", "must lie in (0, 1)");
  if (inner_iters < 1) throw ValidationError("ppo.inner_iters", "must be >= 1");
  if (horizon < 1) throw ValidationError("ppo.horizon", "must be >= 1");
  if (!(discount >= 0.0 && discount <= 1.0)) {
    throw ValidationError("ppo.discount", "must lie in [0, 1]");
  }
  if (!(cost_discount >= 0.0 && cost_discount <= 1.0)) {
    throw ValidationError("ppo.cost_discount", "must lie in [0, 1]");
  }
  if (!(lr_reward_critic > 0.0)) throw ValidationError("ppo.lr_phi", "must be > 0");
  if (!(lr_cost_critic > 0.0)) throw ValidationError("ppo.lr_psi", "must be > 0");
  if (hidden.empty()) throw ValidationError("ppo.hidden", "needs at least one layer");
  for (int h : hidden) {
    if (h < 1) throw ValidationError("ppo.hidden", "layer sizes must be >= 1");
  }
  if (eval_episodes < 0) throw ValidationError("ppo.eval_episodes", "must be >= 0");
  if (final_eval_episodes < 1) throw ValidationError("ppo.final_eval_episodes", "must be >= 1");
}

double clip_surrogate(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage,
                  std::max((1.0 - clip) * advantage, (1.0 + clip) * advantage));
}

double clip_surrogate_slope(double ratio, double advantage, double clip) {
  if (advantage > 0.0) return ratio < 1.0 + clip ? advantage : 0.0;
  if (advantage < 0.0) return ratio > 1.0 - clip ? advantage : 0.0;
  return 0.0;
}

std::vector<double> returns_to_go(std::span<const double> signals, std::span<const char> starts,
                                  double discount, double tail_value) {
  if (signals.size() != starts.size()) {
    throw std::invalid_argument("returns_to_go: signals and flags differ in length");
  }
  const std::size_t n = signals.size();
  std::vector<double> out(n);
  double next = tail_value;
  for (std::size_t l = n; l-- > 0;) {
    // The step after l opens a new episode, so nothing flows back across it.
    if (l + 1 < n && starts[l + 1]) next = 0.0;
    out[l] = signals[l] + discount * next;
    next = out[l];
  }
  return out;
}

double episode_avg_cost(std::span<const double> cost_to_go, std::span<const char> starts) {
  if (cost_to_go.size() != starts.size()) {
    throw std::invalid_argument("episode_avg_cost: lengths differ");
  }
  double sum = 0.0;
  int count = 0;
  for (std::size_t l = 0; l < starts.size(); ++l) {
    if (starts[l]) {
      sum += cost_to_go[l];
      ++count;
    }
  }
  if (count == 0) throw Error("malformed batch: no episode start flags");
  return sum / count;
}

// ----------------------------------------------------------- EpisodeMonitor

EpisodeMonitor::EpisodeMonitor(int n_costs, int window)
    : window_(window), cost_sums_(n_costs, 0.0) {}

void EpisodeMonitor::record_step(double reward, std::span<const double> costs) {
  reward_sum_ += reward;
  for (std::size_t i = 0; i < cost_sums_.size(); ++i) cost_sums_[i] += costs[i];
}

void EpisodeMonitor::end_episode() {
  rewards_.push_back(reward_sum_);
  costs_.push_back(cost_sums_);
  if (static_cast<int>(rewards_.size()) > window_) {
    rewards_.pop_front();
    costs_.pop_front();
  }
  reward_sum_ = 0.0;
  std::fill(cost_sums_.begin(), cost_sums_.end(), 0.0);
}

double EpisodeMonitor::mean_reward() const {
  if (rewards_.empty()) return 0.0;
  double s = 0.0;
  for (double r : rewards_) s += r;
  return s / rewards_.size();
}

std::vector<double> EpisodeMonitor::mean_costs() const {
  std::vector<double> out(cost_sums_.size(), 0.0);
  if (costs_.empty()) return out;
  for (const auto& c : costs_) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
  }
  for (double& v : out) v /= costs_.size();
  return out;
}

// ---------------------------------------------------------------- MaskedEnv

MaskedEnv::MaskedEnv(std::unique_ptr<EpisodicEnv> inner, std::vector<int> assigned)
    : inner_(std::move(inner)), assigned_(std::move(assigned)), monitor_(inner_->n_costs()) {
  for (int j : assigned_) {
    if (j < 0 || j >= inner_->n_costs()) {
      throw ConstraintAccessError("constraint " + std::to_string(j) + " does not exist");
    }
  }
}

std::vector<double> MaskedEnv::budgets() const {
  const std::vector<double> all = inner_->budgets();
  std::vector<double> out;
  for (int j : assigned_) out.push_back(all[j]);
  return out;
}

std::vector<double> MaskedEnv::reset(Rng& rng) { return inner_->reset(rng); }

StepResult MaskedEnv::step(int action) {
  StepResult full = inner_->step(action);
  monitor_.record_step(full.reward, full.costs);
  if (full.done) monitor_.end_episode();
  std::vector<double> visible;
  visible.reserve(assigned_.size());
  for (int j : assigned_) visible.push_back(full.costs[j]);
  full.costs = std::move(visible);
  return full;
}

// -------------------------------------------------------------------- agent

namespace {

std::vector<int> net_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix p = logits;
  for (int c = 0; c < p.cols(); ++c) {
    p.col(c).array() -= p.col(c).maxCoeff();
    p.col(c) = p.col(c).array().exp();
    p.col(c) /= p.col(c).sum();
  }
  return p;
}

Matrix row_of(std::span<const double> v) {
  Matrix m(1, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m(0, i) = v[i];
  return m;
}

}  // namespace

PpoAgentState make_ppo_agent(int observation_dim, int n_actions, int n_costs,
                             const PpoConfig& cfg, Rng rng) {
  PpoAgentState agent;
  agent.policy = FeedforwardNet(net_sizes(observation_dim, cfg.hidden, n_actions), rng,
                                cfg.policy_output_scale);
  agent.reward_critic = FeedforwardNet(net_sizes(observation_dim, cfg.hidden, 1), rng);
  for (int j = 0; j < n_costs; ++j) {
    agent.cost_critics.emplace_back(net_sizes(observation_dim, cfg.hidden, 1), rng);
  }
  agent.lambdas.assign(n_costs, 0.0);
  agent.cost_adam.resize(n_costs);
  agent.rng = std::move(rng);
  return agent;
}

Vector policy_probs(const FeedforwardNet& policy, std::span<const double> observation) {
  Vector z = policy.forward(observation);
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  return z / z.sum();
}

TrajectoryBatch collect_batch(EpisodicEnv& env, const FeedforwardNet& policy,
                              const PpoConfig& cfg, Rng& rng) {
  const int k = cfg.horizon;
  const int n_costs = env.n_costs();
  TrajectoryBatch batch;
  batch.observations.resize(env.observation_dim(), k);
  batch.actions.resize(k);
  batch.rewards.resize(k);
  batch.costs.assign(n_costs, std::vector<double>(k));
  batch.starts.assign(k, 0);
  batch.old_log_probs.resize(k);

  std::vector<double> obs = env.reset(rng);
  bool fresh = true;
  for (int l = 0; l < k; ++l) {
    batch.starts[l] = fresh ? 1 : 0;
    for (std::size_t d = 0; d < obs.size(); ++d) batch.observations(d, l) = obs[d];
    const Vector p = policy_probs(policy, obs);
    const int a = sample_categorical(std::span<const double>(p.data(), p.size()), rng);
    batch.actions[l] = a;
    batch.old_log_probs[l] = std::log(p(a));
    StepResult res = env.step(a);
    batch.rewards[l] = res.reward;
    for (int j = 0; j < n_costs; ++j) batch.costs[j][l] = res.costs[j];
    if (res.done) {
      obs = env.reset(rng);
      fresh = true;
    } else {
      obs = std::move(res.observation);
      fresh = false;
    }
  }
  if (!fresh) batch.cut_observation = obs;
  return batch;
}

double clip_objective(const FeedforwardNet& policy, const Matrix& observations,
                      std::span<const int> actions, std::span<const double> old_log_probs,
                      std::span<const double> advantages, double clip, Vector* grad) {
  const int k = static_cast<int>(actions.size());
  if (observations.cols() != k || static_cast<int>(old_log_probs.size()) != k ||
      static_cast<int>(advantages.size()) != k) {
    throw std::invalid_argument("clip_objective: batch fields differ in length");
  }
  FeedforwardNet::Cache cache;
  const Matrix probs = softmax_columns(policy.forward_batch(observations, cache));
  Matrix d_logits;
  if (grad) d_logits = Matrix::Zero(probs.rows(), k);
  double value = 0.0;
  for (int l = 0; l < k; ++l) {
    const int a = actions[l];
    const double ratio = std::exp(std::log(probs(a, l)) - old_log_probs[l]);
    value += clip_surrogate(ratio, advantages[l], clip);
    if (!grad) continue;
    const double slope = clip_surrogate_slope(ratio, advantages[l], clip);
    if (slope == 0.0) continue;
    // d ratio / d logit_b = ratio (1{b=a} - pi_b)
    d_logits.col(l) = (-slope * ratio) * probs.col(l);
    d_logits(a, l) += slope * ratio;
  }
  if (grad) *grad = policy.backward(cache, d_logits);
  return value;
}

double critic_loss(const FeedforwardNet& critic, const Matrix& observations,
                   std::span<const double> targets, Vector* grad) {
  const int k = static_cast<int>(targets.size());
  if (observations.cols() != k) throw std::invalid_argument("critic_loss: length mismatch");
  FeedforwardNet::Cache cache;
  const Matrix v = critic.forward_batch(observations, cache);
  const Matrix err = v - row_of(targets);
  if (grad) *grad = critic.backward(cache, (2.0 / k) * err);
  return err.squaredNorm() / k;
}

PpoStepStats update_from_batch(PpoAgentState& agent, const TrajectoryBatch& batch,
                               std::span<const double> thresholds, const FederationConfig& fed,
                               const PpoConfig& cfg, int reward_share) {
  const int k = batch.size();
  const int n_costs = static_cast<int>(agent.cost_critics.size());
  if (static_cast<int>(batch.costs.size()) != n_costs ||
      static_cast<int>(thresholds.size()) != n_costs) {
    throw std::invalid_argument("update_from_batch: constraint count mismatch");
  }
  PpoStepStats stats;

  auto tail = [&](const FeedforwardNet& critic) {
    return batch.cut_observation ? critic.forward(*batch.cut_observation)(0) : 0.0;
  };

  // Returns and advantages, all at the time-t critics.
  const Matrix v_r = agent.reward_critic.forward_batch(batch.observations);
  const std::vector<double> r_to_go =
      returns_to_go(batch.rewards, batch.starts, cfg.discount, tail(agent.reward_critic));
  std::vector<double> adv_l(k);
  for (int l = 0; l < k; ++l) adv_l[l] = (r_to_go[l] - v_r(0, l)) / reward_share;

  std::vector<std::vector<double>> c_to_go(n_costs);
  for (int j = 0; j < n_costs; ++j) {
    const Matrix v_c = agent.cost_critics[j].forward_batch(batch.observations);
    c_to_go[j] =
        returns_to_go(batch.costs[j], batch.starts, cfg.cost_discount,
                      tail(agent.cost_critics[j]));
    stats.j_hat.push_back(episode_avg_cost(c_to_go[j], batch.starts));
    for (int l = 0; l < k; ++l) adv_l[l] -= agent.lambdas[j] * (c_to_go[j][l] - v_c(0, l));
  }

  if (!fed.freeze_lambda) {
    for (int j = 0; j < n_costs; ++j) {
      agent.lambdas[j] = dual_update(agent.lambdas[j], thresholds[j], stats.j_hat[j],
                                     fed.lr_lambda, fed.lambda_max);
    }
  }

  Vector grad;
  stats.reward_critic_loss = critic_loss(agent.reward_critic, batch.observations, r_to_go, &grad);
  apply_gradient(agent.reward_critic, grad, cfg.lr_reward_critic, cfg.optimizer,
                 agent.reward_adam);
  for (int j = 0; j < n_costs; ++j) {
    stats.cost_critic_loss.push_back(
        critic_loss(agent.cost_critics[j], batch.observations, c_to_go[j], &grad));
    apply_gradient(agent.cost_critics[j], grad, cfg.lr_cost_critic, cfg.optimizer,
                   agent.cost_adam[j]);
  }

  for (int it = 0; it < cfg.inner_iters; ++it) {
    const double value = clip_objective(agent.policy, batch.observations, batch.actions,
                                        batch.old_log_probs, adv_l, cfg.clip, &grad);
    if (it == 0) stats.surrogate_before = value;
    apply_gradient(agent.policy, -grad, fed.lr_theta, cfg.optimizer, agent.policy_adam);
  }
  stats.surrogate_after = clip_objective(agent.policy, batch.observations, batch.actions,
                                         batch.old_log_probs, adv_l, cfg.clip);
  return stats;
}

PpoStepStats local_step_fedppo(EpisodicEnv& env, PpoAgentState& agent,
                               std::span<const double> thresholds, const FederationConfig& fed,
                               const PpoConfig& cfg, int reward_share) {
  const TrajectoryBatch batch = collect_batch(env, agent.policy, cfg, agent.rng);
  return update_from_batch(agent, batch, thresholds, fed, cfg, reward_share);
}

std::string CommPayload::to_json() const {
  nlohmann::json doc;
  doc["theta"] = nlohmann::json::parse(theta.to_json());
  doc["phi"] = nlohmann::json::parse(phi.to_json());
  return doc.dump();
}

EpisodeScore score_policy(const EnvFactory& factory, const FeedforwardNet& policy, int episodes,
                          Rng& rng) {
  std::unique_ptr<EpisodicEnv> env = factory();
  EpisodeScore score;
  score.mean_costs.assign(env->n_costs(), 0.0);
  score.episodes = episodes;
  for (int e = 0; e < episodes; ++e) {
    std::vector<double> obs = env->reset(rng);
    while (true) {
      const Vector p = policy_probs(policy, obs);
      StepResult res = env->step(sample_categorical(std::span<const double>(p.data(), p.size()), rng));
      score.mean_reward += res.reward;
      for (std::size_t j = 0; j < res.costs.size(); ++j) score.mean_costs[j] += res.costs[j];
      if (res.done) break;
      obs = std::move(res.observation);
    }
  }
  if (episodes > 0) {
    score.mean_reward /= episodes;
    for (double& c : score.mean_costs) c /= episodes;
  }
  return score;
}

// -------------------------------------------------------------- run loops

namespace {

struct PpoParticipant {
  int slot = 0;
  std::vector<int> assigned;
};

struct PpoSnapshot {
  double mean_reward = 0.0;
  std::vector<double> mean_costs;
  std::vector<double> lambdas;  // view order
};

PpoTrainResult run_ppo_loop(const EnvFactory& factory, const FederationConfig& fed,
                            const PpoConfig& cfg, const std::vector<PpoParticipant>& participants,
                            int reward_share, bool federated, const PpoHooks& hooks) {
  cfg.validate();
  const std::unique_ptr<EpisodicEnv> probe = factory();
  const int n_global = probe->n_costs();
  fed.validate(n_global);
  const std::vector<double> budgets = probe->budgets();
  const int n = static_cast<int>(participants.size());

  std::vector<std::unique_ptr<MaskedEnv>> envs;
  std::vector<PpoAgentState> agents;
  std::vector<std::vector<double>> thresholds(n);
  // All agents share one initialisation so the first broadcast is consistent.
  Rng init_rng = agent_rng(fed.seed, -3);
  const PpoAgentState prototype = make_ppo_agent(probe->observation_dim(), probe->n_actions(),
                                                 0, cfg, init_rng);
  for (int a = 0; a < n; ++a) {
    envs.push_back(std::make_unique<MaskedEnv>(factory(), participants[a].assigned));
    PpoAgentState agent = make_ppo_agent(probe->observation_dim(), probe->n_actions(),
                                         static_cast<int>(participants[a].assigned.size()), cfg,
                                         agent_rng(fed.seed, participants[a].slot));
    agent.policy = prototype.policy;
    agent.reward_critic = prototype.reward_critic;
    agents.push_back(std::move(agent));
    for (int j : participants[a].assigned) thresholds[a].push_back(budgets[j]);
  }

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
  auto logged = [&](int iteration) {
    return iteration % fed.log_every == 0 || iteration == fed.total_steps;
  };

  PpoTrainResult result;
  FeedforwardNet global_policy = prototype.policy;
  FeedforwardNet global_critic = prototype.reward_critic;
  Rng eval_rng = agent_rng(fed.seed, -2);

  const int round_len = federated ? fed.local_steps : std::max(fed.total_steps, 1);
  int t = 0;
  while (t < fed.total_steps) {
    const int steps = std::min(round_len, fed.total_steps - t);
    if (federated) {
      for (PpoAgentState& a : agents) {
        a.policy = global_policy;
        a.reward_critic = global_critic;
      }
    }
    std::vector<std::vector<PpoSnapshot>> snaps(n, std::vector<PpoSnapshot>(steps));
    parallel_for(n, fed.threads, [&](int a) {
      for (int e = 0; e < steps; ++e) {
        local_step_fedppo(*envs[a], agents[a], thresholds[a], fed, cfg, reward_share);
        PpoSnapshot& snap = snaps[a][e];
        snap.mean_reward = envs[a]->monitor().mean_reward();
        snap.mean_costs = envs[a]->monitor().mean_costs();
        snap.lambdas = agents[a].lambdas;
      }
    });

    for (int e = 0; e < steps; ++e) {
      if (!logged(t + e + 1)) continue;
      std::vector<std::vector<double>> lam(n);
      for (int a = 0; a < n; ++a) lam[a] = snaps[a][e].lambdas;
      const std::vector<double> lam_global = global_lambdas(lam);
      for (int a = 0; a < n; ++a) {
        RoundLog row;
        row.iteration = t + e + 1;
        row.agent = participants[a].slot;
        row.j_r = snaps[a][e].mean_reward;
        row.j_c = std::move(snaps[a][e].mean_costs);
        row.lambdas = lam_global;
        result.logs.push_back(std::move(row));
      }
    }
    t += steps;

    if (federated) {
      std::vector<Vector> thetas;
      std::vector<Vector> phis;
      for (int a = 0; a < n; ++a) {
        CommPayload payload{agents[a].policy, agents[a].reward_critic};
        if (hooks.on_communicate) hooks.on_communicate(participants[a].slot, payload);
        thetas.push_back(payload.theta.flat());
        phis.push_back(payload.phi.flat());
      }
      if (n > 1) {
        global_policy.set_flat(aggregate_params_mean(thetas));
        global_critic.set_flat(aggregate_params_mean(phis));
      } else {
        global_policy = agents.front().policy;
        global_critic = agents.front().reward_critic;
      }
    } else {
      global_policy = agents.front().policy;
      global_critic = agents.front().reward_critic;
    }

    const bool crossed = t / fed.log_every != (t - steps) / fed.log_every || t == fed.total_steps;
    if (crossed && cfg.eval_episodes > 0) {
      const EpisodeScore score = score_policy(factory, global_policy, cfg.eval_episodes, eval_rng);
      RoundLog row;
      row.iteration = t;
      row.agent = -1;
      row.aggregated = true;
      row.j_r = score.mean_reward;
      row.j_c = score.mean_costs;
      std::vector<std::vector<double>> lam(n);
      for (int a = 0; a < n; ++a) lam[a] = agents[a].lambdas;
      row.lambdas = global_lambdas(lam);
      result.logs.push_back(std::move(row));
    }
  }

  result.policy = global_policy;
  result.reward_critic = global_critic;
  std::vector<std::vector<double>> lam(n);
  for (int a = 0; a < n; ++a) lam[a] = agents[a].lambdas;
  result.final_lambdas = global_lambdas(lam);
  Rng final_rng = agent_rng(fed.seed, -4);
  result.final_score = score_policy(factory, global_policy, cfg.final_eval_episodes, final_rng);
  return result;
}

}  // namespace

PpoTrainResult run_fedppo(const EnvFactory& factory, const FederationConfig& fed,
                          const PpoConfig& cfg, const PpoHooks& hooks) {
  const int n_costs = factory()->n_costs();
  fed.validate(n_costs);
  std::vector<PpoParticipant> participants;
  for (int i = 0; i < fed.n_agents; ++i) participants.push_back({i, fed.assignment(i)});
  return run_ppo_loop(factory, fed, cfg, participants, fed.n_agents, true, hooks);
}

PpoTrainResult run_ppo_local(const EnvFactory& factory, int k, const FederationConfig& fed,
                             const PpoConfig& cfg) {
  const int n_costs = factory()->n_costs();
  if (k < 0 || k >= n_costs) {
    throw ValidationError("mode", "local baseline index " + std::to_string(k) + " out of range");
  }
  return run_ppo_loop(factory, fed, cfg, {{0, {k}}}, 1, false, {});
}

PpoTrainResult run_ppo_omniscient(const EnvFactory& factory, const FederationConfig& fed,
                                  const PpoConfig& cfg) {
  const int n_costs = factory()->n_costs();
  std::vector<int> all(n_costs);
  for (int j = 0; j < n_costs; ++j) all[j] = j;
  return run_ppo_loop(factory, fed, cfg, {{0, all}}, 1, false, {});
}

}  // namespace fedcrl
