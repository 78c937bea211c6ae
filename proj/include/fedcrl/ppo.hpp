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

#ifndef FEDCRL_PPO_HPP_
#define FEDCRL_PPO_HPP_

// Federated primal-dual PPO with a shared policy and reward critic and private
// per-agent cost critics and multipliers.

#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcrl/envs.hpp"
#include "fedcrl/fed.hpp"
#include "fedcrl/nn.hpp"

namespace fedcrl {

struct PpoConfig {
  double clip = 0.2;
  int inner_iters = 10;
  int horizon = 10000;  // steps per collected batch
  double discount = 0.99;       // reward-to-go
  double cost_discount = 0.99;  // cost-to-go, which also feeds the multiplier update
  double lr_reward_critic = 1e-4;
  double lr_cost_critic = 1e-4;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  std::vector<int> hidden = {64, 64};
  double policy_output_scale = 0.01;
  // Episodes used to score the broadcast policy after each round and at the end.
  int eval_episodes = 5;
  int final_eval_episodes = 20;

  void validate() const;
};

// min(ratio * A, max((1 - eps) A, (1 + eps) A)).
double clip_surrogate(double ratio, double advantage, double clip);
// d clip_surrogate / d ratio; zero where the clipped branch is active.
double clip_surrogate_slope(double ratio, double advantage, double clip);

// Discounted sums within each episode. starts[l] marks the first step of an
// episode; `tail_value` bootstraps the last step when its episode was cut.
std::vector<double> returns_to_go(std::span<const double> signals, std::span<const char> starts,
                                  double discount, double tail_value = 0.0);
// Mean of returns at episode starts. Throws Error when no step is flagged.
double episode_avg_cost(std::span<const double> cost_to_go, std::span<const char> starts);

struct TrajectoryBatch {
  Matrix observations;  // observation_dim x K
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<std::vector<double>> costs;  // one row per visible constraint
  std::vector<char> starts;
  std::vector<double> old_log_probs;
  // Next observation when the final episode was cut by the horizon.
  std::optional<std::vector<double>> cut_observation;

  int size() const { return static_cast<int>(actions.size()); }
};

// Undiscounted episode sums over a sliding window of finished episodes.
class EpisodeMonitor {
 public:
  explicit EpisodeMonitor(int n_costs, int window = 20);

  void record_step(double reward, std::span<const double> costs);
  void end_episode();
  int finished() const { return static_cast<int>(rewards_.size()); }
  double mean_reward() const;
  std::vector<double> mean_costs() const;

 private:
  int window_;
  double reward_sum_ = 0.0;
  std::vector<double> cost_sums_;
  std::deque<double> rewards_;
  std::deque<std::vector<double>> costs_;
};

// Exposes only the assigned costs of the wrapped environment. The monitor sees
// every cost and belongs to the caller, not to the agent.
class MaskedEnv final : public EpisodicEnv {
 public:
  MaskedEnv(std::unique_ptr<EpisodicEnv> inner, std::vector<int> assigned);

  int observation_dim() const override { return inner_->observation_dim(); }
  int n_actions() const override { return inner_->n_actions(); }
  int n_costs() const override { return static_cast<int>(assigned_.size()); }
  std::vector<double> budgets() const override;
  std::vector<double> reset(Rng& rng) override;
  StepResult step(int action) override;
  bool done() const override { return inner_->done(); }

  const EpisodeMonitor& monitor() const { return monitor_; }

 private:
  std::unique_ptr<EpisodicEnv> inner_;
  std::vector<int> assigned_;
  EpisodeMonitor monitor_;
};

struct PpoAgentState {
  FeedforwardNet policy;
  FeedforwardNet reward_critic;
  std::vector<FeedforwardNet> cost_critics;  // private, one per visible constraint
  std::vector<double> lambdas;               // private
  Rng rng;
  Adam policy_adam;
  Adam reward_adam;
  std::vector<Adam> cost_adam;
};

PpoAgentState make_ppo_agent(int observation_dim, int n_actions, int n_costs,
                             const PpoConfig& cfg, Rng rng);

// Categorical policy over the logits of `policy`.
Vector policy_probs(const FeedforwardNet& policy, std::span<const double> observation);

// Rolls the current policy for cfg.horizon steps, resetting at the start and
// after every finished episode.
TrajectoryBatch collect_batch(EpisodicEnv& env, const FeedforwardNet& policy,
                              const PpoConfig& cfg, Rng& rng);

// Sum over the batch of clip_surrogate(pi(a|s) / pi_old(a|s), A). When `grad`
// is given it receives d/d(policy params), the ascent direction.
double clip_objective(const FeedforwardNet& policy, const Matrix& observations,
                      std::span<const int> actions, std::span<const double> old_log_probs,
                      std::span<const double> advantages, double clip, Vector* grad = nullptr);

// Mean squared error of a scalar critic against targets; optional gradient.
double critic_loss(const FeedforwardNet& critic, const Matrix& observations,
                   std::span<const double> targets, Vector* grad = nullptr);

struct PpoStepStats {
  std::vector<double> j_hat;  // episode-start averaged cost-to-go per constraint
  double reward_critic_loss = 0.0;
  std::vector<double> cost_critic_loss;
  double surrogate_before = 0.0;  // Clip at the collection policy (sum of A_L)
  double surrogate_after = 0.0;
};

// Dual step, one critic step each, then inner_iters ascent steps on the clip
// surrogate of the local Lagrangian advantage A_r / reward_share - lambda . A_c.
PpoStepStats update_from_batch(PpoAgentState& agent, const TrajectoryBatch& batch,
                               std::span<const double> thresholds, const FederationConfig& fed,
                               const PpoConfig& cfg, int reward_share);

PpoStepStats local_step_fedppo(EpisodicEnv& env, PpoAgentState& agent,
                               std::span<const double> thresholds, const FederationConfig& fed,
                               const PpoConfig& cfg, int reward_share);

// What an agent sends at a round barrier.
struct CommPayload {
  FeedforwardNet theta;
  FeedforwardNet phi;

  std::string to_json() const;
};

struct PpoHooks {
  std::function<void(int agent, const CommPayload&)> on_communicate;
};

struct EpisodeScore {
  double mean_reward = 0.0;
  std::vector<double> mean_costs;  // undiscounted, every constraint
  int episodes = 0;
};

EpisodeScore score_policy(const EnvFactory& factory, const FeedforwardNet& policy, int episodes,
                          Rng& rng);

struct PpoTrainResult {
  FeedforwardNet policy;
  FeedforwardNet reward_critic;
  std::vector<RoundLog> logs;
  std::vector<double> final_lambdas;
  EpisodeScore final_score;
};

// FedPPO: N agents, parameter-space averaging of theta and phi every E steps.
// RoundLog rows carry windowed episode sums per agent and the score of the
// broadcast policy for aggregated rows.
PpoTrainResult run_fedppo(const EnvFactory& factory, const FederationConfig& fed,
                          const PpoConfig& cfg, const PpoHooks& hooks = {});
// PPO_k: one agent that only sees constraint k.
PpoTrainResult run_ppo_local(const EnvFactory& factory, int k, const FederationConfig& fed,
                             const PpoConfig& cfg);
// PPO_o: one agent with a cost critic and multiplier per constraint.
PpoTrainResult run_ppo_omniscient(const EnvFactory& factory, const FederationConfig& fed,
                                  const PpoConfig& cfg);

}  // namespace fedcrl

#endif  // FEDCRL_PPO_HPP_
