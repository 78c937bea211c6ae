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

#ifndef FEDCRL_CMDP_HPP_
#define FEDCRL_CMDP_HPP_

// Tabular constrained MDPs: exact (linear-solve) and Monte-Carlo evaluation
// of values, advantages and discounted occupancy measures.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fedcrl {

using Rng = std::mt19937_64;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Selects the reward or one of the cost functions of a CMDP.
struct Signal {
  enum class Kind { kReward, kCost };
  Kind kind = Kind::kReward;
  int index = 0;

  static constexpr Signal reward() { return {Kind::kReward, 0}; }
  static constexpr Signal cost(int i) { return {Kind::kCost, i}; }
  bool is_reward() const { return kind == Kind::kReward; }
  friend bool operator==(const Signal&, const Signal&) = default;
};

struct TabularCmdp {
  int n_states = 0;
  int n_actions = 0;
  // Row-major S x A x S; use P(s, a, s2).
  std::vector<double> transition;
  Matrix reward;              // S x A, entries in [0, 1]
  std::vector<Matrix> costs;  // N tables, S x A, entries in [0, 1]
  std::vector<double> thresholds;
  double discount = 0.9;
  Vector initial_dist;

  int n_constraints() const { return static_cast<int>(costs.size()); }

  double P(int s, int a, int s2) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  double& P(int s, int a, int s2) {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
  }
  std::span<const double> next_state_probs(int s, int a) const {
    return {transition.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
            static_cast<std::size_t>(n_states)};
  }

  const Matrix& signal_table(Signal signal) const;

  // Throws ValidationError naming the offending field.
  void validate() const;

  static TabularCmdp zeros(int n_states, int n_actions, int n_constraints);
};

// Action probabilities pi(a|s), S x A.
struct PolicyTable {
  RowMatrix probs;

  static PolicyTable uniform(int n_states, int n_actions);
  std::span<const double> row(int s) const {
    return {probs.data() + static_cast<std::size_t>(s) * probs.cols(),
            static_cast<std::size_t>(probs.cols())};
  }
  void validate(int n_states, int n_actions) const;
};

struct Evaluation {
  Vector values;   // V(s)
  double j = 0.0;  // <rho, V>
  double residual = 0.0;
};

struct AdvantageTables {
  Vector v;
  Matrix q;
  Matrix a;
};

struct OccupancyMeasure {
  Vector state_dist;
  Matrix state_action_dist;
};

struct StateAction {
  int state = 0;
  int action = 0;
  bool truncated = false;
};

struct ReturnSample {
  double value = 0.0;
  bool truncated = false;
};

// Where a geometric-horizon rollout starts: a state, optionally with its
// first action pinned (Q estimate) or drawn from the policy (V estimate).
struct RolloutStart {
  int state = 0;
  std::optional<int> action;
};

struct Horizon {
  int length = 0;
  bool truncated = false;
};

inline constexpr double kBellmanTolerance = 1e-8;

// P_pi(s, s2) = sum_a pi(a|s) P(s2|s,a).
Matrix policy_transition(const TabularCmdp& cmdp, const PolicyTable& policy);
// r_pi(s) = sum_a pi(a|s) signal(s,a).
Vector policy_signal(const TabularCmdp& cmdp, const PolicyTable& policy, Signal signal);

Evaluation evaluate_exact(const TabularCmdp& cmdp, const PolicyTable& policy, Signal signal);

// Evaluates the reward and every cost with a single factorisation.
// Index 0 is the reward, index 1 + i is cost i.
std::vector<Evaluation> evaluate_all(const TabularCmdp& cmdp, const PolicyTable& policy);

AdvantageTables q_and_advantage(const TabularCmdp& cmdp, const PolicyTable& policy,
                                Signal signal);

OccupancyMeasure occupancy_exact(const TabularCmdp& cmdp, const PolicyTable& policy);

// Rollout lengths are capped at ceil(20 / (1 - gamma)).
int horizon_cap(double discount);
// Draws L with P(L = l) = (1 - gamma) gamma^l, capped.
Horizon draw_horizon(double discount, Rng& rng);

int sample_categorical(std::span<const double> probs, Rng& rng);
int sample_next_state(const TabularCmdp& cmdp, int s, int a, Rng& rng);

// Two-stage draw from nu(s, a) = d^pi(s) pi(a|s): geometric stopping time,
// then the state-action pair reached at that time.
StateAction sample_occupancy_pair(const TabularCmdp& cmdp, const PolicyTable& policy,
                                  Rng& rng);

// Undiscounted sum of the signal over steps 0..L of a rollout with
// geometric length L. Unbiased for Q(s, a) (pinned action) or V(s).
ReturnSample geometric_return_estimate(const TabularCmdp& cmdp, const PolicyTable& policy,
                                       RolloutStart start, Signal signal, Rng& rng);

// JSON document with n_states, n_actions, transition, reward, costs,
// thresholds, discount, initial_dist.
TabularCmdp parse_cmdp_json(std::string_view text);
std::string cmdp_to_json(const TabularCmdp& cmdp);
TabularCmdp load_cmdp(const std::filesystem::path& path);
void save_cmdp(const TabularCmdp& cmdp, const std::filesystem::path& path);

}  // namespace fedcrl

#endif  // FEDCRL_CMDP_HPP_
