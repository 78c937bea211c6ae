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

#ifndef FEDCRL_ENVS_HPP_
#define FEDCRL_ENVS_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "fedcrl/cmdp.hpp"

namespace fedcrl {

// ---------------------------------------------------------------- RandomMDP

struct RandomMdpParams {
  int n_states = 3;
  int n_actions = 5;
  int n_constraints = 4;
  double hardness = 0.7;  // thresholds = hardness * anchor policy cost values
  double discount = 0.9;
  bool feasibility_screen = true;
  // The screen runs on thresholds scaled by (1 - screen_margin), so accepted
  // instances keep a strictly feasible policy.
  double screen_margin = 0.05;
  int max_retries = 20;
};

// Dirichlet(1) transitions and anchor policy, uniform [0, 1] signals, uniform
// rho. With the screen enabled, instances whose exact omniscient primal-dual
// run cannot get within 1% of every (tightened) threshold are redrawn.
TabularCmdp random_mdp(std::uint64_t seed, const RandomMdpParams& params = {});

// One unscreened draw; `attempt` selects the retry stream. Also returns the
// anchor policy that set the thresholds.
std::pair<TabularCmdp, PolicyTable> random_mdp_draw(std::uint64_t seed, int attempt,
                                                    const RandomMdpParams& params);

// Smallest max_i (J_{c_i} - d_i) / d_i over 2000 exact omniscient
// primal-dual iterations.
double feasibility_gap(const TabularCmdp& cmdp);

// --------------------------------------------------------------- WindyCliff

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct GridSpec {
  int rows = 4;
  int cols = 10;
  Cell start{3, 0};
  Cell goal{3, 9};
  std::vector<std::vector<Cell>> zones;
  double wind_prob = 0.4;
  double discount = 0.95;

  // Bottom-row cliff split into three zones.
  static GridSpec windy_cliff(double wind_prob = 0.4);
  int state(Cell c) const { return c.row * cols + c.col; }
  Cell cell(int s) const { return {s / cols, s % cols}; }
  void validate() const;
};

enum GridAction : int { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };

// Raw signals are mapped into [0, 1]: r' = (r + 1) / 21, c' = c / 10.
struct SignalScale {
  double reward_scale = 1.0;
  double reward_offset = 0.0;  // raw = reward_scale * r' + reward_offset
  double cost_scale = 1.0;     // raw = cost_scale * c'
};

inline constexpr double kWindyCliffGoalReward = 20.0;
inline constexpr double kWindyCliffStepReward = -1.0;
inline constexpr double kWindyCliffZoneCost = 10.0;
inline constexpr double kWindyCliffThreshold = 1.5;

SignalScale windycliff_scale();

// Raw (reward, costs) for arriving at `c`.
std::pair<double, std::vector<double>> windycliff_raw_signals(const GridSpec& spec, Cell c);

// Action first, then the wind pushes one row down with probability wind_prob.
// The goal is absorbing with zero signals.
TabularCmdp windycliff(const GridSpec& spec);
TabularCmdp windycliff(double wind_prob = 0.4);

// ------------------------------------------------------------- EpisodicEnv

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  std::vector<double> costs;
  bool done = false;
};

class EpisodicEnv {
 public:
  virtual ~EpisodicEnv() = default;

  virtual int observation_dim() const = 0;
  virtual int n_actions() const = 0;
  virtual int n_costs() const = 0;
  virtual std::vector<double> budgets() const = 0;

  virtual std::vector<double> reset(Rng& rng) = 0;
  // Throws std::logic_error when called after done and before reset.
  virtual StepResult step(int action) = 0;
  virtual bool done() const = 0;
};

using EnvFactory = std::function<std::unique_ptr<EpisodicEnv>()>;

class CartPoleConstrained final : public EpisodicEnv {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kAngleLimit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  static constexpr double kPositionLimit = 2.4;
  static constexpr int kMaxSteps = 200;
  static constexpr double kBudget = 20.0;

  int observation_dim() const override { return 4; }
  int n_actions() const override { return 2; }
  int n_costs() const override { return 2; }
  std::vector<double> budgets() const override { return {kBudget, kBudget}; }

  std::vector<double> reset(Rng& rng) override;
  StepResult step(int action) override;
  bool done() const override { return done_; }

  // Hazard zone indicator for cart position x: (1{x in Z1}, 1{x in Z2}).
  static std::array<double, 2> zone_costs(double x);

  void set_state(const std::array<double, 4>& state);
  const std::array<double, 4>& state() const { return state_; }

 private:
  std::array<double, 4> state_{};  // x, x_dot, theta, theta_dot
  int steps_ = 0;
  bool done_ = true;
};

std::unique_ptr<EpisodicEnv> cartpole_constrained();

}  // namespace fedcrl

#endif  // FEDCRL_ENVS_HPP_
