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

#include "fedcrl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fedcrl/errors.hpp"
#include "fedcrl/fed.hpp"

namespace fedcrl {
namespace {

void dirichlet_ones(Rng& rng, double* out, int n) {
  std::exponential_distribution<double> expo(1.0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = expo(rng);
    total += out[i];
  }
  for (int i = 0; i < n; ++i) out[i] /= total;
}

constexpr int kScreenIterations = 2000;
constexpr double kScreenTolerance = 0.01;

}  // namespace

std::pair<TabularCmdp, PolicyTable> random_mdp_draw(std::uint64_t seed, int attempt,
                                                    const RandomMdpParams& params) {
  if (!(params.hardness > 0.0 && params.hardness <= 1.0)) {
    throw ValidationError("env.hardness", "must lie in (0, 1]");
  }
  if (!(params.screen_margin >= 0.0 && params.screen_margin < 1.0)) {
    throw ValidationError("env.screen_margin", "must lie in [0, 1)");
  }
  if (params.n_states < 1 || params.n_actions < 1 || params.n_constraints < 0) {
    throw ValidationError("env", "sizes must be positive");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(attempt), 0xd1ceu};
  Rng rng(seq);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int S = params.n_states;
  const int A = params.n_actions;
  TabularCmdp m = TabularCmdp::zeros(S, A, params.n_constraints);
  m.discount = params.discount;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) dirichlet_ones(rng, &m.P(s, a, 0), S);
  }
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) m.reward(s, a) = unif(rng);
  }
  for (Matrix& c : m.costs) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) c(s, a) = unif(rng);
    }
  }
  m.initial_dist = Vector::Constant(S, 1.0 / S);

  PolicyTable anchor{RowMatrix(S, A)};
  for (int s = 0; s < S; ++s) dirichlet_ones(rng, anchor.probs.data() + s * A, A);
  const std::vector<Evaluation> ev = evaluate_all(m, anchor);
  for (int i = 0; i < params.n_constraints; ++i) {
    m.thresholds[i] = params.hardness * ev[1 + i].j;
  }
  m.validate();
  return {std::move(m), std::move(anchor)};
}

double feasibility_gap(const TabularCmdp& cmdp) {
  if (cmdp.n_constraints() == 0) return 0.0;
  FederationConfig cfg;
  cfg.estimator = Estimator::kExact;
  cfg.total_steps = kScreenIterations;
  cfg.lr_theta = 1.0;
  cfg.lr_lambda = 0.1;
  cfg.lambda_max = 10.0;
  const TrainResult run = run_baseline_omniscient(cmdp, cfg);
  double best = std::numeric_limits<double>::infinity();
  for (const RoundLog& row : run.logs) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < cmdp.n_constraints(); ++i) {
      worst = std::max(worst, (row.j_c[i] - cmdp.thresholds[i]) / cmdp.thresholds[i]);
    }
    best = std::min(best, worst);
  }
  return best;
}

TabularCmdp random_mdp(std::uint64_t seed, const RandomMdpParams& params) {
  for (int attempt = 0; attempt <= params.max_retries; ++attempt) {
    auto [cmdp, anchor] = random_mdp_draw(seed, attempt, params);
    if (!params.feasibility_screen) return cmdp;
    TabularCmdp tightened = cmdp;
    for (double& d : tightened.thresholds) d *= 1.0 - params.screen_margin;
    if (feasibility_gap(tightened) <= kScreenTolerance) return cmdp;
  }
  throw NumericalError("random_mdp: no feasible instance for seed " + std::to_string(seed) +
                       " after " + std::to_string(params.max_retries) + " retries");
}

// -------------------------------------------------------------- WindyCliff

GridSpec GridSpec::windy_cliff(double wind_prob) {
  GridSpec spec;
  spec.wind_prob = wind_prob;
  spec.zones = {{{3, 1}, {3, 2}, {3, 3}}, {{3, 4}, {3, 5}, {3, 6}}, {{3, 7}, {3, 8}}};
  return spec;
}

void GridSpec::validate() const {
  if (rows < 1 || cols < 1) throw ValidationError("env.grid", "grid must be nonempty");
  if (!(wind_prob >= 0.0 && wind_prob <= 1.0)) {
    throw ValidationError("env.wind_prob", "must lie in [0, 1]");
  }
  if (!(discount > 0.0 && discount < 1.0)) {
    throw ValidationError("env.discount", "must lie in (0, 1)");
  }
  auto inside = [&](Cell c) { return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols; };
  if (!inside(start) || !inside(goal)) throw ValidationError("env.grid", "start/goal out of bounds");
  std::vector<int> owner(rows * cols, -1);
  for (std::size_t k = 0; k < zones.size(); ++k) {
    for (Cell c : zones[k]) {
      if (!inside(c)) throw ValidationError("env.zones", "zone cell out of bounds");
      if (c == start || c == goal) throw ValidationError("env.zones", "zones exclude start and goal");
      if (owner[state(c)] != -1) throw ValidationError("env.zones", "zones must be disjoint");
      owner[state(c)] = static_cast<int>(k);
    }
  }
}

SignalScale windycliff_scale() {
  return {kWindyCliffGoalReward - kWindyCliffStepReward, kWindyCliffStepReward,
          kWindyCliffZoneCost};
}

std::pair<double, std::vector<double>> windycliff_raw_signals(const GridSpec& spec, Cell c) {
  const double reward = c == spec.goal ? kWindyCliffGoalReward : kWindyCliffStepReward;
  std::vector<double> costs(spec.zones.size(), 0.0);
  for (std::size_t k = 0; k < spec.zones.size(); ++k) {
    if (std::find(spec.zones[k].begin(), spec.zones[k].end(), c) != spec.zones[k].end()) {
      costs[k] = kWindyCliffZoneCost;
    }
  }
  return {reward, costs};
}

TabularCmdp windycliff(const GridSpec& spec) {
  spec.validate();
  const int S = spec.rows * spec.cols;
  const int A = 4;
  const int N = static_cast<int>(spec.zones.size());
  const SignalScale scale = windycliff_scale();
  TabularCmdp m = TabularCmdp::zeros(S, A, N);
  m.discount = spec.discount;

  auto move = [&](Cell c, int a) {
    static constexpr int kDr[4] = {-1, 0, 1, 0};
    static constexpr int kDc[4] = {0, 1, 0, -1};
    Cell next{c.row + kDr[a], c.col + kDc[a]};
    if (next.row < 0 || next.row >= spec.rows || next.col < 0 || next.col >= spec.cols) return c;
    return next;
  };

  const int goal = spec.state(spec.goal);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      if (s == goal) {
        m.P(s, a, s) = 1.0;
        continue;
      }
      const Cell moved = move(spec.cell(s), a);
      const Cell blown = move(moved, kDown);
      m.P(s, a, spec.state(moved)) += 1.0 - spec.wind_prob;
      m.P(s, a, spec.state(blown)) += spec.wind_prob;
      for (int s2 = 0; s2 < S; ++s2) {
        const double p = m.P(s, a, s2);
        if (p == 0.0) continue;
        const auto [raw_r, raw_c] = windycliff_raw_signals(spec, spec.cell(s2));
        m.reward(s, a) += p * (raw_r - scale.reward_offset) / scale.reward_scale;
        for (int k = 0; k < N; ++k) m.costs[k](s, a) += p * raw_c[k] / scale.cost_scale;
      }
    }
  }
  for (int k = 0; k < N; ++k) m.thresholds[k] = kWindyCliffThreshold / scale.cost_scale;
  m.initial_dist(spec.state(spec.start)) = 1.0;
  m.validate();
  return m;
}

TabularCmdp windycliff(double wind_prob) { return windycliff(GridSpec::windy_cliff(wind_prob)); }

// --------------------------------------------------------------- CartPole

std::array<double, 2> CartPoleConstrained::zone_costs(double x) {
  static constexpr std::array<std::pair<double, double>, 5> kZ1 = {
      {{-2.4, -2.3}, {-1.3, -1.2}, {-0.1, 0.0}, {1.1, 1.2}, {2.2, 2.3}}};
  static constexpr std::array<std::pair<double, double>, 5> kZ2 = {
      {{-2.3, -2.2}, {-1.2, -1.1}, {0.0, 0.1}, {1.2, 1.3}, {2.3, 2.4}}};
  auto in = [x](const auto& zone) {
    return std::any_of(zone.begin(), zone.end(),
                       [x](const auto& iv) { return x >= iv.first && x <= iv.second; });
  };
  return {in(kZ1) ? 1.0 : 0.0, in(kZ2) ? 1.0 : 0.0};
}

std::vector<double> CartPoleConstrained::reset(Rng& rng) {
  std::uniform_real_distribution<double> unif(-0.05, 0.05);
  for (double& v : state_) v = unif(rng);
  steps_ = 0;
  done_ = false;
  return {state_.begin(), state_.end()};
}

void CartPoleConstrained::set_state(const std::array<double, 4>& state) {
  state_ = state;
  steps_ = 0;
  done_ = false;
}

StepResult CartPoleConstrained::step(int action) {
  if (done_) throw std::logic_error("CartPoleConstrained::step called after episode end");
  if (action != 0 && action != 1) throw std::invalid_argument("cart-pole action must be 0 or 1");
  constexpr double kTotalMass = kMassCart + kMassPole;
  constexpr double kPoleMassLength = kMassPole * kHalfLength;
  auto& [x, x_dot, theta, theta_dot] = state_;
  const double force = action == 1 ? kForce : -kForce;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;
  x += kTau * x_dot;
  x_dot += kTau * x_acc;
  theta += kTau * theta_dot;
  theta_dot += kTau * theta_acc;
  ++steps_;
  done_ = x < -kPositionLimit || x > kPositionLimit || theta < -kAngleLimit ||
          theta > kAngleLimit || steps_ >= kMaxSteps;

  const auto zc = zone_costs(x);
  return {{state_.begin(), state_.end()}, 1.0, {zc[0], zc[1]}, done_};
}

std::unique_ptr<EpisodicEnv> cartpole_constrained() {
  return std::make_unique<CartPoleConstrained>();
}

}  // namespace fedcrl
