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

#include "fedcrl/cmdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedcrl/errors.hpp"

namespace fedcrl {
namespace {

using nlohmann::json;

constexpr double kSumTolerance = 1e-9;

std::string indexed(const std::string& base, std::initializer_list<int> idx) {
  std::string out = base;
  for (int i : idx) out += "[" + std::to_string(i) + "]";
  return out;
}

void check_unit_interval(const Matrix& table, const std::string& name) {
  for (int s = 0; s < table.rows(); ++s) {
    for (int a = 0; a < table.cols(); ++a) {
      const double x = table(s, a);
      if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
        throw ValidationError(indexed(name, {s, a}), "entry must lie in [0, 1]");
      }
    }
  }
}

// Solves (I - gamma P) X = B with iterative refinement.
Matrix bellman_solve(const Matrix& p_pi, double discount, const Matrix& rhs) {
  const Matrix system = Matrix::Identity(p_pi.rows(), p_pi.cols()) - discount * p_pi;
  Eigen::PartialPivLU<Matrix> lu(system);
  Matrix x = lu.solve(rhs);
  for (int iter = 0; iter < 3; ++iter) {
    const Matrix r = rhs - system * x;
    if (r.cwiseAbs().maxCoeff() <= kBellmanTolerance * 1e-2) break;
    x += lu.solve(r);
  }
  const double residual = (rhs - system * x).cwiseAbs().maxCoeff();
  if (!std::isfinite(residual) || residual > kBellmanTolerance) {
    throw NumericalError("Bellman solve residual " + std::to_string(residual) +
                         " exceeds tolerance");
  }
  return x;
}

Matrix parse_table(const json& doc, const std::string& field, int rows, int cols) {
  if (!doc.is_array() || static_cast<int>(doc.size()) != rows) {
    throw ValidationError(field, "expected an array of " + std::to_string(rows) + " rows");
  }
  Matrix out(rows, cols);
  for (int s = 0; s < rows; ++s) {
    const json& row = doc[s];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ValidationError(indexed(field, {s}),
                            "expected an array of " + std::to_string(cols) + " numbers");
    }
    for (int a = 0; a < cols; ++a) {
      if (!row[a].is_number()) throw ValidationError(indexed(field, {s, a}), "expected a number");
      out(s, a) = row[a].get<double>();
    }
  }
  return out;
}

json table_to_json(const Matrix& m) {
  json out = json::array();
  for (int s = 0; s < m.rows(); ++s) {
    json row = json::array();
    for (int a = 0; a < m.cols(); ++a) row.push_back(m(s, a));
    out.push_back(std::move(row));
  }
  return out;
}

const json& require(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(key, "missing field");
  return *it;
}

int require_positive_int(const json& doc, const char* key) {
  const json& v = require(doc, key);
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    throw ValidationError(key, "expected a positive integer");
  }
  return v.get<int>();
}

}  // namespace

const Matrix& TabularCmdp::signal_table(Signal signal) const {
  if (signal.is_reward()) return reward;
  if (signal.index < 0 || signal.index >= n_constraints()) {
    throw std::out_of_range("cost index " + std::to_string(signal.index) + " out of range");
  }
  return costs[signal.index];
}

TabularCmdp TabularCmdp::zeros(int n_states, int n_actions, int n_constraints) {
  TabularCmdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.transition.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
  m.reward = Matrix::Zero(n_states, n_actions);
  m.costs.assign(n_constraints, Matrix::Zero(n_states, n_actions));
  m.thresholds.assign(n_constraints, 0.0);
  m.initial_dist = Vector::Zero(n_states);
  return m;
}

void TabularCmdp::validate() const {
  if (n_states <= 0) throw ValidationError("n_states", "must be positive");
  if (n_actions <= 0) throw ValidationError("n_actions", "must be positive");
  if (transition.size() != static_cast<std::size_t>(n_states) * n_actions * n_states) {
    throw ValidationError("transition", "shape must be n_states x n_actions x n_states");
  }
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double p = P(s, a, s2);
        if (!std::isfinite(p) || p < 0.0) {
          throw ValidationError(indexed("transition", {s, a, s2}), "probability must be >= 0");
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kSumTolerance) {
        throw ValidationError(indexed("transition", {s, a}), "row does not sum to 1");
      }
    }
  }
  if (reward.rows() != n_states || reward.cols() != n_actions) {
    throw ValidationError("reward", "shape must be n_states x n_actions");
  }
  check_unit_interval(reward, "reward");
  if (thresholds.size() != costs.size()) {
    throw ValidationError("thresholds", "need one threshold per cost function");
  }
  for (int i = 0; i < n_constraints(); ++i) {
    const std::string name = indexed("costs", {i});
    if (costs[i].rows() != n_states || costs[i].cols() != n_actions) {
      throw ValidationError(name, "shape must be n_states x n_actions");
    }
    check_unit_interval(costs[i], name);
    if (!std::isfinite(thresholds[i]) || thresholds[i] < 0.0) {
      throw ValidationError(indexed("thresholds", {i}), "must be finite and nonnegative");
    }
  }
  if (!(discount > 0.0 && discount < 1.0)) {
    throw ValidationError("discount", "must lie in (0, 1)");
  }
  if (initial_dist.size() != n_states) {
    throw ValidationError("initial_dist", "length must equal n_states");
  }
  if ((initial_dist.array() < 0.0).any() || !initial_dist.allFinite()) {
    throw ValidationError("initial_dist", "entries must be nonnegative");
  }
  if (std::abs(initial_dist.sum() - 1.0) > kSumTolerance) {
    throw ValidationError("initial_dist", "does not sum to 1");
  }
}

PolicyTable PolicyTable::uniform(int n_states, int n_actions) {
  return {RowMatrix::Constant(n_states, n_actions, 1.0 / n_actions)};
}

void PolicyTable::validate(int n_states, int n_actions) const {
  if (probs.rows() != n_states || probs.cols() != n_actions) {
    throw ValidationError("policy", "shape mismatch with cmdp");
  }
  for (int s = 0; s < n_states; ++s) {
    if ((probs.row(s).array() < 0.0).any() ||
        std::abs(probs.row(s).sum() - 1.0) > kSumTolerance) {
      throw ValidationError(indexed("policy", {s}), "row is not a probability vector");
    }
  }
}

Matrix policy_transition(const TabularCmdp& cmdp, const PolicyTable& policy) {
  Matrix p_pi = Matrix::Zero(cmdp.n_states, cmdp.n_states);
  for (int s = 0; s < cmdp.n_states; ++s) {
    for (int a = 0; a < cmdp.n_actions; ++a) {
      const double w = policy.probs(s, a);
      if (w == 0.0) continue;
      for (int s2 = 0; s2 < cmdp.n_states; ++s2) p_pi(s, s2) += w * cmdp.P(s, a, s2);
    }
  }
  return p_pi;
}

Vector policy_signal(const TabularCmdp& cmdp, const PolicyTable& policy, Signal signal) {
  return cmdp.signal_table(signal).cwiseProduct(policy.probs).rowwise().sum();
}

Evaluation evaluate_exact(const TabularCmdp& cmdp, const PolicyTable& policy, Signal signal) {
  const Matrix p_pi = policy_transition(cmdp, policy);
  const Vector r_pi = policy_signal(cmdp, policy, signal);
  Evaluation out;
  out.values = bellman_solve(p_pi, cmdp.discount, r_pi);
  out.residual = (r_pi + cmdp.discount * p_pi * out.values - out.values).cwiseAbs().maxCoeff();
  out.j = cmdp.initial_dist.dot(out.values);
  return out;
}

std::vector<Evaluation> evaluate_all(const TabularCmdp& cmdp, const PolicyTable& policy) {
  const int n_signals = 1 + cmdp.n_constraints();
  const Matrix p_pi = policy_transition(cmdp, policy);
  Matrix rhs(cmdp.n_states, n_signals);
  rhs.col(0) = policy_signal(cmdp, policy, Signal::reward());
  for (int i = 0; i < cmdp.n_constraints(); ++i) {
    rhs.col(1 + i) = policy_signal(cmdp, policy, Signal::cost(i));
  }
  const Matrix values = bellman_solve(p_pi, cmdp.discount, rhs);
  std::vector<Evaluation> out(n_signals);
  for (int k = 0; k < n_signals; ++k) {
    out[k].values = values.col(k);
    out[k].residual =
        (rhs.col(k) + cmdp.discount * p_pi * out[k].values - out[k].values).cwiseAbs().maxCoeff();
    out[k].j = cmdp.initial_dist.dot(out[k].values);
  }
  return out;
}

AdvantageTables q_and_advantage(const TabularCmdp& cmdp, const PolicyTable& policy,
                                Signal signal) {
  AdvantageTables out;
  out.v = evaluate_exact(cmdp, policy, signal).values;
  const Matrix& table = cmdp.signal_table(signal);
  out.q.resize(cmdp.n_states, cmdp.n_actions);
  for (int s = 0; s < cmdp.n_states; ++s) {
    for (int a = 0; a < cmdp.n_actions; ++a) {
      double next = 0.0;
      for (int s2 = 0; s2 < cmdp.n_states; ++s2) next += cmdp.P(s, a, s2) * out.v(s2);
      out.q(s, a) = table(s, a) + cmdp.discount * next;
    }
  }
  out.a = out.q.colwise() - out.v;
  return out;
}

OccupancyMeasure occupancy_exact(const TabularCmdp& cmdp, const PolicyTable& policy) {
  const Matrix p_pi = policy_transition(cmdp, policy);
  // d^T (I - gamma P) = (1 - gamma) rho^T  <=>  (I - gamma P)^T d = (1 - gamma) rho
  const Matrix system =
      Matrix::Identity(cmdp.n_states, cmdp.n_states) - cmdp.discount * p_pi.transpose();
  const Vector rhs = (1.0 - cmdp.discount) * cmdp.initial_dist;
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector d = lu.solve(rhs);
  d += lu.solve(Vector(rhs - system * d));
  OccupancyMeasure out;
  out.state_dist = d;
  out.state_action_dist = policy.probs.array().colwise() * d.array();
  return out;
}

int horizon_cap(double discount) {
  // The slack keeps 20 / (1 - 0.9) = 200.00000000000003 at 200.
  return static_cast<int>(std::ceil(20.0 / (1.0 - discount) - 1e-9));
}

Horizon draw_horizon(double discount, Rng& rng) {
  // Failures before the first success with success probability 1 - gamma.
  std::geometric_distribution<int> geom(1.0 - discount);
  const int cap = horizon_cap(discount);
  const int l = geom(rng);
  if (l > cap) return {cap, true};
  return {l, false};
}

int sample_categorical(std::span<const double> probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  const int n = static_cast<int>(probs.size());
  for (int i = 0; i < n; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding slack: return the last index with positive mass.
  for (int i = n - 1; i >= 0; --i) {
    if (probs[i] > 0.0) return i;
  }
  return n - 1;
}

int sample_next_state(const TabularCmdp& cmdp, int s, int a, Rng& rng) {
  return sample_categorical(cmdp.next_state_probs(s, a), rng);
}

namespace {

int sample_action(const PolicyTable& policy, int s, Rng& rng) {
  return sample_categorical(policy.row(s), rng);
}

int sample_initial_state(const TabularCmdp& cmdp, Rng& rng) {
  return sample_categorical({cmdp.initial_dist.data(), static_cast<std::size_t>(cmdp.n_states)},
                            rng);
}

}  // namespace

StateAction sample_occupancy_pair(const TabularCmdp& cmdp, const PolicyTable& policy,
                                  Rng& rng) {
  const Horizon h = draw_horizon(cmdp.discount, rng);
  int s = sample_initial_state(cmdp, rng);
  for (int l = 0; l < h.length; ++l) {
    const int a = sample_action(policy, s, rng);
    s = sample_next_state(cmdp, s, a, rng);
  }
  return {s, sample_action(policy, s, rng), h.truncated};
}

ReturnSample geometric_return_estimate(const TabularCmdp& cmdp, const PolicyTable& policy,
                                       RolloutStart start, Signal signal, Rng& rng) {
  const Matrix& table = cmdp.signal_table(signal);
  const Horizon h = draw_horizon(cmdp.discount, rng);
  int s = start.state;
  int a = start.action ? *start.action : sample_action(policy, s, rng);
  double total = table(s, a);
  for (int l = 1; l <= h.length; ++l) {
    s = sample_next_state(cmdp, s, a, rng);
    a = sample_action(policy, s, rng);
    total += table(s, a);
  }
  return {total, h.truncated};
}

TabularCmdp parse_cmdp_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("", std::string("malformed cmdp JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("", "cmdp document must be a JSON object");

  TabularCmdp m;
  m.n_states = require_positive_int(doc, "n_states");
  m.n_actions = require_positive_int(doc, "n_actions");
  const int S = m.n_states;
  const int A = m.n_actions;

  const json& tr = require(doc, "transition");
  if (!tr.is_array() || static_cast<int>(tr.size()) != S) {
    throw ValidationError("transition", "expected n_states entries");
  }
  m.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
  for (int s = 0; s < S; ++s) {
    const Matrix rows = parse_table(tr[s], indexed("transition", {s}), A, S);
    for (int a = 0; a < A; ++a) {
      for (int s2 = 0; s2 < S; ++s2) m.P(s, a, s2) = rows(a, s2);
    }
  }
  m.reward = parse_table(require(doc, "reward"), "reward", S, A);

  const json& costs = require(doc, "costs");
  if (!costs.is_array()) throw ValidationError("costs", "expected an array of tables");
  for (std::size_t i = 0; i < costs.size(); ++i) {
    m.costs.push_back(parse_table(costs[i], indexed("costs", {static_cast<int>(i)}), S, A));
  }
  const json& th = require(doc, "thresholds");
  if (!th.is_array()) throw ValidationError("thresholds", "expected an array of numbers");
  for (std::size_t i = 0; i < th.size(); ++i) {
    if (!th[i].is_number()) {
      throw ValidationError(indexed("thresholds", {static_cast<int>(i)}), "expected a number");
    }
    m.thresholds.push_back(th[i].get<double>());
  }
  const json& disc = require(doc, "discount");
  if (!disc.is_number()) throw ValidationError("discount", "expected a number");
  m.discount = disc.get<double>();

  const json& rho = require(doc, "initial_dist");
  if (!rho.is_array() || static_cast<int>(rho.size()) != S) {
    throw ValidationError("initial_dist", "expected n_states numbers");
  }
  m.initial_dist.resize(S);
  for (int s = 0; s < S; ++s) {
    if (!rho[s].is_number()) throw ValidationError(indexed("initial_dist", {s}), "expected a number");
    m.initial_dist(s) = rho[s].get<double>();
  }
  for (const auto& [key, _] : doc.items()) {
    static const std::vector<std::string> known = {"n_states", "n_actions", "transition",
                                                   "reward",   "costs",     "thresholds",
                                                   "discount", "initial_dist"};
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError(key, "unknown field");
    }
  }
  m.validate();
  return m;
}

std::string cmdp_to_json(const TabularCmdp& cmdp) {
  json doc;
  doc["n_states"] = cmdp.n_states;
  doc["n_actions"] = cmdp.n_actions;
  json tr = json::array();
  for (int s = 0; s < cmdp.n_states; ++s) {
    json per_action = json::array();
    for (int a = 0; a < cmdp.n_actions; ++a) {
      auto row = cmdp.next_state_probs(s, a);
      per_action.push_back(json(std::vector<double>(row.begin(), row.end())));
    }
    tr.push_back(std::move(per_action));
  }
  doc["transition"] = std::move(tr);
  doc["reward"] = table_to_json(cmdp.reward);
  json costs = json::array();
  for (const Matrix& c : cmdp.costs) costs.push_back(table_to_json(c));
  doc["costs"] = std::move(costs);
  doc["thresholds"] = cmdp.thresholds;
  doc["discount"] = cmdp.discount;
  doc["initial_dist"] =
      std::vector<double>(cmdp.initial_dist.data(), cmdp.initial_dist.data() + cmdp.n_states);
  return doc.dump(1);
}

TabularCmdp load_cmdp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cmdp file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_cmdp_json(buf.str());
}

void save_cmdp(const TabularCmdp& cmdp, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write cmdp file " + path.string());
  out << cmdp_to_json(cmdp) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace fedcrl
