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

// Fast invariant checks shared by `fedcrl selfcheck` and the C API.

#include <cmath>
#include <cstdio>
#include <set>

#include <Eigen/Dense>
#include <json.hpp>

#include "fedcrl/experiment.hpp"
#include "fedcrl/npg.hpp"
#include "fedcrl/policy.hpp"

namespace fedcrl {

namespace {

constexpr double kGradTol = 1e-4;

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double rel_error(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

// Central differences of f at x.
template <typename F>
Vector numeric_grad(F f, Vector x, double h = 1e-6) {
  Vector g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double up = f(x);
    x(i) = keep - h;
    const double down = f(x);
    x(i) = keep;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

SoftmaxParams random_params(int s, int a, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  SoftmaxParams p = SoftmaxParams::zeros(s, a);
  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < a; ++j) p.theta(i, j) = n(rng);
  }
  return p;
}

// Removes per-state constants (the null space of the softmax Fisher matrix).
RowMatrix center_rows(RowMatrix m) {
  for (int s = 0; s < m.rows(); ++s) m.row(s).array() -= m.row(s).mean();
  return m;
}

CheckLine check_decomposition() {
  Rng rng(11);
  const TabularCmdp cmdp = random_mdp(3);
  const SoftmaxParams params = random_params(cmdp.n_states, cmdp.n_actions, rng);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::vector<double> lambdas(cmdp.n_constraints());
  for (double& l : lambdas) l = u(rng);
  const LagrangianValue v = lagrangian_value(cmdp, params, lambdas);
  double sum = 0.0;
  for (double l : v.local) sum += l;
  const double err = std::abs(sum - v.l0);
  return {"lagrangian decomposition L0 = sum_i L_i", err <= 1e-10, fmt("abs error %.3g", err)};
}

CheckLine check_npg_fisher() {
  Rng rng(5);
  const TabularCmdp cmdp = random_mdp(7);
  const SoftmaxParams params = random_params(cmdp.n_states, cmdp.n_actions, rng);
  const PolicyTable pi = to_policy(params);
  const int ns = cmdp.n_states;
  const int na = cmdp.n_actions;
  const int dim = ns * na;
  const OccupancyMeasure occ = occupancy_exact(cmdp, pi);
  const AdvantageTables adv = q_and_advantage(cmdp, pi, Signal::reward());
  Matrix fisher = Matrix::Zero(dim, dim);
  Vector grad = Vector::Zero(dim);
  for (int s = 0; s < ns; ++s) {
    for (int a = 0; a < na; ++a) {
      Vector score = Vector::Zero(dim);
      for (int b = 0; b < na; ++b) score(s * na + b) = (a == b ? 1.0 : 0.0) - pi.probs(s, b);
      const double w = occ.state_action_dist(s, a);
      fisher += w * score * score.transpose();
      grad += w * adv.a(s, a) / (1.0 - cmdp.discount) * score;
    }
  }
  const Vector oracle = fisher.completeOrthogonalDecomposition().pseudoInverse() * grad;
  const RowMatrix dir = exact_npg_direction(cmdp, params, Signal::reward());
  const RowMatrix centered = center_rows(dir);
  const Vector flat = Eigen::Map<const Vector>(centered.data(), dim);
  const double err = (flat - oracle).cwiseAbs().maxCoeff();
  return {"npg direction matches Fisher pseudo-inverse", err <= 1e-6,
          fmt("max abs error %.3g", err)};
}

// Mean cosine over 5 SGD seeds between the sampled and exact reward directions
// on random_mdp(0) at the uniform policy, modulo the Fisher null space.
double npg_sample_cosine(int n_samples) {
  const TabularCmdp cmdp = random_mdp(0);
  const SoftmaxParams params = SoftmaxParams::zeros(cmdp.n_states, cmdp.n_actions);
  const RowMatrix exact = center_rows(exact_npg_direction(cmdp, params, Signal::reward()));
  CompatSgdConfig cfg;
  cfg.n_samples = n_samples;
  double mean_cos = 0.0;
  const int reps = 5;
  for (int r = 0; r < reps; ++r) {
    Rng rng(100 + r);
    const RowMatrix w = center_rows(sgd_compatible(cmdp, params, Signal::reward(), cfg, rng).w);
    const double denom = std::max(w.norm() * exact.norm(), 1e-300);
    mean_cos += (w.array() * exact.array()).sum() / denom / reps;
  }
  return mean_cos;
}

// The estimator is unbiased but noisy at K=10^4; the pass condition is
// consistency at K=10^5. Both values are reported.
CheckLine check_npg_sample_cosine() {
  const double small = npg_sample_cosine(10000);
  const double large = npg_sample_cosine(100000);
  return {"sampled npg direction cosine vs exact", large >= 0.9,
          fmt("cosine %.4f at K=1e4, %.4f at K=1e5 (need >= 0.9 at K=1e5)", small, large)};
}

CheckLine check_log_prob_grad() {
  Rng rng(3);
  const SoftmaxParams params = random_params(3, 4, rng);
  const int s = 1;
  const int a = 2;
  const RowMatrix g = log_prob_grad(params, s, a);
  const Vector analytic = Eigen::Map<const Vector>(g.data(), g.size());
  auto f = [&](const Vector& x) {
    SoftmaxParams p = params;
    p.theta = Eigen::Map<const RowMatrix>(x.data(), 3, 4);
    return std::log(action_probs(p, s)(a));
  };
  const Vector numeric = numeric_grad(f, Eigen::Map<const Vector>(params.theta.data(), 12));
  const double err = rel_error(analytic, numeric);
  return {"softmax log-prob gradient vs finite differences", err <= kGradTol,
          fmt("rel error %.3g", err)};
}

struct NetFixture {
  FeedforwardNet net;
  Matrix inputs;
};

NetFixture net_fixture(int out) {
  Rng rng(17);
  NetFixture fx{FeedforwardNet({4, 8, 8, out}, rng), Matrix(4, 16)};
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < fx.inputs.size(); ++i) fx.inputs.data()[i] = n(rng);
  return fx;
}

CheckLine check_net_backward() {
  NetFixture fx = net_fixture(3);
  Rng rng(19);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix weights(3, fx.inputs.cols());
  for (int i = 0; i < weights.size(); ++i) weights.data()[i] = n(rng);
  FeedforwardNet::Cache cache;
  fx.net.forward_batch(fx.inputs, cache);
  const Vector analytic = fx.net.backward(cache, weights);
  auto f = [&](const Vector& x) {
    FeedforwardNet probe = fx.net;
    probe.set_flat(x);
    return (probe.forward_batch(fx.inputs).array() * weights.array()).sum();
  };
  const double err = rel_error(analytic, numeric_grad(f, fx.net.flat()));
  return {"network backward vs finite differences", err <= kGradTol,
          fmt("rel error %.3g", err)};
}

CheckLine check_critic_grad() {
  NetFixture fx = net_fixture(1);
  std::vector<double> targets(fx.inputs.cols());
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = std::sin(static_cast<double>(i));
  Vector analytic;
  critic_loss(fx.net, fx.inputs, targets, &analytic);
  auto f = [&](const Vector& x) {
    FeedforwardNet probe = fx.net;
    probe.set_flat(x);
    return critic_loss(probe, fx.inputs, targets);
  };
  const double err = rel_error(analytic, numeric_grad(f, fx.net.flat()));
  return {"critic loss gradient vs finite differences", err <= kGradTol,
          fmt("rel error %.3g", err)};
}

CheckLine check_clip_grad(bool corrupt) {
  NetFixture fx = net_fixture(3);
  const int k = static_cast<int>(fx.inputs.cols());
  Rng rng(23);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<int> actions(k);
  std::vector<double> old_log_probs(k);
  std::vector<double> adv(k);
  const Matrix logits = fx.net.forward_batch(fx.inputs);
  for (int l = 0; l < k; ++l) {
    actions[l] = l % 3;
    Vector z = logits.col(l);
    z.array() -= z.maxCoeff();
    const double logp = z(actions[l]) - std::log(z.array().exp().sum());
    // Ratios spread over both clipped and unclipped regions, away from kinks.
    const double shift = (l % 4 == 0) ? 0.5 : (l % 4 == 1 ? -0.5 : 0.03 * n(rng));
    old_log_probs[l] = logp - shift;
    adv[l] = (l % 2 == 0 ? 1.0 : -1.0) * (0.5 + std::abs(n(rng)));
  }
  Vector analytic;
  clip_objective(fx.net, fx.inputs, actions, old_log_probs, adv, 0.2, &analytic);
  if (corrupt) analytic *= 1.5;
  auto f = [&](const Vector& x) {
    FeedforwardNet probe = fx.net;
    probe.set_flat(x);
    return clip_objective(probe, fx.inputs, actions, old_log_probs, adv, 0.2);
  };
  const double err = rel_error(analytic, numeric_grad(f, fx.net.flat()));
  return {"clip surrogate gradient vs finite differences", err <= kGradTol,
          fmt("rel error %.3g", err)};
}

CheckLine check_clip_equivalence() {
  double worst = 0.0;
  for (int i = 0; i <= 40; ++i) {
    const double ratio = 0.05 * i;
    for (int j = -20; j <= 20; ++j) {
      const double adv = 0.25 * j;
      for (double eps : {0.05, 0.1, 0.2, 0.3, 0.5, 0.9}) {
        const double standard =
            std::min(ratio * adv, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv);
        worst = std::max(worst, std::abs(standard - clip_surrogate(ratio, adv, eps)));
      }
    }
  }
  return {"clip surrogate equals min(rA, clip(r) A) on a grid", worst <= 1e-12,
          fmt("max abs difference %.3g", worst)};
}

CheckLine check_softmax_fixed_point() {
  Rng rng(29);
  const SoftmaxParams p = random_params(4, 3, rng);
  const std::vector<SoftmaxParams> copies(3, p);
  const PolicyTable before = to_policy(p);
  const PolicyTable after = to_policy(aggregate_softmax(copies));
  const double err = (before.probs - after.probs).cwiseAbs().maxCoeff();
  return {"policy-level aggregation of identical agents is a fixed point", err <= 1e-12,
          fmt("max abs error %.3g", err)};
}

CheckLine check_mean_fixed_point() {
  NetFixture fx = net_fixture(2);
  const Vector flat = fx.net.flat();
  const std::vector<Vector> copies(4, flat);
  const double err = (aggregate_params_mean(copies) - flat).cwiseAbs().maxCoeff();
  return {"parameter averaging of identical agents is a fixed point", err <= 1e-15,
          fmt("max abs error %.3g", err)};
}

CheckLine check_payload_privacy() {
  FederationConfig fed;
  fed.n_agents = 2;
  fed.local_steps = 1;
  fed.total_steps = 2;
  fed.lr_theta = 1e-4;
  fed.lambda_max = 1.0;
  PpoConfig cfg;
  cfg.horizon = 64;
  cfg.inner_iters = 2;
  cfg.hidden = {8};
  cfg.eval_episodes = 0;
  cfg.final_eval_episodes = 1;
  std::set<std::string> keys;
  int payloads = 0;
  PpoHooks hooks;
  hooks.on_communicate = [&](int, const CommPayload& p) {
    ++payloads;
    const nlohmann::json doc = nlohmann::json::parse(p.to_json());
    for (auto it = doc.begin(); it != doc.end(); ++it) keys.insert(it.key());
  };
  run_fedppo(cartpole_constrained, fed, cfg, hooks);
  const bool ok = payloads == 4 && keys == std::set<std::string>{"phi", "theta"};
  std::string seen;
  for (const std::string& k : keys) seen += (seen.empty() ? "" : ",") + k;
  return {"communication payload holds theta and phi only", ok,
          std::to_string(payloads) + " payloads, keys {" + seen + "}"};
}

}  // namespace

std::vector<CheckLine> run_selfcheck(const SelfcheckOptions& opts,
                                     const std::function<void(const CheckLine&)>& on_line) {
  std::vector<CheckLine> lines;
  auto add = [&](CheckLine line) {
    if (on_line) on_line(line);
    lines.push_back(std::move(line));
  };
  auto guarded = [&](const char* name, auto fn) {
    try {
      add(fn());
    } catch (const std::exception& e) {
      add({name, false, std::string("threw: ") + e.what()});
    }
  };
  guarded("lagrangian decomposition", check_decomposition);
  guarded("npg fisher oracle", check_npg_fisher);
  guarded("npg sample cosine", check_npg_sample_cosine);
  guarded("softmax log-prob gradient", check_log_prob_grad);
  guarded("network backward", check_net_backward);
  guarded("critic gradient", check_critic_grad);
  guarded("clip gradient", [&] { return check_clip_grad(opts.corrupt_clip_gradient); });
  guarded("clip equivalence", check_clip_equivalence);
  guarded("softmax fixed point", check_softmax_fixed_point);
  guarded("mean fixed point", check_mean_fixed_point);
  guarded("payload privacy", check_payload_privacy);
  return lines;
}

}  // namespace fedcrl
