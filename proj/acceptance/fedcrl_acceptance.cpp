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


// Acceptance runner: one PASS/FAIL line per criterion, tolerances pinned
// below. Exit status is 1 when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedcrl/config.hpp"
#include "fedcrl/envs.hpp"
#include "fedcrl/experiment.hpp"
#include "fedcrl/fed.hpp"
#include "fedcrl/metrics.hpp"
#include "fedcrl/npg.hpp"
#include "support.hpp"

namespace fedcrl::acceptance {
namespace {

namespace fs = std::filesystem;
namespace oracle = fedcrl::testing;

// Tolerances and budgets.
constexpr double kOracleRelTol = 1e-6;
constexpr double kCosineMin = 0.9;
constexpr int kCosineSamples = 10000;
constexpr double kDecompositionTol = 1e-10;
constexpr double kReductionFraction = 0.95;
constexpr double kReductionLr = 1e-2;
constexpr int kReductionSteps = 5000;
constexpr int kTabularSeeds = 5;
constexpr int kTabularSeedsNeeded = 4;
constexpr double kRandomMdpMvrMax = 1.05;
constexpr double kRandomMdpRrMin = 0.85;
constexpr double kWindyMvrMax = 1.05;
constexpr int kCartPoleSeeds = 3;
constexpr int kCartPoleSeedsNeeded = 2;
constexpr double kCartPoleRewardMin = 150.0;
constexpr double kCartPoleCostFactor = 1.25;

struct Result {
  bool pass = false;
  std::string detail;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Vector flatten(const RowMatrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

class Runner {
 public:
  explicit Runner(fs::path out) : out_(std::move(out)) {}

  Result npg_oracle() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      RandomMdpParams p;
      p.feasibility_screen = false;
      const TabularCmdp m = random_mdp(seed, p);
      const SoftmaxParams params = oracle::random_params(3, 5, 500 + seed);
      for (const Signal signal : {Signal::reward(), Signal::cost(0)}) {
        const Matrix& table = signal.kind == Signal::Kind::kReward ? m.reward : m.costs[0];
        const Vector expected = oracle::pinv_symmetric(oracle::explicit_fisher(m, params)) *
                                oracle::explicit_policy_gradient(m, params, table);
        const Vector got = flatten(oracle::center_rows(exact_npg_direction(m, params, signal)));
        worst = std::max(worst, (got - expected).norm() / expected.norm());
      }
    }
    return {worst <= kOracleRelTol, fmt("worst relative error %.3g over 10 instances", worst)};
  }

  Result npg_sample_cosine() {
    const double at_k = mean_cosine(kCosineSamples);
    const double at_10k = mean_cosine(10 * kCosineSamples);
    return {at_k >= kCosineMin,
            fmt("mean cosine %.4f at K=%d (need >= %.2f); %.4f at K=%d", at_k, kCosineSamples,
                kCosineMin, at_10k, 10 * kCosineSamples)};
  }

  Result decomposition() {
    Rng rng(2026);
    std::uniform_real_distribution<double> lam(0.0, 10.0);
    std::vector<TabularCmdp> instances;
    for (std::uint64_t i = 0; i < 5; ++i) instances.push_back(random_mdp(i));
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
      const TabularCmdp& m = instances[draw % 5];
      const SoftmaxParams params = oracle::random_params(3, 5, 9000 + draw, 3.0);
      std::vector<double> lambdas(m.n_constraints());
      for (double& l : lambdas) l = lam(rng);
      const LagrangianValue v = lagrangian_value(m, params, lambdas);
      double sum = 0.0;
      for (double l : v.local) sum += l;
      worst = std::max(worst, std::abs(v.l0 - sum));
    }
    return {worst <= kDecompositionTol, fmt("worst |L0 - sum L_i| %.3g over 100 draws", worst)};
  }

  Result unconstrained_reduction() {
    const RunConfig cfg = parse_config(
        R"({"env": "random-mdp", "reference": false,
            "federation": {"n_agents": 1, "constraint_assignment": [[0, 1, 2, 3]],
                           "freeze_lambda": true, "estimator": "exact"}})",
        {"federation.total_steps=" + std::to_string(kReductionSteps),
         "federation.lr_theta=" + fmt("%g", kReductionLr)});
    const RunOutcome out = run_experiment(cfg, (out_ / "unconstrained").string());
    const double optimum = oracle::optimal_reward_value(build_tabular_env(cfg));
    const double ratio = out.final_values.j_r / optimum;
    bool lambdas_zero = true;
    for (double l : out.final_lambdas) lambdas_zero = lambdas_zero && l == 0.0;
    return {ratio >= kReductionFraction && lambdas_zero,
            fmt("J_r %.4f of optimum %.4f (ratio %.4f, need >= %.2f) after %d exact steps",
                out.final_values.j_r, optimum, ratio, kReductionFraction, kReductionSteps)};
  }

  Result random_mdp_reproduction() {
    const std::vector<RunOutcome>& runs = random_mdp_runs();
    int mvr_ok = 0;
    int rr_ok = 0;
    std::string per_seed;
    for (std::size_t s = 0; s < runs.size(); ++s) {
      const LenientMetrics& m = runs[s].metrics;
      if (m.mvr && *m.mvr <= kRandomMdpMvrMax) ++mvr_ok;
      if (m.rr && *m.rr >= kRandomMdpRrMin) ++rr_ok;
      per_seed += fmt(" [%zu] mvr %.3f rr %.3f", s, m.mvr.value_or(NAN), m.rr.value_or(NAN));
    }
    return {mvr_ok >= kTabularSeedsNeeded && rr_ok >= kTabularSeedsNeeded,
            fmt("mvr<=%.2f on %d/%d, rr>=%.2f on %d/%d;", kRandomMdpMvrMax, mvr_ok,
                kTabularSeeds, kRandomMdpRrMin, rr_ok, kTabularSeeds) +
                per_seed};
  }

  Result violation_trend() {
    const std::vector<RunOutcome>& runs = random_mdp_runs();
    int ok = 0;
    std::string per_seed;
    for (std::size_t s = 0; s < runs.size(); ++s) {
      std::vector<double> v;
      for (const RoundLog& row : runs[s].logs) {
        if (row.aggregated) v.push_back(max_violation(row.j_c, runs[s].thresholds));
      }
      const std::size_t third = v.size() / 3;
      double first = 0.0;
      double last = 0.0;
      for (std::size_t i = 0; i < third; ++i) {
        first += v[i];
        last += v[v.size() - third + i];
      }
      first /= std::max<std::size_t>(third, 1);
      last /= std::max<std::size_t>(third, 1);
      if (third > 0 && last <= first) ++ok;
      per_seed += fmt(" [%zu] %.4f->%.4f", s, first, last);
    }
    return {ok >= kTabularSeedsNeeded,
            fmt("last-third mean violation <= first-third on %d/%d;", ok, kTabularSeeds) +
                per_seed};
  }

  Result windy_cliff() {
    int ok = 0;
    std::string per_seed;
    // Local baselines: ratio J_cj / d_j of constraints agent k never sees.
    std::ofstream local(out_ / "windy_cliff_local.csv");
    local << "seed,k,constraint,j_c,threshold,ratio\n";
    std::vector<double> worst_off(3, 0.0);
    for (int s = 0; s < kTabularSeeds; ++s) {
      const std::string seed = "federation.seed=" + std::to_string(s);
      const RunConfig cfg = parse_config(R"({"env": "windy-cliff", "reference": false})", {seed});
      const RunOutcome out =
          run_experiment(cfg, (out_ / "windy_cliff" / ("seed_" + std::to_string(s))).string());
      const double mvr = out.metrics.mvr.value_or(INFINITY);
      if (mvr <= kWindyMvrMax) ++ok;
      per_seed += fmt(" [%d] mvr %.3f", s, mvr);
      for (int k = 0; k < 3; ++k) {
        const RunConfig lc = parse_config(R"({"env": "windy-cliff", "reference": false})",
                                          {seed, "mode=local:" + std::to_string(k)});
        const RunOutcome lo = run_experiment(lc, "");
        for (int j = 0; j < 3; ++j) {
          if (j == k) continue;
          const double ratio = lo.final_values.j_c[j] / lo.thresholds[j];
          worst_off[k] = std::max(worst_off[k], ratio);
          local << s << ',' << k << ',' << j << ',' << format_real(lo.final_values.j_c[j]) << ','
                << format_real(lo.thresholds[j]) << ',' << format_real(ratio) << '\n';
        }
      }
    }
    return {ok >= kTabularSeedsNeeded,
            fmt("mvr<=%.2f on %d/%d;", kWindyMvrMax, ok, kTabularSeeds) + per_seed +
                fmt("; local k worst unseen ratio %.2f %.2f %.2f (windy_cliff_local.csv)",
                    worst_off[0], worst_off[1], worst_off[2])};
  }

  Result fedppo_mechanics() {
    int seen = 0;
    std::string detail;
    for (const CheckLine& line : run_selfcheck({})) {
      if (!is_ppo_check(line.name)) continue;
      ++seen;
      if (!line.pass) detail += "; failed: " + line.name + " (" + line.detail + ")";
    }
    return {seen == 5 && detail.empty(),
            fmt("%d of 5 checks (payload keys, network, critic and clip gradients at rel <= "
                "1e-4, clip grid)",
                seen) +
                detail};
  }

  Result cartpole() {
    int ok = 0;
    std::string per_seed;
    for (int s = 0; s < kCartPoleSeeds; ++s) {
      const RunConfig cfg =
          parse_config(R"({"env": "cartpole-c"})", {"federation.seed=" + std::to_string(s)});
      const RunOutcome out =
          run_experiment(cfg, (out_ / "cartpole" / ("seed_" + std::to_string(s))).string());
      bool pass = out.final_values.j_r >= kCartPoleRewardMin;
      for (std::size_t i = 0; i < out.thresholds.size(); ++i) {
        pass = pass && out.final_values.j_c[i] <= kCartPoleCostFactor * out.thresholds[i];
      }
      if (pass) ++ok;
      per_seed += fmt(" [%d] reward %.1f costs %.1f %.1f", s, out.final_values.j_r,
                      out.final_values.j_c[0], out.final_values.j_c[1]);
    }
    return {ok >= kCartPoleSeedsNeeded,
            fmt("reward>=%.0f and costs<=%.2fxbudget on %d/%d;", kCartPoleRewardMin,
                kCartPoleCostFactor, ok, kCartPoleSeeds) +
                per_seed};
  }

  Result determinism() {
    struct Case {
      const char* name;
      const char* config;
      std::vector<std::string> overrides;
    };
    const std::vector<Case> cases = {
        {"random-mdp", R"({"env": "random-mdp"})",
         {"federation.total_steps=2000", "federation.log_every=1", "federation.seed=5"}},
        {"windy-cliff", R"({"env": "windy-cliff", "reference": false})",
         {"federation.total_steps=500", "federation.log_every=1"}},
        {"cartpole-c", R"({"env": "cartpole-c"})",
         {"federation.total_steps=3", "ppo.horizon=2000", "federation.seed=2"}},
    };
    std::string detail;
    bool all = true;
    for (const Case& c : cases) {
      std::vector<std::string> csv;
      for (int threads : {1, 1, 2}) {
        RunConfig cfg = parse_config(c.config, c.overrides);
        cfg.federation.threads = threads;
        const fs::path dir = out_ / "determinism" / c.name / std::to_string(csv.size());
        run_experiment(cfg, dir.string());
        csv.push_back(slurp(dir / "metrics.csv"));
      }
      const bool same = csv[0] == csv[1] && csv[0] == csv[2] && !csv[0].empty();
      all = all && same;
      detail += fmt("%s%s %s", detail.empty() ? "" : "; ", c.name, same ? "identical" : "differ");
    }
    return {all, detail + " (two repeats plus a 2-thread run)"};
  }

 private:
  static bool is_ppo_check(const std::string& name) {
    for (const char* key : {"payload", "network", "critic", "clip"}) {
      if (name.find(key) != std::string::npos) return true;
    }
    return false;
  }

  static double mean_cosine(int samples) {
    const TabularCmdp m = random_mdp(0);
    const SoftmaxParams params = SoftmaxParams::zeros(m.n_states, m.n_actions);
    const Vector exact = flatten(oracle::center_rows(exact_npg_direction(m, params, Signal::reward())));
    CompatSgdConfig cfg;
    cfg.n_samples = samples;
    double sum = 0.0;
    for (int seed = 0; seed < 5; ++seed) {
      Rng rng(100 + seed);
      const Vector w =
          flatten(oracle::center_rows(sgd_compatible(m, params, Signal::reward(), cfg, rng).w));
      sum += w.dot(exact) / (w.norm() * exact.norm());
    }
    return sum / 5.0;
  }

  const std::vector<RunOutcome>& random_mdp_runs() {
    if (!random_mdp_runs_) {
      std::vector<RunOutcome> runs;
      for (int s = 0; s < kTabularSeeds; ++s) {
        const RunConfig cfg =
            parse_config(R"({"env": "random-mdp"})", {"federation.seed=" + std::to_string(s)});
        runs.push_back(
            run_experiment(cfg, (out_ / "random_mdp" / ("seed_" + std::to_string(s))).string()));
      }
      random_mdp_runs_ = std::move(runs);
    }
    return *random_mdp_runs_;
  }

  fs::path out_;
  std::optional<std::vector<RunOutcome>> random_mdp_runs_;
};

struct Criterion {
  const char* name;
  double budget_seconds;
  Result (Runner::*run)();
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {"npg_oracle", 10, &Runner::npg_oracle},
      {"npg_sample_cosine", 300, &Runner::npg_sample_cosine},
      {"decomposition", 60, &Runner::decomposition},
      {"unconstrained_reduction", 120, &Runner::unconstrained_reduction},
      {"random_mdp", 1800, &Runner::random_mdp_reproduction},
      {"violation_trend", 1800, &Runner::violation_trend},
      {"windy_cliff", 1800, &Runner::windy_cliff},
      {"fedppo_mechanics", 60, &Runner::fedppo_mechanics},
      {"cartpole", 7200, &Runner::cartpole},
      {"determinism", 600, &Runner::determinism},
  };
  return list;
}

}  // namespace
}  // namespace fedcrl::acceptance

int main(int argc, char** argv) {
  using namespace fedcrl::acceptance;
  CLI::App app{"fedcrl acceptance criteria"};
  std::vector<std::string> only;
  std::string out = "acceptance_runs";
  bool list = false;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--out", out, "Directory for run artifacts");
  app.add_flag("--list", list, "Print criterion names and exit");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const Criterion& c : criteria()) std::printf("%s\n", c.name);
    return 0;
  }
  for (const std::string& name : only) {
    const bool known = std::any_of(criteria().begin(), criteria().end(),
                                   [&](const Criterion& c) { return name == c.name; });
    if (!known) {
      std::fprintf(stderr, "unknown criterion '%s' (see --list)\n", name.c_str());
      return 2;
    }
  }

  Runner runner{std::filesystem::path(out)};
  int failures = 0;
  for (const Criterion& c : criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Result r;
    try {
      r = (runner.*c.run)();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs <= c.budget_seconds;
    const bool pass = r.pass && in_budget;
    if (!pass) ++failures;
    std::printf("%s  %s: %s [%.1f s%s]\n", pass ? "PASS" : "FAIL", c.name, r.detail.c_str(), secs,
                in_budget ? "" : fmt(", over %.0f s budget", c.budget_seconds).c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
