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

#include "fedcrl/experiment.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fedcrl/errors.hpp"
#include "fedcrl/parallel.hpp"
#include "fedcrl/policy.hpp"

namespace fedcrl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

PolicyValues exact_values(const TabularCmdp& cmdp, const SoftmaxParams& params) {
  const std::vector<Evaluation> ev = evaluate_all(cmdp, to_policy(params));
  PolicyValues v;
  v.j_r = ev[0].j;
  for (int i = 0; i < cmdp.n_constraints(); ++i) v.j_c.push_back(ev[1 + i].j);
  return v;
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json values_json(const PolicyValues& v) { return {{"j_r", v.j_r}, {"j_c", v.j_c}}; }

}  // namespace

TabularCmdp build_tabular_env(const RunConfig& cfg) {
  switch (cfg.env.kind) {
    case EnvKind::kRandomMdp:
      return random_mdp(cfg.env.instance_seed.value_or(cfg.federation.seed), cfg.env.random_mdp);
    case EnvKind::kWindyCliff: {
      GridSpec spec = GridSpec::windy_cliff(cfg.env.wind_prob);
      spec.discount = cfg.env.grid_discount;
      return windycliff(spec);
    }
    case EnvKind::kFile:
      return load_cmdp(cfg.env.path);
    case EnvKind::kCartPole:
      break;
  }
  throw ValidationError("env.name", env_name(cfg.env.kind) + " is not tabular");
}

RunOutcome run_experiment(const RunConfig& cfg, const std::string& out_dir) {
  RunOutcome outcome;
  json summary;
  summary["env"] = env_name(cfg.env.kind);
  summary["mode"] = mode_name(cfg);
  summary["seed"] = cfg.federation.seed;

  std::vector<std::pair<std::string, std::string>> checkpoints;

  if (cfg.env.tabular()) {
    const TabularCmdp cmdp = build_tabular_env(cfg);
    TrainResult result;
    switch (cfg.mode) {
      case RunMode::kFedNpg:
        result = run_fednpg(cmdp, cfg.federation);
        break;
      case RunMode::kLocal:
        result = run_baseline_local(cmdp, cfg.local_index, cfg.federation);
        break;
      case RunMode::kOmniscient:
        result = run_baseline_omniscient(cmdp, cfg.federation);
        break;
      case RunMode::kFedPpo:
        throw ValidationError("mode", "fedppo needs an episodic environment");
    }
    outcome.n_constraints = cmdp.n_constraints();
    outcome.logs = std::move(result.logs);
    outcome.final_values = exact_values(cmdp, result.final_params);
    outcome.thresholds = cmdp.thresholds;
    outcome.final_lambdas = result.final_lambdas;
    outcome.truncations = result.truncations;
    if (cfg.mode == RunMode::kOmniscient) {
      outcome.reference = outcome.final_values;
    } else if (cfg.reference) {
      outcome.reference =
          exact_values(cmdp, run_baseline_omniscient(cmdp, cfg.federation).final_params);
    }
    checkpoints.emplace_back("policy.json", softmax_to_json(result.final_params));
    if (result.uniform_iterate) {
      checkpoints.emplace_back("uniform_iterate.json", softmax_to_json(*result.uniform_iterate));
      summary["uniform_iterate"] = values_json(exact_values(cmdp, *result.uniform_iterate));
    }
    checkpoints.emplace_back("env.json", cmdp_to_json(cmdp));
    if (cfg.env.kind == EnvKind::kWindyCliff) {
      const SignalScale scale = windycliff_scale();
      std::vector<double> raw_j_c;
      std::vector<double> raw_d;
      for (int i = 0; i < cmdp.n_constraints(); ++i) {
        raw_j_c.push_back(scale.cost_scale * outcome.final_values.j_c[i]);
        raw_d.push_back(scale.cost_scale * cmdp.thresholds[i]);
      }
      summary["raw_scale"] = {{"reward_scale", scale.reward_scale},
                              {"reward_offset", scale.reward_offset},
                              {"cost_scale", scale.cost_scale},
                              {"j_c", raw_j_c},
                              {"thresholds", raw_d}};
    }
  } else {
    const EnvFactory factory = cartpole_constrained;
    PpoTrainResult result;
    switch (cfg.mode) {
      case RunMode::kFedPpo:
        result = run_fedppo(factory, cfg.federation, cfg.ppo);
        break;
      case RunMode::kLocal:
        result = run_ppo_local(factory, cfg.local_index, cfg.federation, cfg.ppo);
        break;
      case RunMode::kOmniscient:
        result = run_ppo_omniscient(factory, cfg.federation, cfg.ppo);
        break;
      case RunMode::kFedNpg:
        throw ValidationError("mode", "fednpg needs a tabular environment");
    }
    const std::unique_ptr<EpisodicEnv> probe = factory();
    outcome.n_constraints = probe->n_costs();
    outcome.logs = std::move(result.logs);
    outcome.final_values = {result.final_score.mean_reward, result.final_score.mean_costs};
    outcome.thresholds = probe->budgets();
    outcome.final_lambdas = result.final_lambdas;
    if (cfg.mode == RunMode::kOmniscient) {
      outcome.reference = outcome.final_values;
    } else if (cfg.reference) {
      const PpoTrainResult ref = run_ppo_omniscient(factory, cfg.federation, cfg.ppo);
      outcome.reference = PolicyValues{ref.final_score.mean_reward, ref.final_score.mean_costs};
    }
    summary["final_episodes"] = result.final_score.episodes;
    summary["optimizer"] = cfg.ppo.optimizer == OptimizerKind::kAdam ? "adam" : "sgd";
    checkpoints.emplace_back("policy.json", result.policy.to_json());
    checkpoints.emplace_back("reward_critic.json", result.reward_critic.to_json());
  }

  outcome.metrics =
      compute_metrics_lenient(outcome.final_values, outcome.reference, outcome.thresholds);

  if (out_dir.empty()) return outcome;

  summary["final"] = values_json(outcome.final_values);
  summary["final"]["lambdas"] = outcome.final_lambdas;
  summary["thresholds"] = outcome.thresholds;
  summary["reference"] = outcome.reference ? values_json(*outcome.reference) : json(nullptr);
  summary["metrics"] = {{"rr", optional_number(outcome.metrics.rr)},
                        {"mvr", optional_number(outcome.metrics.mvr)},
                        {"mrvr", optional_number(outcome.metrics.mrvr)}};
  summary["truncations"] = outcome.truncations;

  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir / "checkpoints", ec);
  if (ec) throw IoError("cannot create " + (dir / "checkpoints").string() + ": " + ec.message());
  write_text(dir / "run.json", cfg.effective_json);
  write_csv(outcome.logs, outcome.n_constraints, (dir / "metrics.csv").string());
  write_text(dir / "summary.json", summary.dump(2));
  for (const auto& [name, text] : checkpoints) write_text(dir / "checkpoints" / name, text);
  return outcome;
}

SweepOutcome run_sweep(const std::string& config_text, const std::vector<std::string>& overrides,
                       const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                       int workers) {
  if (seeds.empty()) throw ValidationError("seeds", "need at least one seed");
  // Validate once up front so a broken config fails as a usage error.
  const RunConfig base = parse_config(config_text, overrides);
  int n_constraints = 0;
  if (base.env.tabular()) {
    n_constraints = base.env.kind == EnvKind::kRandomMdp ? base.env.random_mdp.n_constraints
                                                         : build_tabular_env(base).n_constraints();
  } else {
    n_constraints = cartpole_constrained()->n_costs();
  }

  std::vector<SeedSummary> per_seed(seeds.size());
  const int slots = std::max(1, std::min<int>(workers, static_cast<int>(seeds.size())));
  parallel_for(static_cast<int>(seeds.size()), slots, [&](int i) {
    SeedSummary& row = per_seed[i];
    row.label = std::to_string(seeds[i]);
    row.j_c.assign(n_constraints, std::nullopt);
    try {
      std::vector<std::string> seeded = overrides;
      seeded.push_back("federation.seed=" + std::to_string(seeds[i]));
      RunConfig cfg = parse_config(config_text, seeded);
      if (slots > 1) cfg.federation.threads = 1;
      const RunOutcome out =
          run_experiment(cfg, (fs::path(out_dir) / ("seed_" + row.label)).string());
      row.j_r = out.final_values.j_r;
      for (int j = 0; j < n_constraints; ++j) row.j_c[j] = out.final_values.j_c[j];
      row.metrics = out.metrics;
    } catch (const std::exception& e) {
      std::string msg = e.what();
      for (char& c : msg) {
        if (c == ',' || c == '\n') c = ';';
      }
      row.status = "error: " + msg;
    }
  });

  SweepOutcome outcome;
  std::vector<SeedSummary> ok;
  for (const SeedSummary& r : per_seed) {
    if (r.status == "ok") {
      ok.push_back(r);
    } else {
      ++outcome.failures;
    }
  }
  std::vector<SeedSummary> stats = summarize_seeds(ok, n_constraints);
  outcome.rows = per_seed;
  outcome.rows.push_back(stats[stats.size() - 2]);
  outcome.rows.push_back(stats.back());
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  write_summary_csv(outcome.rows, n_constraints, (fs::path(out_dir) / "summary.csv").string());
  return outcome;
}

void generate_env(const std::string& name, std::uint64_t seed, const std::string& path) {
  const RunConfig cfg =
      parse_config(json{{"env", name}, {"federation", {{"seed", seed}}}}.dump());
  if (!cfg.env.tabular()) {
    throw ValidationError("env.name", name + " has no tabular form; only random-mdp and "
                                             "windy-cliff can be generated");
  }
  save_cmdp(build_tabular_env(cfg), path);
}

}  // namespace fedcrl
