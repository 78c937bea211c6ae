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

#ifndef FEDCRL_EXPERIMENT_HPP_
#define FEDCRL_EXPERIMENT_HPP_

// Experiment drivers behind the command line: single runs, seed sweeps, the
// invariant self-check and environment generation.
//
// Run directory layout:
//   run.json        effective configuration (loadable, reproduces the run)
//   metrics.csv     RoundLog rows
//   summary.json    final values, metrics against the reference, counters
//   checkpoints/    final policy (and reward critic for episodic runs)

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedcrl/config.hpp"
#include "fedcrl/metrics.hpp"

namespace fedcrl {

// Builds the tabular CMDP a config describes (instance seed resolved).
TabularCmdp build_tabular_env(const RunConfig& cfg);

struct RunOutcome {
  int n_constraints = 0;
  std::vector<RoundLog> logs;
  PolicyValues final_values;  // exact for tabular runs, scored episodes otherwise
  std::vector<double> thresholds;
  std::vector<double> final_lambdas;
  std::optional<PolicyValues> reference;
  LenientMetrics metrics;
  long truncations = 0;
};

// Trains the configured mode. When out_dir is non-empty the run directory is
// written there.
RunOutcome run_experiment(const RunConfig& cfg, const std::string& out_dir);

struct SweepOutcome {
  std::vector<SeedSummary> rows;  // per seed, then mean and se
  int failures = 0;
};

// One run per seed under out_dir/seed_<s>, plus out_dir/summary.csv. Seeds run
// in up to `workers` parallel slots; a failing seed is recorded, not fatal.
SweepOutcome run_sweep(const std::string& config_text, const std::vector<std::string>& overrides,
                       const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                       int workers);

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SelfcheckOptions {
  // Negative control: perturbs the analytic clip-surrogate gradient.
  bool corrupt_clip_gradient = false;
};

std::vector<CheckLine> run_selfcheck(const SelfcheckOptions& opts,
                                     const std::function<void(const CheckLine&)>& on_line = {});

// Writes the JSON form of a tabular environment (random-mdp uses `seed`).
void generate_env(const std::string& name, std::uint64_t seed, const std::string& path);

}  // namespace fedcrl

#endif  // FEDCRL_EXPERIMENT_HPP_
