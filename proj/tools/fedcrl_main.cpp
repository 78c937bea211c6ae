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


// fedcrl command-line tool. Talks to the library only through the C API.
//
// Exit codes: 0 success, 1 failed property or runtime error, 2 usage or
// configuration error.

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedcrl/fedcrl.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int report(fedcrl_status status) {
  // Validation messages already lead with the field path.
  std::fprintf(stderr, "fedcrl: %s\n", fedcrl_last_error());
  switch (status) {
    case FEDCRL_ERR_VALIDATION:
    case FEDCRL_ERR_INVALID_ARGUMENT:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

struct ConfigArgs {
  std::string path;
  std::string env;
  std::vector<std::string> sets;
  std::string mode;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  auto* config = cmd->add_option("--config", args.path, "JSON run configuration")
                     ->check(CLI::ExistingFile);
  auto* env = cmd->add_option("--env", args.env,
                              "start from the defaults of an environment instead of a file");
  config->excludes(env);
  cmd->add_option("--set", args.sets, "override, e.g. federation.lr_theta=0.001 (repeatable)")
      ->allow_extra_args(false);
  cmd->add_option("--mode", args.mode, "fednpg | fedppo | local:K | omniscient");
}

// Owns a parsed config; config errors are usage errors.
class Config {
 public:
  Config() = default;
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  ~Config() { fedcrl_config_free(cfg_); }

  int load(const ConfigArgs& args, const std::vector<std::string>& extra) {
    std::vector<std::string> overrides = args.sets;
    if (!args.mode.empty()) overrides.push_back("mode=" + args.mode);
    overrides.insert(overrides.end(), extra.begin(), extra.end());
    std::vector<const char*> raw;
    for (const std::string& s : overrides) raw.push_back(s.c_str());

    fedcrl_status st;
    if (!args.path.empty()) {
      st = fedcrl_config_load(args.path.c_str(), raw.data(), raw.size(), &cfg_);
    } else if (!args.env.empty()) {
      const std::string text = "{\"env\": \"" + args.env + "\"}";
      st = fedcrl_config_parse(text.c_str(), raw.data(), raw.size(), &cfg_);
    } else {
      std::fprintf(stderr, "fedcrl: one of --config or --env is required\n");
      return kExitUsage;
    }
    if (st != FEDCRL_OK) {
      report(st);
      return kExitUsage;
    }
    return kExitOk;
  }

  std::string output() const {
    char* out = nullptr;
    if (fedcrl_config_output(cfg_, &out) != FEDCRL_OK) return {};
    std::string s = out;
    fedcrl_string_free(out);
    return s;
  }

  const fedcrl_config* get() const { return cfg_; }

 private:
  fedcrl_config* cfg_ = nullptr;
};

std::string metric(double v, int defined) {
  if (!defined) return "undefined";
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

bool parse_seeds(const std::string& text, std::vector<std::uint64_t>& seeds) {
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) return false;
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      return false;
    }
  }
  return !seeds.empty();
}

void print_line(const char* name, int pass, const char* detail, void* /*user*/) {
  std::printf("%s  %s: %s\n", pass ? "PASS" : "FAIL", name, detail);
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated constrained reinforcement learning experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fedcrl_version()));

  ConfigArgs run_args;
  std::string run_out;
  std::int64_t run_seed = -1;
  auto* run = app.add_subcommand("run", "train one configuration and write a run directory");
  add_config_options(run, run_args);
  run->add_option("--out", run_out, "run directory (default: the config's output)");
  run->add_option("--seed", run_seed, "federation seed")->check(CLI::NonNegativeNumber);

  ConfigArgs sweep_args;
  std::string sweep_out;
  std::string sweep_seeds;
  auto* sweep = app.add_subcommand("sweep", "one run per seed plus summary.csv");
  add_config_options(sweep, sweep_args);
  sweep->add_option("--out", sweep_out, "sweep directory (default: the config's output)");
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds, e.g. 0,1,2")->required();

  bool corrupt = false;
  auto* selfcheck = app.add_subcommand("selfcheck", "run the fast invariant suite");
  selfcheck->add_flag("--corrupt-clip-gradient", corrupt, "negative control")->group("");

  std::string gen_env;
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  auto* gen = app.add_subcommand("gen-env", "write a tabular environment as JSON");
  gen->add_option("--env", gen_env, "random-mdp | windy-cliff")->required();
  gen->add_option("--seed", gen_seed, "instance seed (random-mdp)");
  gen->add_option("--out", gen_out, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*run) {
    std::vector<std::string> extra;
    if (run_seed >= 0) extra.push_back("federation.seed=" + std::to_string(run_seed));
    Config cfg;
    if (int rc = cfg.load(run_args, extra); rc != kExitOk) return rc;
    const std::string out = run_out.empty() ? cfg.output() : run_out;
    fedcrl_run_summary s{};
    const fedcrl_status st = fedcrl_run(cfg.get(), out.c_str(), &s);
    if (st != FEDCRL_OK) return report(st);
    std::printf("wrote %s\nj_r %.6g  rr %s  mvr %s  mrvr %s\n", out.c_str(), s.j_r,
                metric(s.rr, s.rr_defined).c_str(), metric(s.mvr, s.mvr_defined).c_str(),
                metric(s.mrvr, s.mrvr_defined).c_str());
    return kExitOk;
  }

  if (*sweep) {
    std::vector<std::uint64_t> seeds;
    if (!parse_seeds(sweep_seeds, seeds)) {
      std::fprintf(stderr, "fedcrl: --seeds: expected comma-separated non-negative integers\n");
      return kExitUsage;
    }
    Config cfg;
    if (int rc = cfg.load(sweep_args, {}); rc != kExitOk) return rc;
    const std::string out = sweep_out.empty() ? cfg.output() : sweep_out;
    int failed = 0;
    const fedcrl_status st = fedcrl_sweep(cfg.get(), seeds.data(), seeds.size(), out.c_str(), 0,
                                          &failed);
    if (st == FEDCRL_ERR_CHECK_FAILED) {
      std::fprintf(stderr, "fedcrl: %d of %zu seeds failed; see %s/summary.csv\n", failed,
                   seeds.size(), out.c_str());
      return kExitFailure;
    }
    if (st != FEDCRL_OK) return report(st);
    std::printf("wrote %s/summary.csv (%zu seeds)\n", out.c_str(), seeds.size());
    return kExitOk;
  }

  if (*selfcheck) {
    int failed = 0;
    const fedcrl_status st = fedcrl_selfcheck(corrupt ? 1 : 0, print_line, nullptr, &failed);
    if (st == FEDCRL_ERR_CHECK_FAILED) {
      std::printf("%d check(s) failed\n", failed);
      return kExitFailure;
    }
    if (st != FEDCRL_OK) return report(st);
    std::printf("all checks passed\n");
    return kExitOk;
  }

  const fedcrl_status st = fedcrl_gen_env(gen_env.c_str(), gen_seed, gen_out.c_str());
  if (st != FEDCRL_OK) return report(st);
  std::printf("wrote %s\n", gen_out.c_str());
  return kExitOk;
}
