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

#ifndef FEDCRL_CONFIG_HPP_
#define FEDCRL_CONFIG_HPP_

// Run configuration: strict JSON schema, per-environment defaults and dotted
// overrides. The effective document is what gets echoed to run.json.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedcrl/envs.hpp"
#include "fedcrl/fed.hpp"
#include "fedcrl/ppo.hpp"

namespace fedcrl {

enum class EnvKind { kRandomMdp, kWindyCliff, kCartPole, kFile };

struct EnvConfig {
  EnvKind kind = EnvKind::kRandomMdp;
  RandomMdpParams random_mdp;
  // Instance seed for random-mdp; unset follows federation.seed.
  std::optional<std::uint64_t> instance_seed;
  double wind_prob = 0.4;
  double grid_discount = 0.95;
  std::string path;  // kind == kFile

  bool tabular() const { return kind != EnvKind::kCartPole; }
};

enum class RunMode { kFedNpg, kFedPpo, kLocal, kOmniscient };

struct RunConfig {
  EnvConfig env;
  RunMode mode = RunMode::kFedNpg;
  int local_index = 0;  // k for mode "local:k"
  FederationConfig federation;
  PpoConfig ppo;
  // Train the omniscient baseline as the reference for RR and mRVR.
  bool reference = true;
  std::string output;
  // Effective document, every key present.
  std::string effective_json;
};

// Parses text, applies "a.b=value" overrides (value read as JSON, else as a
// string), fills defaults for the named environment and validates. Throws
// ValidationError with the offending field path.
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Effective document for an environment name with nothing overridden.
std::string default_config_json(const std::string& env_name);

std::string env_name(EnvKind kind);
std::string mode_name(const RunConfig& cfg);

}  // namespace fedcrl

#endif  // FEDCRL_CONFIG_HPP_
