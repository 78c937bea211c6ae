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

#include "fedcrl/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedcrl/cmdp.hpp"
#include "fedcrl/errors.hpp"
#include "fedcrl/parallel.hpp"

namespace fedcrl {

using nlohmann::json;

namespace {

EnvKind parse_env_kind(const std::string& name) {
  if (name == "random-mdp") return EnvKind::kRandomMdp;
  if (name == "windy-cliff") return EnvKind::kWindyCliff;
  if (name == "cartpole-c") return EnvKind::kCartPole;
  if (name == "file") return EnvKind::kFile;
  throw ValidationError("env.name", "unknown environment '" + name +
                                        "' (expected random-mdp, windy-cliff, cartpole-c "
                                        "or file)");
}

json defaults_for(EnvKind kind) {
  json env;
  json fed = {{"n_agents", nullptr},
              {"local_steps", 5},
              {"total_steps", 100000},
              {"lr_theta", 1e-3},
              {"lr_lambda", 1e-3},
              {"lambda_max", 10.0},
              {"k_samples", 10},
              {"alpha", 0.125},
              {"seed", 0},
              {"estimator", "sample"},
              {"freeze_lambda", false},
              {"theta_box", nullptr},
              {"uniform_iterate", false},
              {"constraint_assignment", nullptr},
              {"log_every", 100}};
  json ppo = {{"clip", 0.2},
              {"inner_iters", 10},
              {"horizon", 10000},
              {"discount", 0.99},
              {"cost_discount", 1.0},
              {"lr_phi", 1e-4},
              {"lr_psi", 1e-4},
              {"optimizer", "sgd"},
              {"hidden", {64, 64}},
              {"policy_output_scale", 0.01},
              {"eval_episodes", 5},
              {"final_eval_episodes", 20}};
  std::string mode = "fednpg";
  bool reference = true;
  switch (kind) {
    case EnvKind::kRandomMdp: {
      const RandomMdpParams p;
      env = {{"name", "random-mdp"},
             {"n_states", p.n_states},
             {"n_actions", p.n_actions},
             {"n_constraints", p.n_constraints},
             {"hardness", p.hardness},
             {"discount", p.discount},
             {"feasibility_screen", p.feasibility_screen},
             {"screen_margin", p.screen_margin},
             {"max_retries", p.max_retries},
             {"instance_seed", nullptr}};
      break;
    }
    case EnvKind::kWindyCliff:
      env = {{"name", "windy-cliff"}, {"wind_prob", 0.4}, {"discount", 0.95}};
      fed["total_steps"] = 150000;
      fed["lr_theta"] = 3e-4;
      fed["lr_lambda"] = 3e-4;
      break;
    case EnvKind::kCartPole:
      env = {{"name", "cartpole-c"}};
      mode = "fedppo";
      reference = false;
      fed["local_steps"] = 1;
      fed["total_steps"] = 1000;
      fed["lr_theta"] = 1e-4;
      fed["lr_lambda"] = 1e-3;
      fed["lambda_max"] = 1.0;
      fed["log_every"] = 1;
      ppo["optimizer"] = "adam";
      break;
    case EnvKind::kFile:
      env = {{"name", "file"}, {"path", nullptr}};
      break;
  }
  return {{"env", env},     {"mode", mode},           {"federation", fed},
          {"ppo", ppo},     {"reference", reference},
          {"output", "runs/" + env["name"].get<std::string>()}};
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void apply_override(json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("--set", "expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ValidationError(key, "empty path component");
    parts.push_back(part);
  }
  json* node = &doc;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    json& child = (*node)[parts[i]];
    if (parts[i] == "env" && child.is_string() && node == &doc) {
      child = json{{"name", child.get<std::string>()}};
    }
    if (child.is_null()) child = json::object();
    if (!child.is_object()) throw ValidationError(key, "'" + parts[i] + "' is not an object");
    node = &child;
  }
  (*node)[parts.back()] = std::move(value);
}

// Every key of `user` must exist in `schema`; only object sections recurse.
void check_known(const json& user, const json& schema, const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = join(prefix, it.key());
    if (!schema.contains(it.key())) throw ValidationError(path, "unknown key");
    const json& expected = schema.at(it.key());
    if (expected.is_object()) {
      if (!it.value().is_object()) throw ValidationError(path, "expected an object");
      check_known(it.value(), expected, path);
    }
  }
}

// Shallow merge of each section; user values win.
json merge(json defaults, const json& user) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (defaults[it.key()].is_object()) {
      for (auto kv = it.value().begin(); kv != it.value().end(); ++kv) {
        defaults[it.key()][kv.key()] = kv.value();
      }
    } else {
      defaults[it.key()] = it.value();
    }
  }
  return defaults;
}

class Reader {
 public:
  Reader(const json& doc, std::string prefix) : doc_(doc), prefix_(std::move(prefix)) {}

  const json& at(const std::string& key) const { return doc_.at(key); }
  std::string path(const std::string& key) const { return join(prefix_, key); }

  double number(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number()) throw ValidationError(path(key), "expected a number");
    return v.get<double>();
  }
  long long integer(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) throw ValidationError(path(key), "expected an integer");
    return v.get<long long>();
  }
  int int32(const std::string& key) const {
    const long long v = integer(key);
    if (v < INT32_MIN || v > INT32_MAX) throw ValidationError(path(key), "out of range");
    return static_cast<int>(v);
  }
  bool boolean(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_boolean()) throw ValidationError(path(key), "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_string()) throw ValidationError(path(key), "expected a string");
    return v.get<std::string>();
  }
  std::uint64_t seed(const std::string& key) const {
    const json& v = at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
      throw ValidationError(path(key), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

 private:
  const json& doc_;
  std::string prefix_;
};

EnvConfig read_env(const json& doc) {
  const Reader r(doc, "env");
  EnvConfig env;
  env.kind = parse_env_kind(r.string("name"));
  switch (env.kind) {
    case EnvKind::kRandomMdp: {
      RandomMdpParams& p = env.random_mdp;
      p.n_states = r.int32("n_states");
      p.n_actions = r.int32("n_actions");
      p.n_constraints = r.int32("n_constraints");
      p.hardness = r.number("hardness");
      p.discount = r.number("discount");
      p.feasibility_screen = r.boolean("feasibility_screen");
      p.screen_margin = r.number("screen_margin");
      p.max_retries = r.int32("max_retries");
      if (!doc.at("instance_seed").is_null()) env.instance_seed = r.seed("instance_seed");
      if (p.n_states < 1) throw ValidationError("env.n_states", "must be >= 1");
      if (p.n_actions < 1) throw ValidationError("env.n_actions", "must be >= 1");
      if (p.n_constraints < 1) throw ValidationError("env.n_constraints", "must be >= 1");
      if (!(p.hardness > 0.0 && p.hardness <= 1.0)) {
        throw ValidationError("env.hardness", "must lie in (0, 1]");
      }
      if (!(p.discount >= 0.0 && p.discount < 1.0)) {
        throw ValidationError("env.discount", "must lie in [0, 1)");
      }
      if (!(p.screen_margin >= 0.0 && p.screen_margin < 1.0)) {
        throw ValidationError("env.screen_margin", "must lie in [0, 1)");
      }
      if (p.max_retries < 0) throw ValidationError("env.max_retries", "must be >= 0");
      break;
    }
    case EnvKind::kWindyCliff:
      env.wind_prob = r.number("wind_prob");
      env.grid_discount = r.number("discount");
      if (!(env.wind_prob >= 0.0 && env.wind_prob <= 1.0)) {
        throw ValidationError("env.wind_prob", "must lie in [0, 1]");
      }
      if (!(env.grid_discount >= 0.0 && env.grid_discount < 1.0)) {
        throw ValidationError("env.discount", "must lie in [0, 1)");
      }
      break;
    case EnvKind::kCartPole:
      break;
    case EnvKind::kFile:
      if (doc.at("path").is_null()) throw ValidationError("env.path", "required for env 'file'");
      env.path = r.string("path");
      break;
  }
  return env;
}

int constraint_count(const EnvConfig& env) {
  switch (env.kind) {
    case EnvKind::kRandomMdp:
      return env.random_mdp.n_constraints;
    case EnvKind::kWindyCliff:
      return 3;
    case EnvKind::kCartPole:
      return 2;
    case EnvKind::kFile:
      return load_cmdp(env.path).n_constraints();
  }
  return 0;
}

FederationConfig read_federation(const json& doc) {
  const Reader r(doc, "federation");
  FederationConfig f;
  f.n_agents = r.int32("n_agents");
  f.local_steps = r.int32("local_steps");
  f.total_steps = r.int32("total_steps");
  f.lr_theta = r.number("lr_theta");
  f.lr_lambda = r.number("lr_lambda");
  f.lambda_max = r.number("lambda_max");
  f.compat.n_samples = r.int32("k_samples");
  f.compat.step_size = r.number("alpha");
  f.seed = r.seed("seed");
  const std::string est = r.string("estimator");
  if (est == "sample") {
    f.estimator = Estimator::kSample;
  } else if (est == "exact") {
    f.estimator = Estimator::kExact;
  } else {
    throw ValidationError("federation.estimator", "expected 'sample' or 'exact'");
  }
  f.freeze_lambda = r.boolean("freeze_lambda");
  if (!doc.at("theta_box").is_null()) {
    f.theta_projection.mode = ThetaProjection::Mode::kBox;
    f.theta_projection.box_halfwidth = r.number("theta_box");
  }
  f.uniform_iterate = r.boolean("uniform_iterate");
  const json& assign = doc.at("constraint_assignment");
  if (!assign.is_null()) {
    if (!assign.is_array()) {
      throw ValidationError("federation.constraint_assignment", "expected a list of lists");
    }
    for (std::size_t i = 0; i < assign.size(); ++i) {
      const std::string p = "federation.constraint_assignment[" + std::to_string(i) + "]";
      if (!assign[i].is_array()) throw ValidationError(p, "expected a list of integers");
      std::vector<int> row;
      for (const json& v : assign[i]) {
        if (!v.is_number_integer()) throw ValidationError(p, "expected a list of integers");
        row.push_back(v.get<int>());
      }
      f.constraint_assignment.push_back(std::move(row));
    }
  }
  f.log_every = r.int32("log_every");
  f.threads = worker_threads_from_env();
  return f;
}

PpoConfig read_ppo(const json& doc) {
  const Reader r(doc, "ppo");
  PpoConfig p;
  p.clip = r.number("clip");
  p.inner_iters = r.int32("inner_iters");
  p.horizon = r.int32("horizon");
  p.discount = r.number("discount");
  p.cost_discount = r.number("cost_discount");
  p.lr_reward_critic = r.number("lr_phi");
  p.lr_cost_critic = r.number("lr_psi");
  const std::string opt = r.string("optimizer");
  if (opt == "sgd") {
    p.optimizer = OptimizerKind::kSgd;
  } else if (opt == "adam") {
    p.optimizer = OptimizerKind::kAdam;
  } else {
    throw ValidationError("ppo.optimizer", "expected 'sgd' or 'adam'");
  }
  const json& hidden = doc.at("hidden");
  if (!hidden.is_array()) throw ValidationError("ppo.hidden", "expected a list of integers");
  p.hidden.clear();
  for (const json& v : hidden) {
    if (!v.is_number_integer()) throw ValidationError("ppo.hidden", "expected a list of integers");
    p.hidden.push_back(v.get<int>());
  }
  p.policy_output_scale = r.number("policy_output_scale");
  p.eval_episodes = r.int32("eval_episodes");
  p.final_eval_episodes = r.int32("final_eval_episodes");
  return p;
}

void read_mode(const std::string& text, RunConfig& cfg, int n_constraints) {
  if (text == "fednpg") {
    cfg.mode = RunMode::kFedNpg;
  } else if (text == "fedppo") {
    cfg.mode = RunMode::kFedPpo;
  } else if (text == "omniscient") {
    cfg.mode = RunMode::kOmniscient;
  } else if (text.rfind("local:", 0) == 0) {
    cfg.mode = RunMode::kLocal;
    const std::string k = text.substr(6);
    if (k.empty() || k.find_first_not_of("0123456789") != std::string::npos) {
      throw ValidationError("mode", "expected local:<constraint index>");
    }
    cfg.local_index = std::stoi(k);
    if (cfg.local_index >= n_constraints) {
      throw ValidationError("mode", "constraint index " + k + " out of range");
    }
  } else {
    throw ValidationError("mode", "unknown mode '" + text +
                                      "' (expected fednpg, fedppo, local:k or omniscient)");
  }
  if (cfg.mode == RunMode::kFedNpg && !cfg.env.tabular()) {
    throw ValidationError("mode", "fednpg needs a tabular environment; use fedppo");
  }
  if (cfg.mode == RunMode::kFedPpo && cfg.env.tabular()) {
    throw ValidationError("mode", "fedppo needs an episodic environment; use fednpg");
  }
}

}  // namespace

std::string env_name(EnvKind kind) {
  switch (kind) {
    case EnvKind::kRandomMdp:
      return "random-mdp";
    case EnvKind::kWindyCliff:
      return "windy-cliff";
    case EnvKind::kCartPole:
      return "cartpole-c";
    case EnvKind::kFile:
      return "file";
  }
  return "";
}

std::string mode_name(const RunConfig& cfg) {
  switch (cfg.mode) {
    case RunMode::kFedNpg:
      return "fednpg";
    case RunMode::kFedPpo:
      return "fedppo";
    case RunMode::kOmniscient:
      return "omniscient";
    case RunMode::kLocal:
      return "local:" + std::to_string(cfg.local_index);
  }
  return "";
}

std::string default_config_json(const std::string& name) {
  return defaults_for(parse_env_kind(name)).dump(2);
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("", std::string("invalid JSON: ") + e.what());
  }
  if (!user.is_object()) throw ValidationError("", "config must be a JSON object");
  for (const std::string& o : overrides) apply_override(user, o);

  if (!user.contains("env")) throw ValidationError("env", "required");
  if (user["env"].is_string()) user["env"] = json{{"name", user["env"].get<std::string>()}};
  if (!user["env"].is_object() || !user["env"].contains("name") ||
      !user["env"]["name"].is_string()) {
    throw ValidationError("env.name", "required string");
  }
  const EnvKind kind = parse_env_kind(user["env"]["name"].get<std::string>());
  const json defaults = defaults_for(kind);
  check_known(user, defaults, "");
  json eff = merge(defaults, user);

  RunConfig cfg;
  cfg.env = read_env(eff["env"]);
  const int n_constraints = constraint_count(cfg.env);
  json& fed = eff["federation"];
  if (fed["n_agents"].is_null()) {
    fed["n_agents"] = fed["constraint_assignment"].is_array()
                          ? static_cast<int>(fed["constraint_assignment"].size())
                          : n_constraints;
  }
  cfg.federation = read_federation(fed);
  cfg.federation.validate(n_constraints);
  cfg.ppo = read_ppo(eff["ppo"]);
  cfg.ppo.validate();
  if (!eff["mode"].is_string()) throw ValidationError("mode", "expected a string");
  read_mode(eff["mode"].get<std::string>(), cfg, n_constraints);
  if (!eff["reference"].is_boolean()) throw ValidationError("reference", "expected true or false");
  cfg.reference = eff["reference"].get<bool>();
  if (!eff["output"].is_string()) throw ValidationError("output", "expected a string");
  cfg.output = eff["output"].get<std::string>();
  cfg.effective_json = eff.dump(2);
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

}  // namespace fedcrl
