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

#include "fedcrl/fedcrl.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fedcrl/errors.hpp"
#include "fedcrl/experiment.hpp"
#include "fedcrl/parallel.hpp"

struct fedcrl_config {
  std::string text;
  std::vector<std::string> overrides;
  fedcrl::RunConfig parsed;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_field;

fedcrl_status fail(fedcrl_status code, std::string message, std::string field = "") {
  g_error = std::move(message);
  g_field = std::move(field);
  return code;
}

// Runs fn, translating exceptions to status codes.
template <typename Fn>
fedcrl_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const fedcrl::ValidationError& e) {
    return fail(FEDCRL_ERR_VALIDATION, e.what(), e.field());
  } catch (const fedcrl::IoError& e) {
    return fail(FEDCRL_ERR_IO, e.what());
  } catch (const fedcrl::NumericalError& e) {
    return fail(FEDCRL_ERR_NUMERICAL, e.what());
  } catch (const fedcrl::ConstraintAccessError& e) {
    return fail(FEDCRL_ERR_CONSTRAINT_ACCESS, e.what());
  } catch (const fedcrl::UndefinedMetricError& e) {
    return fail(FEDCRL_ERR_UNDEFINED_METRIC, e.what());
  } catch (const std::exception& e) {
    return fail(FEDCRL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FEDCRL_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out != nullptr) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* fedcrl_version(void) { return FEDCRL_VERSION; }

const char* fedcrl_last_error(void) { return g_error.c_str(); }

const char* fedcrl_last_error_field(void) { return g_field.c_str(); }

void fedcrl_string_free(char* s) { std::free(s); }

fedcrl_status fedcrl_config_parse(const char* json_text, const char* const* overrides,
                                  size_t n_overrides, fedcrl_config** out) {
  if (json_text == nullptr || out == nullptr || (overrides == nullptr && n_overrides > 0)) {
    return fail(FEDCRL_ERR_INVALID_ARGUMENT, "null argument");
  }
  *out = nullptr;
  for (size_t i = 0; i < n_overrides; ++i) {
    if (overrides[i] == nullptr) return fail(FEDCRL_ERR_INVALID_ARGUMENT, "null override");
  }
  return guarded([&] {
    auto cfg = std::make_unique<fedcrl_config>();
    cfg->text = json_text;
    cfg->overrides.assign(overrides, overrides + n_overrides);
    cfg->parsed = fedcrl::parse_config(cfg->text, cfg->overrides);
    *out = cfg.release();
    return FEDCRL_OK;
  });
}

fedcrl_status fedcrl_config_load(const char* path, const char* const* overrides,
                                 size_t n_overrides, fedcrl_config** out) {
  if (path == nullptr || out == nullptr) return fail(FEDCRL_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  std::ifstream in(path);
  if (!in) return fail(FEDCRL_ERR_IO, std::string("cannot open config ") + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  return fedcrl_config_parse(text.c_str(), overrides, n_overrides, out);
}

fedcrl_status fedcrl_config_set(fedcrl_config* cfg, const char* assignment) {
  if (cfg == nullptr || assignment == nullptr) {
    return fail(FEDCRL_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    std::vector<std::string> next = cfg->overrides;
    next.emplace_back(assignment);
    cfg->parsed = fedcrl::parse_config(cfg->text, next);
    cfg->overrides = std::move(next);
    return FEDCRL_OK;
  });
}

fedcrl_status fedcrl_config_effective_json(const fedcrl_config* cfg, char** out) {
  if (cfg == nullptr || out == nullptr) return fail(FEDCRL_ERR_INVALID_ARGUMENT, "null argument");
  *out = dup_string(cfg->parsed.effective_json);
  return *out ? FEDCRL_OK : fail(FEDCRL_ERR_INTERNAL, "out of memory");
}

fedcrl_status fedcrl_config_output(const fedcrl_config* cfg, char** out) {
  if (cfg == nullptr || out == nullptr) return fail(FEDCRL_ERR_INVALID_ARGUMENT, "null argument");
  *out = dup_string(cfg->parsed.output);
  return *out ? FEDCRL_OK : fail(FEDCRL_ERR_INTERNAL, "out of memory");
}

void fedcrl_config_free(fedcrl_config* cfg) { delete cfg; }

fedcrl_status fedcrl_run(const fedcrl_config* cfg, const char* out_dir,
                         fedcrl_run_summary* summary) {
  if (cfg == nullptr || out_dir == nullptr) {
    return fail(FEDCRL_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const fedcrl::RunOutcome outcome = fedcrl::run_experiment(cfg->parsed, out_dir);
    if (summary != nullptr) {
      const fedcrl::LenientMetrics& m = outcome.metrics;
      *summary = {outcome.final_values.j_r, m.rr.value_or(0.0), m.mvr.value_or(0.0),
                  m.mrvr.value_or(0.0),     m.rr.has_value(),   m.mvr.has_value(),
                  m.mrvr.has_value()};
    }
    return FEDCRL_OK;
  });
}

fedcrl_status fedcrl_sweep(const fedcrl_config* cfg, const uint64_t* seeds, size_t n_seeds,
                           const char* out_dir, int workers, int* failed) {
  if (cfg == nullptr || out_dir == nullptr || (seeds == nullptr && n_seeds > 0)) {
    return fail(FEDCRL_ERR_INVALID_ARGUMENT, "null argument");
  }
  if (n_seeds == 0) return fail(FEDCRL_ERR_INVALID_ARGUMENT, "need at least one seed", "seeds");
  return guarded([&] {
    const std::vector<std::uint64_t> list(seeds, seeds + n_seeds);
    const fedcrl::SweepOutcome outcome =
        fedcrl::run_sweep(cfg->text, cfg->overrides, list, out_dir,
                          workers > 0 ? workers : fedcrl::worker_threads_from_env());
    if (failed != nullptr) *failed = outcome.failures;
    if (outcome.failures > 0) {
      return fail(FEDCRL_ERR_CHECK_FAILED,
                  std::to_string(outcome.failures) + " seed(s) failed; see summary.csv");
    }
    return FEDCRL_OK;
  });
}

fedcrl_status fedcrl_selfcheck(int corrupt_clip_gradient, fedcrl_line_fn on_line, void* user,
                               int* failed) {
  return guarded([&] {
    fedcrl::SelfcheckOptions opts;
    opts.corrupt_clip_gradient = corrupt_clip_gradient != 0;
    int n_failed = 0;
    fedcrl::run_selfcheck(opts, [&](const fedcrl::CheckLine& line) {
      if (!line.pass) ++n_failed;
      if (on_line != nullptr) {
        on_line(line.name.c_str(), line.pass ? 1 : 0, line.detail.c_str(), user);
      }
    });
    if (failed != nullptr) *failed = n_failed;
    if (n_failed > 0) {
      return fail(FEDCRL_ERR_CHECK_FAILED, std::to_string(n_failed) + " check(s) failed");
    }
    return FEDCRL_OK;
  });
}

fedcrl_status fedcrl_gen_env(const char* name, uint64_t seed, const char* path) {
  if (name == nullptr || path == nullptr) return fail(FEDCRL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    fedcrl::generate_env(name, seed, path);
    return FEDCRL_OK;
  });
}

}  // extern "C"
