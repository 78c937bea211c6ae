/* Copyright 2026 The fedcrl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDCRL_FEDCRL_H_
#define FEDCRL_FEDCRL_H_

/* C interface to libfedcrl. Every call returns a status code; on failure the
 * message (and, for validation errors, the offending config field) is kept
 * per thread until the next failing call. Strings returned through out
 * parameters are owned by the caller and released with fedcrl_string_free. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define FEDCRL_API __declspec(dllexport)
#else
#define FEDCRL_API __attribute__((visibility("default")))
#endif

typedef enum {
  FEDCRL_OK = 0,
  FEDCRL_ERR_INVALID_ARGUMENT = 1, /* null handle, bad pointer or size */
  FEDCRL_ERR_VALIDATION = 2,       /* config or input failed validation */
  FEDCRL_ERR_IO = 3,
  FEDCRL_ERR_NUMERICAL = 4,
  FEDCRL_ERR_CONSTRAINT_ACCESS = 5,
  FEDCRL_ERR_UNDEFINED_METRIC = 6,
  FEDCRL_ERR_CHECK_FAILED = 7, /* selfcheck property or sweep seed failed */
  FEDCRL_ERR_INTERNAL = 99
} fedcrl_status;

typedef struct fedcrl_config fedcrl_config;

typedef struct {
  double j_r;
  double rr;
  double mvr;
  double mrvr;
  int rr_defined;
  int mvr_defined;
  int mrvr_defined;
} fedcrl_run_summary;

typedef void (*fedcrl_line_fn)(const char* name, int pass, const char* detail, void* user);

FEDCRL_API const char* fedcrl_version(void);
FEDCRL_API const char* fedcrl_last_error(void);
/* Dotted path of the field behind the last validation error, or "". */
FEDCRL_API const char* fedcrl_last_error_field(void);
FEDCRL_API void fedcrl_string_free(char* s);

/* Overrides are "section.key=value" strings; each value is read as JSON,
 * falling back to a string. All overrides are applied before validation.
 * `overrides` may be null when n_overrides is 0. */
FEDCRL_API fedcrl_status fedcrl_config_load(const char* path, const char* const* overrides,
                                            size_t n_overrides, fedcrl_config** out);
FEDCRL_API fedcrl_status fedcrl_config_parse(const char* json_text, const char* const* overrides,
                                             size_t n_overrides, fedcrl_config** out);
/* Adds one override; it is kept only if the resulting config validates. */
FEDCRL_API fedcrl_status fedcrl_config_set(fedcrl_config* cfg, const char* assignment);
FEDCRL_API fedcrl_status fedcrl_config_effective_json(const fedcrl_config* cfg, char** out);
FEDCRL_API fedcrl_status fedcrl_config_output(const fedcrl_config* cfg, char** out);
FEDCRL_API void fedcrl_config_free(fedcrl_config* cfg);

/* Trains the configured mode and writes the run directory. `summary` may be
 * null. */
FEDCRL_API fedcrl_status fedcrl_run(const fedcrl_config* cfg, const char* out_dir,
                                    fedcrl_run_summary* summary);
/* One run per seed plus summary.csv, in up to `workers` parallel slots (0
 * reads FEDCRL_THREADS). `failed` (nullable) receives the number
 * of failing seeds, which also yields FEDCRL_ERR_CHECK_FAILED. */
FEDCRL_API fedcrl_status fedcrl_sweep(const fedcrl_config* cfg, const uint64_t* seeds,
                                      size_t n_seeds, const char* out_dir, int workers,
                                      int* failed);
FEDCRL_API fedcrl_status fedcrl_selfcheck(int corrupt_clip_gradient, fedcrl_line_fn on_line,
                                          void* user, int* failed);
FEDCRL_API fedcrl_status fedcrl_gen_env(const char* name, uint64_t seed, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* FEDCRL_FEDCRL_H_ */
