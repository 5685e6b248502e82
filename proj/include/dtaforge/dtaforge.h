// Copyright 2026 The dta-forge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to dta-forge. Objects are opaque handles; every call returns a
 * dta_status and leaves a message for dta_last_error() on failure. Strings
 * returned through char** are owned by the caller and released with
 * dta_string_free(). */

#ifndef DTAFORGE_DTAFORGE_H_
#define DTAFORGE_DTAFORGE_H_

#include <stdint.h>

#if defined(DTAFORGE_BUILDING_LIBRARY)
#define DTA_API __attribute__((visibility("default")))
#else
#define DTA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dta_status {
  DTA_OK = 0,
  DTA_ERR_PRECONDITION = 1,
  DTA_ERR_PARSE = 2,
  DTA_ERR_RANGE = 3,
  DTA_ERR_MISSING_KEY = 4,
  DTA_ERR_TRANSPORT = 5,
  DTA_ERR_PROVIDER = 6,
  DTA_ERR_REPLAY_MISS = 7,
  DTA_ERR_UNSUPPORTED = 8,
  DTA_ERR_CONFIG = 9,
  DTA_ERR_IO = 10,
  DTA_ERR_STAGE = 11,
  DTA_ERR_QUARANTINE = 12,
  DTA_ERR_INVALID_ARGUMENT = 13,
  DTA_ERR_INTERNAL = 14
} dta_status;

typedef struct dta_config dta_config;
typedef struct dta_run dta_run;

DTA_API const char* dta_version(void);
DTA_API const char* dta_status_string(dta_status status);
/* Message of the last failed call on this thread; "" when none. */
DTA_API const char* dta_last_error(void);
DTA_API void dta_string_free(char* s);

/* ---- configuration ---- */

DTA_API dta_status dta_config_load(const char* path, dta_config** out);
/* base_dir resolves relative paths; may be NULL. */
DTA_API dta_status dta_config_from_json(const char* json, const char* base_dir, dta_config** out);
DTA_API void dta_config_free(dta_config* cfg);
DTA_API dta_status dta_config_set_seed(dta_config* cfg, uint64_t seed);
DTA_API dta_status dta_config_set_workers(dta_config* cfg, int workers);
/* "off", "record" or "strict". */
DTA_API dta_status dta_config_set_replay_mode(dta_config* cfg, const char* mode);
DTA_API dta_status dta_config_set_replay_dir(dta_config* cfg, const char* dir);
/* *ok is 1 when the config has no violations. report_json (optional) gets
 * {"violations": [...], "warnings": [...]}. */
DTA_API dta_status dta_config_validate(const dta_config* cfg, int* ok, char** report_json);
DTA_API dta_status dta_config_digest(const dta_config* cfg, char** out);
DTA_API dta_status dta_config_to_json(const dta_config* cfg, char** out);

/* ---- runs ---- */

DTA_API dta_status dta_run_open(const dta_config* cfg, const char* run_dir, dta_run** out);
DTA_API void dta_run_close(dta_run* run);
DTA_API dta_status dta_run_set_force(dta_run* run, int force);
/* stages: comma-separated names, NULL or "" for all. exit_code receives 0
 * (success), 1 (validation), 2 (stage failure) or 3 (strict replay miss);
 * the call itself returns DTA_OK whenever the run was attempted. */
DTA_API dta_status dta_run_execute(dta_run* run, const char* stages, int* exit_code,
                                   char** summary_json);

DTA_API dta_status dta_report(const char* run_dir, char** out);
/* *equal is 1 when stage output hashes and d_aligned.jsonl agree; diffs_json
 * (optional) lists the differences. */
DTA_API dta_status dta_compare_runs(const char* run_a, const char* run_b, int* equal,
                                    char** diffs_json);

/* ---- building blocks ---- */

DTA_API dta_status dta_formula_canonical(const char* expr, char** out);
DTA_API dta_status dta_formula_equivalent(const char* f1, const char* f2, uint64_t seed,
                                          double rel_tol, int* equivalent);

#ifdef __cplusplus
}
#endif

#endif /* DTAFORGE_DTAFORGE_H_ */
