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

#include "dtaforge/dtaforge.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "dtaforge/config.hpp"
#include "dtaforge/error.hpp"
#include "dtaforge/formula.hpp"
#include "dtaforge/pipeline.hpp"

struct dta_config {
  dtaforge::config::RunConfig cfg;
};

struct dta_run {
  std::unique_ptr<dtaforge::pipeline::Pipeline> pipeline;
};

namespace {

thread_local std::string g_last_error;

dta_status status_of(dtaforge::ErrorCode c) {
  using dtaforge::ErrorCode;
  switch (c) {
    case ErrorCode::kPrecondition: return DTA_ERR_PRECONDITION;
    case ErrorCode::kParse: return DTA_ERR_PARSE;
    case ErrorCode::kRange: return DTA_ERR_RANGE;
    case ErrorCode::kMissingKey: return DTA_ERR_MISSING_KEY;
    case ErrorCode::kTransport: return DTA_ERR_TRANSPORT;
    case ErrorCode::kProvider: return DTA_ERR_PROVIDER;
    case ErrorCode::kReplayMiss: return DTA_ERR_REPLAY_MISS;
    case ErrorCode::kUnsupported: return DTA_ERR_UNSUPPORTED;
    case ErrorCode::kConfig: return DTA_ERR_CONFIG;
    case ErrorCode::kIo: return DTA_ERR_IO;
    case ErrorCode::kStage: return DTA_ERR_STAGE;
    case ErrorCode::kQuarantine: return DTA_ERR_QUARANTINE;
  }
  return DTA_ERR_INTERNAL;
}

template <typename Fn>
dta_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return DTA_OK;
  } catch (const dtaforge::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return DTA_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DTA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DTA_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return DTA_ERR_INTERNAL;
  }
}

dta_status bad_arg(const char* what) {
  g_last_error = std::string("invalid argument: ") + what;
  return DTA_ERR_INVALID_ARGUMENT;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

}  // namespace

extern "C" {

const char* dta_version(void) { return "0.1.0"; }

const char* dta_status_string(dta_status status) {
  switch (status) {
    case DTA_OK: return "ok";
    case DTA_ERR_PRECONDITION: return "precondition";
    case DTA_ERR_PARSE: return "parse";
    case DTA_ERR_RANGE: return "range";
    case DTA_ERR_MISSING_KEY: return "missing-key";
    case DTA_ERR_TRANSPORT: return "transport";
    case DTA_ERR_PROVIDER: return "provider";
    case DTA_ERR_REPLAY_MISS: return "replay-miss";
    case DTA_ERR_UNSUPPORTED: return "unsupported";
    case DTA_ERR_CONFIG: return "config";
    case DTA_ERR_IO: return "io";
    case DTA_ERR_STAGE: return "stage";
    case DTA_ERR_QUARANTINE: return "quarantine";
    case DTA_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case DTA_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* dta_last_error(void) { return g_last_error.c_str(); }

void dta_string_free(char* s) { std::free(s); }

dta_status dta_config_load(const char* path, dta_config** out) {
  if (!path || !out) return bad_arg("path and out are required");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<dta_config>();
    c->cfg = dtaforge::config::RunConfig::load(path);
    *out = c.release();
  });
}

dta_status dta_config_from_json(const char* json, const char* base_dir, dta_config** out) {
  if (!json || !out) return bad_arg("json and out are required");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<dta_config>();
    c->cfg = dtaforge::config::RunConfig::from_json(nlohmann::json::parse(json),
                                                    base_dir ? base_dir : "");
    *out = c.release();
  });
}

void dta_config_free(dta_config* cfg) { delete cfg; }

dta_status dta_config_set_seed(dta_config* cfg, uint64_t seed) {
  if (!cfg) return bad_arg("cfg is null");
  cfg->cfg.run_seed = seed;
  cfg->cfg.explicit_fields.insert("run_seed");
  return DTA_OK;
}

dta_status dta_config_set_workers(dta_config* cfg, int workers) {
  if (!cfg) return bad_arg("cfg is null");
  if (workers < 1) return bad_arg("workers must be >= 1");
  cfg->cfg.workers = workers;
  return DTA_OK;
}

dta_status dta_config_set_replay_mode(dta_config* cfg, const char* mode) {
  if (!cfg || !mode) return bad_arg("cfg and mode are required");
  return guarded([&] { cfg->cfg.replay_mode = dtaforge::gateway::replay_mode_from_string(mode); });
}

dta_status dta_config_set_replay_dir(dta_config* cfg, const char* dir) {
  if (!cfg || !dir) return bad_arg("cfg and dir are required");
  cfg->cfg.paths.replay_dir = dir;
  return DTA_OK;
}

dta_status dta_config_validate(const dta_config* cfg, int* ok, char** report_json) {
  if (!cfg || !ok) return bad_arg("cfg and ok are required");
  return guarded([&] {
    auto v = cfg->cfg.violations();
    *ok = v.empty() ? 1 : 0;
    if (report_json)
      *report_json = dup(nlohmann::json{{"violations", v}, {"warnings", cfg->cfg.warnings()}}.dump(2));
  });
}

dta_status dta_config_digest(const dta_config* cfg, char** out) {
  if (!cfg || !out) return bad_arg("cfg and out are required");
  return guarded([&] { *out = dup(cfg->cfg.digest()); });
}

dta_status dta_config_to_json(const dta_config* cfg, char** out) {
  if (!cfg || !out) return bad_arg("cfg and out are required");
  return guarded([&] { *out = dup(cfg->cfg.to_json().dump(2)); });
}

dta_status dta_run_open(const dta_config* cfg, const char* run_dir, dta_run** out) {
  if (!cfg || !run_dir || !out) return bad_arg("cfg, run_dir and out are required");
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<dta_run>();
    r->pipeline = std::make_unique<dtaforge::pipeline::Pipeline>(cfg->cfg, run_dir);
    *out = r.release();
  });
}

void dta_run_close(dta_run* run) { delete run; }

dta_status dta_run_set_force(dta_run* run, int force) {
  if (!run) return bad_arg("run is null");
  run->pipeline->set_force(force != 0);
  return DTA_OK;
}

dta_status dta_run_execute(dta_run* run, const char* stages, int* exit_code, char** summary_json) {
  if (!run || !exit_code) return bad_arg("run and exit_code are required");
  return guarded([&] {
    auto list = stages && *stages ? dtaforge::pipeline::parse_stages(stages)
                                  : dtaforge::pipeline::all_stages();
    auto summary = run->pipeline->run(list);
    *exit_code = summary.exit_code;
    if (summary_json) *summary_json = dup(summary.to_json().dump(2));
  });
}

dta_status dta_report(const char* run_dir, char** out) {
  if (!run_dir || !out) return bad_arg("run_dir and out are required");
  return guarded([&] { *out = dup(dtaforge::pipeline::report(run_dir)); });
}

dta_status dta_compare_runs(const char* run_a, const char* run_b, int* equal, char** diffs_json) {
  if (!run_a || !run_b || !equal) return bad_arg("run_a, run_b and equal are required");
  return guarded([&] {
    auto d = dtaforge::pipeline::compare_runs(run_a, run_b);
    *equal = d.empty() ? 1 : 0;
    if (diffs_json) *diffs_json = dup(nlohmann::json(d).dump(2));
  });
}

dta_status dta_formula_canonical(const char* expr, char** out) {
  if (!expr || !out) return bad_arg("expr and out are required");
  return guarded([&] { *out = dup(dtaforge::formula::canonical_string(expr)); });
}

dta_status dta_formula_equivalent(const char* f1, const char* f2, uint64_t seed, double rel_tol,
                                  int* equivalent) {
  if (!f1 || !f2 || !equivalent) return bad_arg("f1, f2 and equivalent are required");
  if (!(rel_tol > 0.0)) return bad_arg("rel_tol must be positive");
  return guarded([&] {
    dtaforge::formula::EquivalenceOptions o;
    o.seed = seed;
    o.rel_tol = rel_tol;
    auto r = dtaforge::formula::numeric_equivalence(dtaforge::formula::parse(f1),
                                                    dtaforge::formula::parse(f2), o);
    *equivalent = r.equivalent ? 1 : 0;
  });
}

}  // extern "C"
