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

// dta-forge command line. Talks to the library only through the C API.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "dtaforge/dtaforge.h"

namespace {

struct CString {
  char* p = nullptr;
  ~CString() { dta_string_free(p); }
  const char* get() const { return p ? p : ""; }
};

struct Config {
  dta_config* p = nullptr;
  ~Config() { dta_config_free(p); }
};

struct Run {
  dta_run* p = nullptr;
  ~Run() { dta_run_close(p); }
};

constexpr int kValidation = 1;
constexpr int kStage = 2;
constexpr int kReplayMiss = 3;

int report_error(const char* what, dta_status st) {
  std::fprintf(stderr, "dta-forge: %s: %s (%s)\n", what, dta_last_error(), dta_status_string(st));
  if (st == DTA_ERR_CONFIG || st == DTA_ERR_INVALID_ARGUMENT) return kValidation;
  if (st == DTA_ERR_REPLAY_MISS) return kReplayMiss;
  return kStage;
}

struct RunArgs {
  std::string config;
  std::string run_dir;
  std::string stages;
  std::string replay_dir;
  std::string against;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int workers = 0;
  bool strict = false;
  bool force = false;
};

int load_config(const RunArgs& a, Config& cfg) {
  if (auto st = dta_config_load(a.config.c_str(), &cfg.p); st != DTA_OK)
    return report_error("loading config", st);
  if (a.seed_set) dta_config_set_seed(cfg.p, a.seed);
  if (a.workers > 0) dta_config_set_workers(cfg.p, a.workers);
  if (!a.replay_dir.empty()) dta_config_set_replay_dir(cfg.p, a.replay_dir.c_str());
  return 0;
}

int print_validation(dta_config* cfg) {
  int ok = 0;
  CString rep;
  if (auto st = dta_config_validate(cfg, &ok, &rep.p); st != DTA_OK)
    return report_error("validating config", st);
  std::printf("%s\n", rep.get());
  return ok ? 0 : kValidation;
}

int execute(const RunArgs& a, const char* mode) {
  Config cfg;
  if (int rc = load_config(a, cfg)) return rc;
  if (mode) dta_config_set_replay_mode(cfg.p, mode);
  else if (a.strict) dta_config_set_replay_mode(cfg.p, "strict");
  int ok = 0;
  CString rep;
  if (auto st = dta_config_validate(cfg.p, &ok, &rep.p); st != DTA_OK)
    return report_error("validating config", st);
  if (!ok) {
    std::fprintf(stderr, "dta-forge: invalid config\n%s\n", rep.get());
    return kValidation;
  }
  Run run;
  if (auto st = dta_run_open(cfg.p, a.run_dir.c_str(), &run.p); st != DTA_OK)
    return report_error("opening run", st);
  dta_run_set_force(run.p, a.force || mode != nullptr);
  int exit_code = 0;
  CString summary;
  if (auto st = dta_run_execute(run.p, a.stages.empty() ? nullptr : a.stages.c_str(), &exit_code,
                                &summary.p);
      st != DTA_OK)
    return report_error("running", st);
  std::printf("%s\n", summary.get());
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dta-forge: teacher data synthesis, decontamination and trajectory alignment"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dta_version());

  RunArgs a;
  auto add_common = [&](CLI::App* sub, bool needs_run_dir) {
    sub->add_option("--config", a.config, "Run configuration (JSON)")->required();
    auto* rd = sub->add_option("--run-dir", a.run_dir, "Run directory");
    if (needs_run_dir) rd->required();
    sub->add_option("--stages", a.stages, "Comma-separated stages (default: all)");
    sub->add_option("--seed", a.seed, "Override the run seed")->each([&](const std::string&) { a.seed_set = true; });
    sub->add_option("--workers", a.workers, "Override the worker count")->check(CLI::PositiveNumber);
    sub->add_option("--replay-dir", a.replay_dir, "Override the replay cache directory");
  };

  auto* run = app.add_subcommand("run", "Run pipeline stages");
  add_common(run, true);
  run->add_flag("--strict-replay", a.strict, "Serve every call from the replay cache; a miss fails the run");
  run->add_flag("--force", a.force, "Re-run stages that are up to date");

  auto* validate = app.add_subcommand("validate", "Check a configuration");
  validate->add_option("--config", a.config, "Run configuration (JSON)")->required();
  validate->add_option("--seed", a.seed, "Override the run seed")->each([&](const std::string&) { a.seed_set = true; });

  auto* report = app.add_subcommand("report", "Summarize a run directory");
  report->add_option("--run-dir", a.run_dir, "Run directory")->required();

  auto* record = app.add_subcommand("replay-record", "Run every stage, recording provider calls");
  add_common(record, true);

  auto* check = app.add_subcommand("replay-check", "Re-run from the replay cache only and compare");
  add_common(check, true);
  check->add_option("--against", a.against, "Reference run directory to compare outputs with");

  CLI11_PARSE(app, argc, argv);

  if (*validate) {
    Config cfg;
    if (int rc = load_config(a, cfg)) return rc;
    return print_validation(cfg.p);
  }
  if (*report) {
    CString out;
    if (auto st = dta_report(a.run_dir.c_str(), &out.p); st != DTA_OK) return report_error("report", st);
    std::fputs(out.get(), stdout);
    return 0;
  }
  if (*run) return execute(a, nullptr);
  if (*record) return execute(a, "record");
  if (*check) {
    int rc = execute(a, "strict");
    if (rc != 0 || a.against.empty()) return rc;
    int equal = 0;
    CString diffs;
    if (auto st = dta_compare_runs(a.against.c_str(), a.run_dir.c_str(), &equal, &diffs.p); st != DTA_OK)
      return report_error("comparing runs", st);
    if (!equal) {
      std::fprintf(stderr, "dta-forge: outputs differ from %s\n%s\n", a.against.c_str(), diffs.get());
      return kStage;
    }
    std::printf("outputs match %s\n", a.against.c_str());
    return 0;
  }
  return 0;
}
