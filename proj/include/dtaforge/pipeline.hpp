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

// Staged orchestration over a run directory. Stages hand off through JSONL
// files; each stage writes manifest_<stage>.json and is skipped when its
// inputs, config digest and outputs are unchanged since the last run.

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "dtaforge/config.hpp"
#include "dtaforge/error.hpp"
#include "dtaforge/gateway.hpp"
#include "dtaforge/manifest.hpp"

namespace dtaforge::pipeline {

enum class Stage { kInit, kPhase1, kDecontam, kPhase2, kAnalyze };

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);
std::vector<Stage> all_stages();
// Comma-separated names, returned in execution order without duplicates.
std::vector<Stage> parse_stages(std::string_view csv);

namespace files {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kSummary = "run_summary.json";
inline constexpr const char* kLock = ".lock";
inline constexpr const char* kRaw = "d_raw.jsonl";
inline constexpr const char* kReviews = "reviews.jsonl";
inline constexpr const char* kKnowledge = "knowledge.jsonl";
inline constexpr const char* kReviewed = "d_reviewed.jsonl";
inline constexpr const char* kClean = "d_clean.jsonl";
inline constexpr const char* kFlags = "contamination_flags.jsonl";
inline constexpr const char* kQuarantine = "quarantine.jsonl";
inline constexpr const char* kStyleMd = "style_guide.md";
inline constexpr const char* kStyleJson = "style_guide.json";
inline constexpr const char* kAligned = "d_aligned.jsonl";
inline constexpr const char* kScores = "alignment_scores.jsonl";
inline constexpr const char* kEvalOutputs = "eval_outputs.jsonl";
inline constexpr const char* kAnalyticsJson = "analytics.json";
inline constexpr const char* kAnalyticsTxt = "analytics.txt";
std::string manifest(Stage s);
}  // namespace files

// Exclusive ownership of a run directory for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct StageOutcome {
  Stage stage = Stage::kInit;
  std::string status;  // ran, skipped, failed
  std::string output_hash;
  std::string error;
};

struct RunSummary {
  std::vector<StageOutcome> stages;
  int exit_code = 0;
  std::string final_hash;  // over the output hashes of the stages run or skipped
  std::string error;

  Json to_json() const;
};

enum ExitCode { kExitOk = 0, kExitValidation = 1, kExitStage = 2, kExitReplayMiss = 3 };

int exit_code_for(ErrorCode code);

class Pipeline {
 public:
  // Builds the gateway (sim backend included) from the config.
  Pipeline(config::RunConfig cfg, std::filesystem::path run_dir);
  ~Pipeline();

  gateway::Gateway& gateway() { return *gw_; }
  const config::RunConfig& config() const { return cfg_; }

  // Re-run stages even when they are up to date.
  void set_force(bool force) { force_ = force; }

  // Validates, takes the lock, writes the effective config and runs the
  // stages in order. A failure stops the run; earlier outputs stay intact.
  RunSummary run(const std::vector<Stage>& stages);

 private:
  StageOutcome run_stage(Stage s);
  std::vector<std::filesystem::path> inputs_of(Stage s) const;
  std::vector<std::string> outputs_of(Stage s) const;
  bool up_to_date(Stage s, const std::string& input_hash) const;
  void finish(StageManifest& m, Stage s, const std::string& input_hash, double seconds) const;

  void do_init(StageManifest& m);
  void do_phase1(StageManifest& m);
  void do_decontam(StageManifest& m);
  void do_phase2(StageManifest& m);
  void do_analyze(StageManifest& m);

  config::RunConfig cfg_;
  std::filesystem::path dir_;
  std::unique_ptr<gateway::Gateway> gw_;
  bool force_ = false;
};

// SHA-256 over the named files under `dir` (name and content each).
std::string hash_files(const std::filesystem::path& dir, const std::vector<std::string>& names);
std::string hash_paths(const std::vector<std::filesystem::path>& paths);

// Table III style funnel with one column per teacher.
std::string funnel_table(const std::vector<StageManifest>& manifests);

// Funnel, dataset sizes and analytics tables for a run directory. Throws kIo
// when the directory holds no manifests.
std::string report(const std::filesystem::path& run_dir);

// Differences in stage output hashes and d_aligned.jsonl bytes between two
// run directories; empty when they agree.
std::vector<std::string> compare_runs(const std::filesystem::path& a,
                                      const std::filesystem::path& b);

}  // namespace dtaforge::pipeline
