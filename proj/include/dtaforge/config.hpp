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

// Run configuration: one declarative JSON file, validated before any stage
// runs. Relative paths resolve against the config file's directory.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dtaforge/align_phase2.hpp"
#include "dtaforge/decontam.hpp"
#include "dtaforge/gateway.hpp"
#include "dtaforge/synth_phase1.hpp"

namespace dtaforge::config {

struct EvalModel {
  std::string label;
  std::string provider;
  bool thinking = false;
};

struct AnalyzeConfig {
  std::vector<EvalModel> eval_models;
  std::vector<std::string> protocols{"pass@1"};  // pass@1, cons@16
  std::string token_shift_baseline;              // eval model labels
  std::string token_shift_target;
  std::size_t eval_limit = 0;  // 0: every question
};

struct Paths {
  std::filesystem::path seeds;
  std::filesystem::path benchmark;
  std::filesystem::path eval;
  std::filesystem::path efficiency_csv;
  std::filesystem::path replay_dir;
  std::filesystem::path resources;  // empty: built-in resource dir
};

struct StageToggles {
  bool phase1 = true;
  bool decontam = true;
  bool phase2 = true;
  bool analyze = true;
};

struct RunConfig {
  std::uint64_t run_seed = 0;
  int workers = 1;
  gateway::ReplayMode replay_mode = gateway::ReplayMode::kOff;
  std::vector<gateway::ProviderProfile> providers;
  std::vector<std::string> teachers;  // priority order
  std::string integrator;
  std::string student;
  std::string summarizer;
  std::string judge;
  std::string embedder;
  bool seeds_detailed = false;  // treat every seed solution as already detailed

  synth::Phase1Options phase1;
  decontam::DecontamOptions decontam;
  align::Phase2Options phase2;
  AnalyzeConfig analyze;
  Paths paths;
  StageToggles stages;

  // Dotted names of the fields the source file set explicitly.
  std::set<std::string> explicit_fields;

  // Unknown keys are a kConfig error; type mismatches surface as kConfig too.
  static RunConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& file);

  // The effective configuration, every default filled in.
  Json to_json() const;

  // SHA-256 of the effective configuration without the fields that cannot
  // change results: workers, replay mode, paths and provider concurrency.
  std::string digest() const;

  // Every broken invariant, one message each; empty when the config is usable.
  std::vector<std::string> violations() const;
  // Defaults in effect that have no reference value, one message naming each.
  std::vector<std::string> warnings() const;

  // Stage options with the shared fields (teachers, seed, workers) filled in.
  synth::Phase1Options phase1_options() const;
  decontam::DecontamOptions decontam_options() const;
  align::Phase2Options phase2_options() const;
};

}  // namespace dtaforge::config
