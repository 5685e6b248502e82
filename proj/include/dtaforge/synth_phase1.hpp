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

// Phase I: detailed seed solutions, knowledge extraction and merging,
// per-teacher problem generation, and peer-review filtering.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dtaforge/gateway.hpp"
#include "dtaforge/manifest.hpp"
#include "dtaforge/prompt_forge.hpp"

namespace dtaforge::synth {

struct SeedSample {
  std::string id;
  std::string x_seed;
  std::string y_seed;
  std::string domain;
  bool is_detailed = false;

  void validate() const;
  Json to_json() const;
  static SeedSample from_json(const Json& j, std::size_t line_index);
};

struct KnowledgeSummary {
  std::vector<prompt::KnowledgePoint> knowledge_points;
  prompt::Skills skills;
  std::vector<std::string> source_teachers;
  std::string merged_by;

  prompt::KnowledgeList as_list() const { return {knowledge_points, skills}; }
  Json to_json() const;
};

struct TrainCandidate {
  std::string id;
  std::string x_train;
  std::string y_train;
  double final_answer = 0.0;
  std::string generator_id;
  std::string provenance;  // seed sample id

  // hash(generator_id, x_train, y_train), stable across runs.
  static std::string make_id(const std::string& generator_id, const std::string& x_train,
                             const std::string& y_train);
  Json to_json() const;
  static TrainCandidate from_json(const Json& j);
};

struct ReviewRecord {
  std::string candidate_id;
  std::map<std::string, double> reviewer_scores;
  double consensus = 0.0;
  bool kept = false;
  std::string drop_reason;  // empty when kept

  Json to_json() const;
  static ReviewRecord from_json(const Json& j);
};

// Mean of the reviewer scores and the inclusive threshold decision. An empty
// score map yields consensus 0 and reason review-unavailable.
ReviewRecord make_review_record(std::string candidate_id,
                                std::map<std::string, double> scores, double tau);

struct Phase1Options {
  std::vector<std::string> teachers;  // priority order
  std::string integrator;             // defaults to the first teacher
  std::string default_domain = "telecommunications mathematics";
  double tau = 0.75;
  int problems_per_seed = 1;
  std::uint64_t run_seed = 0;
  int workers = 1;
  gateway::Sampling detail_sampling{0.2, 0.95, std::nullopt, 4096, false};
  gateway::Sampling extract_sampling{0.2, 0.95, std::nullopt, 4096, false};
  gateway::Sampling merge_sampling{0.2, 0.95, std::nullopt, 4096, false};
  gateway::Sampling generate_sampling{0.8, 0.95, std::nullopt, 4096, false};
  gateway::Sampling review_sampling{0.0, 1.0, std::nullopt, 4096, false};
};

struct GenerationResult {
  std::vector<TrainCandidate> candidates;
  std::uint64_t attempts = 0;
  std::uint64_t unparseable = 0;
};

struct FilterResult {
  std::vector<TrainCandidate> kept;
  std::vector<TrainCandidate> dropped;
};

struct Phase1Result {
  std::vector<TrainCandidate> raw;
  std::vector<ReviewRecord> reviews;
  std::vector<TrainCandidate> reviewed;
  std::vector<Json> knowledge;  // one summary per seed
  StageManifest manifest;
};

// Keeps candidates whose record says kept, preserving order. Records pair
// with candidates by position and must carry the same id. Per-teacher drop
// counts land in `manifest` under the record's drop reason.
FilterResult filter_reviewed(const std::vector<TrainCandidate>& candidates,
                             const std::vector<ReviewRecord>& records,
                             StageManifest& manifest);

class Phase1 {
 public:
  Phase1(gateway::Gateway& gw, const prompt::TemplateStore& templates, Phase1Options opts);

  const Phase1Options& options() const { return opts_; }

  std::string ensure_detailed(const SeedSample& seed, const std::string& teacher) const;

  prompt::KnowledgeList extract_knowledge(const SeedSample& seed, const std::string& detailed,
                                          const std::string& teacher) const;

  KnowledgeSummary summarize_knowledge(
      const SeedSample& seed,
      const std::vector<std::pair<std::string, prompt::KnowledgeList>>& per_teacher,
      const std::string& integrator) const;

  // n generation calls; unparseable outputs are dropped and counted. Throws
  // kParse when all n fail.
  GenerationResult generate_problems(const KnowledgeSummary& k, const SeedSample& seed,
                                     const std::string& teacher, int n) const;

  ReviewRecord peer_review(const TrainCandidate& c,
                           const std::vector<std::string>& reviewers) const;

  // Every configured teacher except the generator.
  std::vector<std::string> reviewers_for(const std::string& generator) const;

  Phase1Result run(const std::vector<SeedSample>& seeds) const;

 private:
  std::string domain_of(const SeedSample& seed) const;

  gateway::Gateway& gw_;
  const prompt::TemplateStore& templates_;
  Phase1Options opts_;
};

// Lower-cased, whitespace-collapsed description used for deduplication.
std::string normalize_description(std::string_view s);

}  // namespace dtaforge::synth
