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

// Phase II: induce the student's answering style, rewrite every curated
// solution once per teacher in that style, score each rewrite by student
// reflection and a reward judge, and keep the best rewrite per question.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtaforge/gateway.hpp"
#include "dtaforge/manifest.hpp"
#include "dtaforge/prompt_forge.hpp"
#include "dtaforge/synth_phase1.hpp"

namespace dtaforge::align {

// Weights over (correctness, completeness, clarity, conciseness).
inline constexpr std::array<double, 4> kRewardWeights = {0.5, 0.2, 0.2, 0.1};

using RewardWeights = std::array<double, 4>;

double reward_total(const prompt::RewardScores& s, const RewardWeights& w = kRewardWeights);

// Population z-scores. Fewer than two values, or zero variance, give zeros.
std::vector<double> z_scores(const std::vector<double>& values);

struct StylePair {
  std::string question;
  std::string answer;
};

struct StyleGuide {
  std::vector<std::string> language_tone_detail_rules;
  std::vector<std::string> structure_rules;
  std::size_t induced_from = 0;
  std::string summarizer_id;
  std::string markdown;  // the summarizer's reply as produced

  Json to_json() const;
  static StyleGuide from_json(const Json& j);
};

struct AlignedCandidate {
  std::string sample_id;  // the curated candidate this rewrite belongs to
  std::string teacher_id;
  std::string y_aligned;
  double r_student = 0.0;
  prompt::RewardScores reward_scores;
  double r_reward = 0.0;
  double z_student = 0.0;
  double z_reward = 0.0;
  double r_total = 0.0;

  Json to_json() const;
};

struct AlignedSample {
  std::string id;
  std::string x_train;
  std::string y_star;
  std::string winning_teacher;
  std::string generator_id;
  double final_answer = 0.0;
  double selection_margin = 0.0;  // 0 when there is no runner-up

  Json to_json() const;
  static AlignedSample from_json(const Json& j);
};

struct Selection {
  std::vector<AlignedCandidate> scored;  // input order, z-scores filled in
  std::size_t winner = 0;                // index into `scored`
  double margin = 0.0;
};

// Fused totals closer than this are tied.
inline constexpr double kFusionTieTolerance = 1e-9;

// Standardizes within the set, sums the z-scores, and picks the maximum.
// Ties go to the teacher earliest in `priority`. Throws kPrecondition on an
// empty set.
Selection fuse_and_select(std::vector<AlignedCandidate> candidates,
                          const std::vector<std::string>& priority);

// log ppl(x) - log ppl(x | y').
double r_ifd(double ppl_x, double ppl_x_given_y);

struct Phase2Options {
  std::vector<std::string> teachers;  // priority order
  std::string student;
  std::string summarizer;
  std::string judge;
  RewardWeights reward_weights = kRewardWeights;
  std::size_t style_cap = 200;
  double answer_rel_tol = 1e-3;
  std::uint64_t run_seed = 0;
  int workers = 1;
  gateway::Sampling student_sampling{0.0, 1.0, std::nullopt, 2048, false};
  gateway::Sampling summarize_sampling{0.2, 0.95, std::nullopt, 4096, false};
  gateway::Sampling align_sampling{0.2, 0.95, std::nullopt, 4096, false};
  gateway::Sampling judge_sampling{0.0, 1.0, std::nullopt, 1024, false};
};

struct RewriteResult {
  std::optional<std::string> text;  // empty when discarded
  std::string drop_reason;          // answer-drift or no-final-answer
};

struct Phase2Result {
  StyleGuide style;
  std::vector<AlignedSample> samples;
  std::vector<Json> sidecar;  // one row per scored candidate
  StageManifest manifest;
};

class Phase2 {
 public:
  Phase2(gateway::Gateway& gw, const prompt::TemplateStore& templates, Phase2Options opts);

  const Phase2Options& options() const { return opts_; }

  // The student's answer to every question, thinking disabled.
  std::vector<StylePair> collect_style_corpus(
      const std::vector<synth::TrainCandidate>& samples) const;

  // Indices of the at most style_cap items used for style induction, in
  // ascending order, chosen uniformly with the run seed.
  std::vector<std::size_t> style_subsample(std::size_t n) const;

  // Throws kPrecondition on an empty corpus and kParse/kMissingKey when the
  // reply lacks a section.
  StyleGuide induce_style(const std::vector<StylePair>& corpus) const;

  RewriteResult rewrite_trajectory(const synth::TrainCandidate& sample, const StyleGuide& style,
                                   const std::string& teacher) const;

  // The instruction-guess wrapper around a response.
  std::string reflection_context(const std::string& y_aligned) const;

  double score_student_reflection(const std::string& x_train, const std::string& y_aligned) const;
  // Same, with ppl(x) supplied by the caller.
  double score_student_reflection(const std::string& x_train, const std::string& y_aligned,
                                  double ppl_x) const;

  // One re-ask with the JSON reminder before failing with kParse.
  std::pair<prompt::RewardScores, double> score_reward(const std::string& x_train,
                                                       const std::string& y_aligned) const;

  // Style induction (unless `style` is given) followed by rewrite, scoring
  // and selection for every sample.
  Phase2Result run(const std::vector<synth::TrainCandidate>& samples,
                   std::optional<StyleGuide> style = std::nullopt) const;

 private:
  gateway::Gateway& gw_;
  const prompt::TemplateStore& templates_;
  Phase2Options opts_;
};

}  // namespace dtaforge::align
