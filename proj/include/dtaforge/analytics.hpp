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

// Evaluation and analysis: pass@1 / cons@16 grading, derived efficiency
// metrics, token-shift tables, t-based confidence intervals, and pairwise
// judging with position-swap debiasing.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dtaforge/gateway.hpp"
#include "dtaforge/prompt_forge.hpp"

namespace dtaforge::analytics {

inline constexpr double kGradeRelTol = 1e-3;

// ---- accuracy --------------------------------------------------------------

struct EvalQuestion {
  std::string id;
  std::string question;
  double gold_answer = 0.0;

  // Non-numeric gold is a data error (kParse).
  static EvalQuestion from_json(const Json& j, std::size_t line_index);
};

struct EvalItem {
  std::string id;
  double gold_answer = 0.0;
  std::vector<std::string> model_answers;
};

bool grade(std::string_view answer_text, double gold);

// Fraction of items whose first answer matches gold. Throws kPrecondition
// on an empty item list or an item without exactly one answer.
double pass_at_1(const std::vector<EvalItem>& items);

struct Vote {
  std::optional<double> representative;  // nullopt: the unparseable cluster won
  std::size_t votes = 0;
};

// Plurality cluster over `answers`. Numbers are clustered in ascending order
// against the smallest member; ties go to the smaller representative, and the
// unparseable cluster loses every tie.
Vote majority_vote(const std::vector<std::string>& answers, double rel_tol = kGradeRelTol);

// Throws kPrecondition unless every item carries exactly `samples` answers.
double cons_at_k(const std::vector<EvalItem>& items, std::size_t samples = 16);

struct DecodeProtocol {
  std::string name;
  gateway::Sampling sampling;
  std::size_t samples = 1;
};

DecodeProtocol pass1_protocol(bool thinking);
DecodeProtocol cons16_protocol(bool thinking);

// Queries `model` for every question under the protocol. Each sample gets a
// seed derived from run_seed, question id and sample index.
std::vector<EvalItem> collect_answers(const std::vector<EvalQuestion>& questions,
                                      gateway::Gateway& gw, const std::string& model,
                                      const DecodeProtocol& protocol, std::uint64_t run_seed,
                                      int workers);

// ---- efficiency ------------------------------------------------------------

struct EfficiencyInput {
  std::string model;
  bool thinking = false;
  double energy_per_token = 0.0;  // J/token
  double latency = 0.0;           // s/sample
  double throughput = 0.0;        // tokens/s
  std::optional<double> pass1;    // fraction in (0, 1]

  void validate() const;
};

struct DerivedMetrics {
  double tokens_per_sample = 0.0;
  double energy_per_sample = 0.0;
  double edp = 0.0;
  double time_per_correct = 0.0;
  double energy_per_correct = 0.0;

  Json to_json() const;
};

// Throws kPrecondition for non-positive inputs and kRange when pass1 is 0 or
// missing.
DerivedMetrics derived_metrics(const EfficiencyInput& e);

// CSV with header model,thinking,energy_j_per_token,latency_s,throughput_tok_s
// and an optional pass1 column.
std::vector<EfficiencyInput> parse_efficiency_csv(std::string_view csv);

std::string efficiency_table(const std::vector<EfficiencyInput>& rows);
std::string derived_table(const std::vector<EfficiencyInput>& rows);

// ---- token shift -----------------------------------------------------------

enum class TokenCategory { kLogicalStructural, kDomainSpecific, kContent };

std::string_view to_string(TokenCategory c);

struct Lexicons {
  std::set<std::string> logical_structural;
  std::set<std::string> domain_specific;

  TokenCategory categorize(const std::string& token) const;

  // logical_structural.txt and domain_specific.txt under `dir`; one token per
  // line, '#' starts a comment.
  static Lexicons load(const std::filesystem::path& dir);
  static Lexicons load_default();
};

// Lower-cased runs of letters, digits, '_' and '\''; everything else splits.
std::vector<std::string> tokenize(std::string_view text);

struct TokenShiftRow {
  std::string token;
  double baseline_freq = 0.0;
  double target_freq = 0.0;
  std::size_t baseline_count = 0;
  std::size_t target_count = 0;
  std::size_t baseline_rank = 0;  // 1-based; vocabulary size + 1 when absent
  std::size_t target_rank = 0;
  long long rank_delta = 0;  // baseline_rank - target_rank
  double shift = 0.0;
  TokenCategory category = TokenCategory::kContent;

  Json to_json() const;
};

// shift = ln((t + a) / (b + a)) with rates t, b and a = 1 / (N_base + N_target).
// A single smoothing constant for both corpora makes the score change sign
// exactly when the corpora are exchanged. Rows sort by |shift| descending,
// then token. Throws kPrecondition when either corpus has no tokens.
std::vector<TokenShiftRow> token_shift(const std::vector<std::string>& baseline_corpus,
                                       const std::vector<std::string>& target_corpus,
                                       const Lexicons& lexicons);

std::string token_shift_table(const std::vector<TokenShiftRow>& rows, std::size_t limit = 30);

// ---- confidence intervals --------------------------------------------------

struct MeanCi {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
};

// mean +- t(n-1, 0.975) * s / sqrt(n). Throws kPrecondition when n < 3.
MeanCi mean_ci(const std::vector<double>& values);

// ---- pairwise judging ------------------------------------------------------

// Un-swaps and averages: a = (original.a + swapped.b) / 2, and likewise b.
prompt::PairwiseScores debias(const prompt::PairwiseScores& original,
                              const prompt::PairwiseScores& swapped);

struct PairwiseResult {
  double score_a = 0.0;
  double score_b = 0.0;
  prompt::PairwiseScores original;
  prompt::PairwiseScores swapped;

  Json to_json() const;
};

// Two judge calls, original and swapped order, each re-asked once when the
// reply is unparseable. Throws kParse when a call stays unparseable.
PairwiseResult pairwise_judge(const std::string& question, const std::string& answer_a,
                              const std::string& answer_b, gateway::Gateway& gw,
                              const std::string& judge, const prompt::TemplateStore& templates,
                              const gateway::Sampling& sampling);

struct PairwiseSummary {
  std::size_t n = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::size_t wins_a = 0;
  std::size_t wins_b = 0;
  std::size_t ties = 0;

  Json to_json() const;
};

PairwiseSummary summarize_pairwise(const std::vector<PairwiseResult>& results);

}  // namespace dtaforge::analytics
