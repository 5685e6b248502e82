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

// Prompt templates and the parsers for the structured answers they elicit.
//
// Templates are UTF-8 resource files with {{name}} placeholders, listed in
// <dir>/manifest.json. Parsers are total: they return a value or throw an
// Error with kParse, kRange or kMissingKey.

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dtaforge::prompt {

enum class TemplateId {
  kDetail,
  kExtract,
  kGenerate,
  kPeerReview,
  kSummarizeStyle,
  kAlign,
  kReward,
  kPairwise,
  // Not part of the printed prompt set; shipped with the same mechanism.
  kMergeKnowledge,
  kEntailment,
  kReflectWrapper,
  kJsonReminder,
};

std::string_view to_string(TemplateId id);
TemplateId template_id_from_string(std::string_view s);

struct Template {
  TemplateId id;
  std::string body;
  std::set<std::string> required_placeholders;
};

// Placeholder names found in `body`, in first-appearance order.
std::vector<std::string> placeholders_in(std::string_view body);

// Substitutes every {{name}} in `body` from `bindings`. Bound values are not
// re-scanned. Throws kMissingKey naming the first unbound placeholder.
std::string render_body(std::string_view body,
                        const std::map<std::string, std::string>& bindings);

class TemplateStore {
 public:
  // Loads every template listed in <dir>/manifest.json.
  static TemplateStore load(const std::filesystem::path& dir);
  // DTAFORGE_RESOURCES/templates if set, else the install-time resource dir.
  static TemplateStore load_default();
  static std::filesystem::path default_resource_dir();

  const Template& get(TemplateId id) const;
  std::string render(TemplateId id, const std::map<std::string, std::string>& bindings) const;
  const std::string& version() const { return version_; }

 private:
  std::map<TemplateId, Template> templates_;
  std::string version_;
};

// ---- parsed shapes ---------------------------------------------------------

struct RewardScores {
  static constexpr std::array<std::string_view, 4> kCriteria = {
      "correctness", "completeness", "clarity", "conciseness"};

  std::array<int, 4> scores{};  // in kCriteria order, each 0..10
  std::array<std::string, 4> explanations;

  int correctness() const { return scores[0]; }
  int completeness() const { return scores[1]; }
  int clarity() const { return scores[2]; }
  int conciseness() const { return scores[3]; }
};

struct GeneratedProblem {
  std::string statement;
  std::string solution_steps;
  double final_answer = 0.0;
};

struct PairwiseScores {
  double score_a = 0.0;
  double score_b = 0.0;
  std::string summary;
};

struct KnowledgePoint {
  std::string description;
  std::string relevance;
};

struct Skills {
  std::string strategy;
  std::string decomposition;
  std::string formula_applications;
};

struct KnowledgeList {
  std::vector<KnowledgePoint> points;
  Skills skills;
};

struct StyleRules {
  std::vector<std::string> language_tone_detail;
  std::vector<std::string> structure;
};

// ---- parsers ---------------------------------------------------------------

// Numeric content of the last \box{...} (or \boxed{...}); must lie in [0, 1].
double parse_boxed_score(std::string_view text);

// The outermost balanced {...} span that parses as a JSON object. Brackets
// inside string literals are ignored and trailing commas are tolerated.
std::optional<std::string> extract_json_object(std::string_view text);

RewardScores parse_reward_json(std::string_view text);
PairwiseScores parse_pairwise_json(std::string_view text);
GeneratedProblem parse_generated_problem(std::string_view text);
KnowledgeList parse_knowledge(std::string_view text);
StyleRules parse_style_guide(std::string_view text);

// A value that must be a single number, optionally followed by a unit
// ("42", "-3.5e-2 W", "1.2 x 10^5 Hz"). Anything else is kParse.
double parse_single_number(std::string_view text);

// Grading extraction: the number on the last "Final Answer" line if present,
// else the last \boxed{} number, else the last number in the text.
std::optional<double> extract_final_answer(std::string_view text);

// Formatting helpers used when feeding parsed structures back into prompts.
std::string format_knowledge(const KnowledgeList& k);
std::string format_rules(const std::vector<std::string>& rules);
std::string format_boxed_score(double score);

}  // namespace dtaforge::prompt
