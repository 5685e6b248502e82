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

#include <cmath>

#include "doctest.h"
#include "dtaforge/error.hpp"
#include "dtaforge/prompt_forge.hpp"
#include "dtaforge/util.hpp"
#include "oracles.hpp"
#include "parser_corpus.hpp"

using namespace dtaforge;
using namespace dtaforge::prompt;

namespace {

std::optional<ErrorCode> error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST_SUITE("prompt_forge") {
  TEST_CASE("every template loads with the placeholders its callers bind") {
    auto store = TemplateStore::load_default();
    struct Want {
      TemplateId id;
      std::set<std::string> names;
    };
    std::vector<Want> wants = {
        {TemplateId::kDetail, {"question", "answer", "domain"}},
        {TemplateId::kExtract, {"question", "answer", "domain"}},
        {TemplateId::kGenerate, {"domain", "knowledge_points", "skills"}},
        {TemplateId::kPeerReview, {"question", "answer"}},
        {TemplateId::kSummarizeStyle, {"examples"}},
        {TemplateId::kAlign, {"question", "answer", "style_language_rules", "style_structure_rules"}},
        {TemplateId::kReward, {"question", "answer"}},
        {TemplateId::kPairwise, {"question", "answer_a", "answer_b"}},
        {TemplateId::kMergeKnowledge, {"domain", "knowledge_lists", "question"}},
        {TemplateId::kEntailment, {"premise", "hypothesis"}},
        {TemplateId::kReflectWrapper, {"response"}},
        {TemplateId::kJsonReminder, {}},
    };
    for (const auto& w : wants) {
      CAPTURE(to_string(w.id));
      CHECK(store.get(w.id).required_placeholders == w.names);
    }
    CHECK_FALSE(store.version().empty());
  }

  TEST_CASE("the printed prompts keep their wording") {
    auto store = TemplateStore::load_default();
    CHECK(store.get(TemplateId::kPeerReview).body.find("\\box{}") != std::string::npos);
    CHECK(store.get(TemplateId::kGenerate).body.find("expert educational content creator") !=
          std::string::npos);
    CHECK(store.get(TemplateId::kReward).body.find("correctness") != std::string::npos);
    CHECK(store.get(TemplateId::kPairwise).body.find("answer_a") != std::string::npos);
  }

  TEST_CASE("rendering substitutes once and rejects missing bindings") {
    CHECK(render_body("Q: {{question}} / {{question}}", {{"question", "x {{answer}}"}}) ==
          "Q: x {{answer}} / x {{answer}}");
    CHECK(error_of([] { render_body("{{a}} {{b}}", {{"a", "1"}}); }) == ErrorCode::kMissingKey);
    CHECK(placeholders_in("\\box{} {\"k\": 1} {{a}} {{b_c}} {{a}}") == std::vector<std::string>{"a", "b_c"});
    auto store = TemplateStore::load_default();
    auto text = store.render(TemplateId::kReflectWrapper, {{"response", "RESP"}});
    CHECK(text.find("RESP") != std::string::npos);
    CHECK(text.find("{response}") == std::string::npos);
  }

  TEST_CASE("template directories need a readable manifest") {
    oracle::TempDir tmp("tpl");
    CHECK(error_of([&] { TemplateStore::load(tmp.path); }) == ErrorCode::kIo);
    write_file_atomic(tmp.path / "manifest.json", "{oops");
    CHECK(error_of([&] { TemplateStore::load(tmp.path); }) == ErrorCode::kConfig);
  }

  TEST_CASE("boxed score formatting round-trips") {
    for (double v : {0.0, 0.25, 0.8, 1.0}) CHECK(parse_boxed_score(format_boxed_score(v)) == doctest::Approx(v));
  }

  TEST_CASE("json span location agrees with the bracket-matching oracle") {
    for (const auto& c : corpus::build()) {
      if (c.parser != corpus::Parser::kReward && c.parser != corpus::Parser::kPairwise) continue;
      CAPTURE(c.label);
      auto got = extract_json_object(c.text);
      auto want = oracle::first_json_object(c.text);
      CHECK(got == want);
      CHECK(got.has_value() == c.has_json);
    }
  }

  TEST_CASE("parser corpus: expected values or typed errors, never crashes") {
    auto cases = corpus::build();
    REQUIRE(cases.size() == 200);
    for (const auto& c : cases) {
      CAPTURE(c.label);
      CAPTURE(c.text);
      std::vector<double> got;
      std::optional<ErrorCode> err;
      try {
        switch (c.parser) {
          case corpus::Parser::kBoxed: got = {parse_boxed_score(c.text)}; break;
          case corpus::Parser::kReward: {
            auto r = parse_reward_json(c.text);
            for (int s : r.scores) got.push_back(s);
            break;
          }
          case corpus::Parser::kPairwise: {
            auto p = parse_pairwise_json(c.text);
            got = {p.score_a, p.score_b};
            break;
          }
          case corpus::Parser::kProblem: got = {parse_generated_problem(c.text).final_answer}; break;
        }
      } catch (const Error& e) {
        err = e.code();
      }
      CHECK(err == c.error);
      if (!c.error) {
        REQUIRE(got.size() == c.values.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(c.values[i]));
      }
    }
  }

  TEST_CASE("generated problem sections come back in any order") {
    auto g = parse_generated_problem(
        "Final Answer: 12.5 dB\n\nSolution Steps:\n1. a\n2. b\n\nProblem Statement: Find x.\nTwo lines.");
    CHECK(g.statement == "Find x.\nTwo lines.");
    CHECK(g.solution_steps == "1. a\n2. b");
    CHECK(g.final_answer == 12.5);
  }

  TEST_CASE("single numeric values") {
    CHECK(parse_single_number("3.2 x 10^4 bps") == doctest::Approx(32000));
    CHECK(parse_single_number("**-4.5**") == -4.5);
    CHECK(parse_single_number("1,250 m.") == 1250);
    CHECK(parse_single_number("\\boxed{7}") == 7);
    CHECK(error_of([] { parse_single_number("3 and 4"); }) == ErrorCode::kParse);
    CHECK(error_of([] { parse_single_number("none"); }) == ErrorCode::kParse);
  }

  TEST_CASE("final answer extraction prefers the labelled line") {
    CHECK(extract_final_answer("Steps 1 2 3\n**Final Answer:** 42.5 dB") == 42.5);
    CHECK(extract_final_answer("so the value is \\boxed{9.81}. Also 3.") == 9.81);
    CHECK(extract_final_answer("the result is 17") == 17.0);
    CHECK_FALSE(extract_final_answer("no digits here"));
    CHECK(extract_final_answer("Final Answer:\n\n  $3.5$") == 3.5);
  }

  TEST_CASE("knowledge lists parse and re-render") {
    std::string text =
        "- Core Knowledge Points Assessed\n"
        "  - Knowledge Point 1: Free-space path loss. Relevance: sets the budget.\n"
        "  - Knowledge Point 2: Decibel arithmetic\n"
        "- Problem-Solving Skills\n"
        "  - Strategy: work in dB\n"
        "  - Decomposing Complex Problems: split gains and losses\n"
        "  - Formula Application & Mathematical Tools: logarithms\n";
    auto k = parse_knowledge(text);
    REQUIRE(k.points.size() == 2);
    CHECK(k.points[0].description == "Free-space path loss");
    CHECK(k.points[0].relevance == "sets the budget.");
    CHECK(k.skills.strategy == "work in dB");
    CHECK(k.skills.decomposition == "split gains and losses");
    CHECK(k.skills.formula_applications == "logarithms");
    auto again = parse_knowledge(format_knowledge(k));
    CHECK(again.points.size() == 2);
    CHECK(again.skills.strategy == k.skills.strategy);
    CHECK(error_of([] { parse_knowledge("- Core Knowledge Points Assessed\n"); }) == ErrorCode::kMissingKey);
  }

  TEST_CASE("style guide sections") {
    std::string text =
        "## Answer Structure and Organization — Requirements\n"
        "1. Start with a summary.\n"
        "2. Number the steps.\n"
        "## Language, Tone, and Level of Detail — Requirements\n"
        "- Use plain language.\n";
    auto s = parse_style_guide(text);
    CHECK(s.structure == std::vector<std::string>{"Start with a summary.", "Number the steps."});
    CHECK(s.language_tone_detail == std::vector<std::string>{"Use plain language."});
    CHECK(error_of([] { parse_style_guide("## Language, Tone, and Level of Detail\n- x\n"); }) ==
          ErrorCode::kMissingKey);
  }
}
