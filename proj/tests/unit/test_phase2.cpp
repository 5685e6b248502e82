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

#include <atomic>
#include <cmath>
#include <random>

#include "doctest.h"
#include "dtaforge/align_phase2.hpp"
#include "dtaforge/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dtaforge;
using namespace dtaforge::align;
using testing_support::mock_gateway;
using testing_support::profile;
using testing_support::reply;

namespace {

Phase2Options opts() {
  Phase2Options o;
  o.teachers = {"t1", "t2"};
  o.student = "student";
  o.summarizer = "sum";
  o.judge = "judge";
  o.run_seed = 5;
  return o;
}

std::vector<gateway::ProviderProfile> profiles() {
  return {profile("t1"), profile("t2"), profile("student", gateway::Role::kStudent),
          profile("sum", gateway::Role::kStyleSummarizer), profile("judge", gateway::Role::kJudge)};
}

AlignedCandidate cand(std::string teacher, double rs, double rr) {
  AlignedCandidate c;
  c.teacher_id = std::move(teacher);
  c.r_student = rs;
  c.r_reward = rr;
  return c;
}

const char* kJson =
    R"({"correctness": {"score": 10}, "completeness": {"score": 5}, "clarity": {"score": 5}, "conciseness": {"score": 0}})";

}  // namespace

TEST_SUITE("phase2") {
  TEST_CASE("reward total uses the configured weights") {
    prompt::RewardScores s;
    s.scores = {10, 5, 5, 0};
    CHECK(reward_total(s) == doctest::Approx(0.5 * 10 + 0.2 * 5 + 0.2 * 5));
    CHECK(reward_total(s, {0.25, 0.25, 0.25, 0.25}) == doctest::Approx(5.0));
  }

  TEST_CASE("z-scores use the population deviation and vanish without spread") {
    CHECK(z_scores({1, 2, 3}) == std::vector<double>{-std::sqrt(1.5), 0.0, std::sqrt(1.5)});
    CHECK(z_scores({4, 4}) == std::vector<double>{0, 0});
    CHECK(z_scores({7}) == std::vector<double>{0});
  }

  TEST_CASE("fusion picks the largest summed z-score, ties by teacher priority") {
    auto sel = fuse_and_select({cand("t2", 1, 1), cand("t1", 0, 0), cand("t3", 2, 2)}, {"t1", "t2", "t3"});
    CHECK(sel.winner == 2);
    CHECK(sel.margin == doctest::Approx(sel.scored[2].r_total - sel.scored[0].r_total));
    auto tie = fuse_and_select({cand("t2", 1, 0), cand("t1", 0, 1)}, {"t1", "t2"});
    CHECK(tie.winner == 1);
    // Opposite orderings of two candidates tie exactly; rounding must not decide.
    auto rounded = fuse_and_select({cand("t1", 0.78590503265281819, 2), cand("t0", -2.1762345488514221, 4)},
                                   {"t0", "t1"});
    CHECK(rounded.winner == 1);
    auto single = fuse_and_select({cand("t1", 3, 3)}, {"t1"});
    CHECK(single.winner == 0);
    CHECK(single.margin == 0.0);
    CHECK_THROWS_AS(fuse_and_select({}, {}), Error);
  }

  TEST_CASE("fusion agrees with the brute-force oracle") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 200; ++t) {
      std::size_t n = 1 + rng() % 5;
      std::vector<AlignedCandidate> cs;
      std::vector<double> rs, rr;
      std::vector<std::size_t> rank;
      for (std::size_t i = 0; i < n; ++i) {
        rs.push_back(nd(rng));
        rr.push_back(std::round(nd(rng) * 3));  // ties are common in judge totals
        rank.push_back(i);
        cs.push_back(cand("t" + std::to_string(i), rs.back(), rr.back()));
      }
      std::vector<std::string> prio;
      for (std::size_t i = 0; i < n; ++i) prio.push_back("t" + std::to_string(i));
      CHECK(fuse_and_select(cs, prio).winner == oracle::fused_winner(rs, rr, rank));
    }
  }

  TEST_CASE("r-IFD identities") {
    CHECK(r_ifd(3.0, 3.0) == 0.0);
    CHECK(std::fabs(r_ifd(8.0, 4.0) - std::log(2.0)) < 1e-12);
    CHECK(std::fabs(r_ifd(4.0, 8.0) + std::log(2.0)) < 1e-12);
    CHECK_THROWS_AS(r_ifd(0.0, 1.0), Error);
  }

  TEST_CASE("student reflection through the gateway") {
    auto store = prompt::TemplateStore::load_default();
    auto gw = mock_gateway(profiles(), [](const gateway::ProviderProfile&, const gateway::ChatRequest&) { return reply(""); }, {},
                           [](const gateway::ProviderProfile&, const std::string& ctx, const std::string& target) {
                             // Conditioning halves the perplexity.
                             double lp = ctx.empty() ? -std::log(4.0) : -std::log(2.0);
                             return std::vector<double>(target.size(), lp);
                           });
    Phase2 p2(*gw, store, opts());
    CHECK(std::fabs(p2.score_student_reflection("question text", "answer") - std::log(2.0)) < 1e-12);
    CHECK(p2.reflection_context("RESP").find("RESP") != std::string::npos);
    CHECK(p2.reflection_context("RESP").back() == '\n');
  }

  TEST_CASE("reward scoring re-asks once with a JSON reminder") {
    auto store = prompt::TemplateStore::load_default();
    std::atomic<int> calls{0};
    bool always_bad = false;
    auto gw = mock_gateway(profiles(), [&](const gateway::ProviderProfile&, const gateway::ChatRequest& req) {
      ++calls;
      if (req.messages.size() == 1 || always_bad) return reply("Correctness is great!");
      CHECK(req.messages.size() == 3);
      CHECK(req.messages[1].role == "assistant");
      return reply(std::string("```json\n") + kJson + "\n```");
    });
    Phase2 p2(*gw, store, opts());
    auto [s, total] = p2.score_reward("q", "a");
    CHECK(calls == 2);
    CHECK(s.correctness() == 10);
    CHECK(total == doctest::Approx(7.0));
    always_bad = true;
    try {
      p2.score_reward("q", "a");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParse);
    }
  }

  TEST_CASE("rewrites that change or lose the final answer are discarded") {
    auto store = prompt::TemplateStore::load_default();
    std::string answer;
    auto gw = mock_gateway(profiles(), [&](const gateway::ProviderProfile&, const gateway::ChatRequest&) {
      return reply(answer);
    });
    Phase2 p2(*gw, store, opts());
    synth::TrainCandidate c;
    c.x_train = "q";
    c.y_train = "a\nFinal Answer: 10";
    c.final_answer = 10;
    StyleGuide g;
    g.language_tone_detail_rules = {"plain"};
    g.structure_rules = {"steps"};
    answer = "**Final Answer:** 10.0005";
    CHECK(p2.rewrite_trajectory(c, g, "t1").text);
    answer = "**Final Answer:** 10.5";
    CHECK(p2.rewrite_trajectory(c, g, "t1").drop_reason == reason::kAnswerDrift);
    answer = "I rewrote it nicely.";
    CHECK(p2.rewrite_trajectory(c, g, "t1").drop_reason == reason::kNoFinalAnswer);
  }

  TEST_CASE("style subsample is capped, sorted and seed-stable") {
    auto store = prompt::TemplateStore::load_default();
    auto gw = mock_gateway(profiles(), [](const gateway::ProviderProfile&, const gateway::ChatRequest&) { return reply(""); });
    auto o = opts();
    o.style_cap = 10;
    Phase2 p2(*gw, store, o);
    auto a = p2.style_subsample(100);
    CHECK(a.size() == 10);
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 10);
    CHECK(a == p2.style_subsample(100));
    CHECK(p2.style_subsample(4) == std::vector<std::size_t>{0, 1, 2, 3});
    o.run_seed = 6;
    CHECK(Phase2(*gw, store, o).style_subsample(100) != a);
  }

  TEST_CASE("style induction parses both rule sections") {
    auto store = prompt::TemplateStore::load_default();
    auto gw = mock_gateway(profiles(), [](const gateway::ProviderProfile&, const gateway::ChatRequest& req) {
      CHECK(req.messages[0].content.find("### Example 1") != std::string::npos);
      return reply(
          "## Language, Tone, and Level of Detail — Requirements\n- Be brief.\n"
          "## Answer Structure and Organization — Requirements\n1. Summary first.\n2. Steps.\n");
    });
    Phase2 p2(*gw, store, opts());
    auto g = p2.induce_style({{"q1", "a1"}, {"q2", "a2"}});
    CHECK(g.language_tone_detail_rules == std::vector<std::string>{"Be brief."});
    CHECK(g.structure_rules.size() == 2);
    CHECK(g.induced_from == 2);
    CHECK(StyleGuide::from_json(g.to_json()).structure_rules == g.structure_rules);
    CHECK_THROWS_AS(p2.induce_style({}), Error);
  }

  TEST_CASE("end to end with mocks: every sample gets a winner or a recorded drop") {
    auto store = prompt::TemplateStore::load_default();
    auto gw = mock_gateway(
        profiles(),
        [](const gateway::ProviderProfile& p, const gateway::ChatRequest& req) {
          const auto& text = req.messages[0].content;
          if (p.id == "sum")
            return reply("## Language, Tone, and Level of Detail\n- Plain.\n## Answer Structure and Organization\n- Steps.\n");
          if (p.id == "judge") return reply(kJson);
          if (p.id == "student") return reply("Answer.\nFinal Answer: 1");
          // Teacher t2 drifts on the question mentioning "drift".
          bool drift = p.id == "t2" && text.find("drift") != std::string::npos;
          return reply(std::string("Rewritten.\nFinal Answer: ") + (drift ? "99" : "1"));
        },
        {},
        [](const gateway::ProviderProfile&, const std::string& ctx, const std::string& target) {
          return std::vector<double>(target.size() / 3 + 1, ctx.empty() ? -2.0 : -1.0 - 0.01 * (ctx.size() % 7));
        });
    std::vector<synth::TrainCandidate> samples(3);
    for (int i = 0; i < 3; ++i) {
      samples[i].id = "s" + std::to_string(i);
      samples[i].x_train = i == 1 ? "question with drift" : "question " + std::to_string(i);
      samples[i].y_train = "steps\nFinal Answer: 1";
      samples[i].final_answer = 1;
      samples[i].generator_id = i == 2 ? "t2" : "t1";
    }
    auto o = opts();
    o.workers = 3;
    auto r = Phase2(*gw, store, o).run(samples);
    CHECK(r.samples.size() == 3);
    CHECK(r.manifest.conserved());
    CHECK(r.samples[1].winning_teacher == "t1");
    CHECK(r.sidecar.size() == 5);  // 3 samples x 2 teachers, one drift discarded
  }
}
