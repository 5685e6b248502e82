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
#include <random>

#include "doctest.h"
#include "dtaforge/analytics.hpp"
#include "dtaforge/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dtaforge;
using namespace dtaforge::analytics;
using testing_support::mock_gateway;
using testing_support::profile;
using testing_support::reply;

TEST_SUITE("analytics") {
  TEST_CASE("grading uses the final answer with relative tolerance") {
    CHECK(grade("Final Answer: 100.05", 100));
    CHECK_FALSE(grade("Final Answer: 100.2", 100));
    CHECK_FALSE(grade("no number", 1));
    std::vector<EvalItem> items = {{"a", 1, {"Final Answer: 1"}}, {"b", 2, {"Final Answer: 3"}}};
    CHECK(pass_at_1(items) == 0.5);
    items[0].model_answers.push_back("x");
    CHECK_THROWS_AS(pass_at_1(items), Error);
  }

  TEST_CASE("majority vote clusters within tolerance, smallest value wins ties") {
    auto v = majority_vote({"Final Answer: 2", "Final Answer: 1", "Final Answer: 2.0001", "Final Answer: 1"});
    REQUIRE(v.representative);
    CHECK(*v.representative == 1.0);
    CHECK(v.votes == 2);
    auto u = majority_vote({"?", "??", "Final Answer: 5"});
    CHECK_FALSE(u.representative);
    CHECK(u.votes == 2);
  }

  TEST_CASE("cons@k needs k answers per item") {
    std::vector<std::string> ans(16, "Final Answer: 4");
    for (int i = 0; i < 7; ++i) ans[i] = "Final Answer: 5";
    std::vector<EvalItem> items = {{"a", 4, ans}};
    CHECK(cons_at_k(items) == 1.0);
    items[0].model_answers.pop_back();
    CHECK_THROWS_AS(cons_at_k(items), Error);
  }

  TEST_CASE("decode protocols") {
    auto p = pass1_protocol(false);
    CHECK(p.samples == 1);
    CHECK(p.sampling.temperature == 0.0);
    auto c = cons16_protocol(true);
    CHECK(c.samples == 16);
    CHECK(c.sampling.enable_thinking);
    CHECK(c.sampling.temperature > 0.0);
  }

  TEST_CASE("answer collection seeds sampled calls per question and sample") {
    std::set<std::int64_t> seeds;
    std::mutex mu;
    auto gw = mock_gateway({profile("m", gateway::Role::kStudent)},
                           [&](const gateway::ProviderProfile&, const gateway::ChatRequest& req) {
                             std::lock_guard lock(mu);
                             if (req.seed) seeds.insert(*req.seed);
                             return reply("Final Answer: 1");
                           });
    std::vector<EvalQuestion> qs = {{"q1", "what", 1}, {"q2", "why", 2}};
    auto items = collect_answers(qs, *gw, "m", cons16_protocol(false), 3, 4);
    REQUIRE(items.size() == 2);
    CHECK(items[0].model_answers.size() == 16);
    CHECK(seeds.size() == 32);
    CHECK(cons_at_k(items) == 0.5);
  }

  TEST_CASE("derived efficiency metrics against the closed form") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
      EfficiencyInput e{"m", false, 0.1 + (rng() % 100) / 50.0, 1 + (rng() % 100) / 3.0,
                        10.0 + static_cast<double>(rng() % 400), 0.05 + (rng() % 90) / 100.0};
      auto d = derived_metrics(e);
      auto o = oracle::derive(e.energy_per_token, e.latency, e.throughput, *e.pass1);
      CHECK(d.tokens_per_sample == doctest::Approx(o.tokens));
      CHECK(d.edp == doctest::Approx(o.edp));
      CHECK(d.energy_per_sample == doctest::Approx(o.energy_sample));
      CHECK(d.time_per_correct == doctest::Approx(o.time_correct));
      CHECK(d.energy_per_correct == doctest::Approx(o.energy_correct));
    }
    EfficiencyInput bad{"m", false, 1, 1, 1, std::nullopt};
    CHECK_THROWS_AS(derived_metrics(bad), Error);
  }

  TEST_CASE("efficiency csv parsing") {
    auto rows = parse_efficiency_csv(read_file(std::filesystem::path(DTAFORGE_SOURCE_DIR) / "data/reference/efficiency.csv"));
    REQUIRE(rows.size() == 4);
    CHECK(rows[1].thinking);
    CHECK(*rows[0].pass1 == doctest::Approx(0.7245));
    CHECK_THROWS_AS(parse_efficiency_csv("model,thinking\nx,no\n"), Error);
    CHECK_THROWS_AS(parse_efficiency_csv("model,thinking,energy_j_per_token,latency_s,throughput_tok_s\nx,no,1,2\n"), Error);
    CHECK_THROWS_AS(parse_efficiency_csv("model,thinking,energy_j_per_token,latency_s,throughput_tok_s\nx,maybe,1,2,3\n"), Error);
    CHECK(derived_table(rows).find("1182.7") != std::string::npos);
  }

  TEST_CASE("confidence interval with Student t") {
    auto ci = mean_ci({1, 2, 3});
    CHECK(ci.mean == 2.0);
    CHECK(ci.low == doctest::Approx(-0.484).epsilon(1e-3));
    CHECK(ci.high == doctest::Approx(4.484).epsilon(1e-3));
    CHECK_THROWS_AS(mean_ci({1, 2}), Error);
  }

  TEST_CASE("tokenizer") {
    CHECK(tokenize("First, compute S/N = 3.5 dB!") ==
          std::vector<std::string>{"first", "compute", "s", "n", "3", "5", "db"});
  }

  TEST_CASE("token shift: categories, ordering and sign symmetry") {
    Lexicons lex;
    lex.logical_structural = {"therefore", "first"};
    lex.domain_specific = {"db"};
    std::vector<std::string> base = {"the loss is 3 db", "the gain is 2 db"};
    std::vector<std::string> target = {"first the loss therefore 3 db", "first therefore gain 2 db"};
    auto fwd = token_shift(base, target, lex);
    auto rev = token_shift(target, base, lex);
    REQUIRE(fwd.size() == rev.size());
    for (std::size_t i = 1; i < fwd.size(); ++i) CHECK(std::fabs(fwd[i - 1].shift) >= std::fabs(fwd[i].shift));
    std::map<std::string, double> r;
    for (const auto& row : rev) r[row.token] = row.shift;
    for (const auto& row : fwd) {
      CAPTURE(row.token);
      CHECK(row.shift == doctest::Approx(-r[row.token]));
      if (row.token == "therefore") {
        CHECK(row.category == TokenCategory::kLogicalStructural);
        CHECK(row.shift > 0);
        CHECK(row.baseline_count == 0);
      }
      if (row.token == "db") CHECK(row.category == TokenCategory::kDomainSpecific);
      if (row.token == "is") CHECK(row.shift < 0);
    }
    CHECK_THROWS_AS(token_shift({}, target, lex), Error);
  }

  TEST_CASE("default lexicons load") {
    auto lex = Lexicons::load_default();
    CHECK(lex.categorize("therefore") == TokenCategory::kLogicalStructural);
    CHECK(lex.categorize("dbm") == TokenCategory::kDomainSpecific);
    CHECK(lex.categorize("banana") == TokenCategory::kContent);
  }

  TEST_CASE("pairwise: swap debiasing cancels a constant slot-A bias") {
    auto store = prompt::TemplateStore::load_default();
    auto gw = mock_gateway({profile("judge", gateway::Role::kJudge)},
                           [](const gateway::ProviderProfile&, const gateway::ChatRequest&) {
                             // Identical quality 4 for both, plus 2 for whichever sits in slot A.
                             return reply(R"({"evaluation": {"answer_a": {"score": 6}, "answer_b": {"score": 4}}})");
                           });
    gateway::Sampling s;
    auto same = pairwise_judge("q", "the same answer", "the same answer", *gw, "judge", store, s);
    CHECK(same.original.score_a == same.original.score_b + 2);
    CHECK(same.score_a == same.score_b);
    CHECK(same.score_a == 5.0);
    auto summary = summarize_pairwise({same});
    CHECK(summary.ties == 1);
    auto d = debias({8, 6, ""}, {8, 6, ""});
    CHECK(d.score_a == d.score_b);
  }
}
