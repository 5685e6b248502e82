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
#include <random>

#include "doctest.h"
#include "dtaforge/error.hpp"
#include "dtaforge/sim_backend.hpp"
#include "dtaforge/synth_phase1.hpp"
#include "support.hpp"

using namespace dtaforge;
using namespace dtaforge::synth;
using testing_support::mock_gateway;
using testing_support::profile;
using testing_support::prompt_of;
using testing_support::reply;

namespace {

std::unique_ptr<gateway::Gateway> sim_gateway(const std::vector<std::string>& teachers) {
  std::vector<gateway::ProviderProfile> ps;
  for (const auto& t : teachers) {
    auto p = profile(t);
    p.kind = "sim";
    p.model_name = "sim-" + t;
    ps.push_back(p);
  }
  auto gw = std::make_unique<gateway::Gateway>(ps, gateway::ReplayMode::kOff, std::nullopt);
  sim::install(*gw);
  return gw;
}

std::vector<SeedSample> sim_seeds(std::size_t n) {
  std::vector<SeedSample> out;
  std::size_t i = 0;
  for (const auto& p : sim::toy_seeds(n)) out.push_back(SeedSample::from_json(p.seed_json(i % 3 == 0), i)), ++i;
  return out;
}

Phase1Options opts_for(std::vector<std::string> teachers, int workers = 1) {
  Phase1Options o;
  o.teachers = std::move(teachers);
  o.run_seed = 99;
  o.workers = workers;
  return o;
}

}  // namespace

TEST_SUITE("phase1") {
  TEST_CASE("consensus is the mean and the threshold is inclusive") {
    auto r = make_review_record("c", {{"a", 0.5}, {"b", 1.0}}, 0.75);
    CHECK(r.consensus == doctest::Approx(0.75));
    CHECK(r.kept);
    r = make_review_record("c", {{"a", 0.5}, {"b", 0.99}}, 0.75);
    CHECK_FALSE(r.kept);
    CHECK(r.drop_reason == reason::kPeerReview);
    r = make_review_record("c", {}, 0.75);
    CHECK_FALSE(r.kept);
    CHECK(r.drop_reason == reason::kReviewUnavailable);
  }

  TEST_CASE("threshold sweep keeps nested sets") {
    std::mt19937_64 rng(8);
    std::vector<std::map<std::string, double>> pool(300);
    for (auto& s : pool) s = {{"a", (rng() % 101) / 100.0}, {"b", (rng() % 101) / 100.0}};
    std::vector<bool> prev(pool.size(), true);
    for (double tau = 0.0; tau <= 1.0001; tau += 0.05) {
      for (std::size_t i = 0; i < pool.size(); ++i) {
        bool kept = make_review_record("c", pool[i], tau).kept;
        CHECK((!kept || prev[i]));
        prev[i] = kept;
      }
    }
  }

  TEST_CASE("filter_reviewed counts drops by generator and checks pairing") {
    std::vector<TrainCandidate> cs(3);
    for (int i = 0; i < 3; ++i) {
      cs[i].id = "c" + std::to_string(i);
      cs[i].generator_id = i == 2 ? "t2" : "t1";
    }
    std::vector<ReviewRecord> rs = {make_review_record("c0", {{"x", 1.0}}, 0.75),
                                    make_review_record("c1", {{"x", 0.1}}, 0.75),
                                    make_review_record("c2", {}, 0.75)};
    StageManifest m;
    auto f = filter_reviewed(cs, rs, m);
    CHECK(f.kept.size() == 1);
    CHECK(m.dropped_by("t1", reason::kPeerReview) == 1);
    CHECK(m.dropped_by("t2", reason::kReviewUnavailable) == 1);
    CHECK(m.conserved());
    std::swap(rs[0], rs[1]);
    CHECK_THROWS_AS(filter_reviewed(cs, rs, m), Error);
  }

  TEST_CASE("candidate ids are stable hashes of generator and content") {
    CHECK(TrainCandidate::make_id("t", "x", "y") == TrainCandidate::make_id("t", "x", "y"));
    CHECK(TrainCandidate::make_id("t", "x", "y") != TrainCandidate::make_id("u", "x", "y"));
    CHECK(TrainCandidate::make_id("t", "xy", "") != TrainCandidate::make_id("t", "x", "y"));
  }

  TEST_CASE("seed validation") {
    CHECK_THROWS_AS(SeedSample::from_json(Json{{"x_seed", ""}, {"y_seed", "a"}}, 0), Error);
    CHECK_THROWS_AS(SeedSample::from_json(Json{{"x_seed", "q"}}, 0), std::exception);
    auto s = SeedSample::from_json(Json{{"x_seed", "q"}, {"y_seed", "a"}}, 4);
    CHECK(s.id == "seed-4");
  }

  TEST_CASE("unreadable reviewer verdicts are excluded from the mean") {
    auto store = prompt::TemplateStore::load_default();
    auto gw = mock_gateway({profile("g"), profile("r1"), profile("r2")},
                           [](const gateway::ProviderProfile& p, const gateway::ChatRequest&) {
                             return reply(p.id == "r1" ? "\\box{0.9}" : "looks fine to me");
                           });
    Phase1 p1(*gw, store, opts_for({"g", "r1", "r2"}));
    TrainCandidate c;
    c.id = "c";
    c.generator_id = "g";
    c.x_train = "q";
    c.y_train = "a";
    CHECK(p1.reviewers_for("g") == std::vector<std::string>{"r1", "r2"});
    auto r = p1.peer_review(c, p1.reviewers_for("g"));
    CHECK(r.reviewer_scores.size() == 1);
    CHECK(r.consensus == doctest::Approx(0.9));
    CHECK(r.kept);
    CHECK_THROWS_AS(p1.peer_review(c, {"g", "r1"}), Error);
  }

  TEST_CASE("detailed seeds skip the detail call") {
    auto store = prompt::TemplateStore::load_default();
    std::atomic<int> calls{0};
    auto gw = mock_gateway({profile("t")}, [&](const gateway::ProviderProfile&, const gateway::ChatRequest&) {
      ++calls;
      return reply("Expanded solution.");
    });
    Phase1 p1(*gw, store, opts_for({"t"}));
    SeedSample s{"s", "q", "short", "", true};
    CHECK(p1.ensure_detailed(s, "t") == "short");
    CHECK(calls == 0);
    s.is_detailed = false;
    CHECK(p1.ensure_detailed(s, "t") == "Expanded solution.");
    CHECK(calls == 1);
  }

  TEST_CASE("generation drops unparseable outputs and fails when all fail") {
    auto store = prompt::TemplateStore::load_default();
    std::atomic<int> n{0};
    auto gw = mock_gateway({profile("t")}, [&](const gateway::ProviderProfile&, const gateway::ChatRequest& req) {
      CHECK(req.seed.has_value());
      if (n++ % 2) return reply("nothing useful");
      return reply("Problem Statement: Find x.\nSolution Steps:\n1. x = 2\nFinal Answer: 2");
    });
    Phase1 p1(*gw, store, opts_for({"t"}));
    KnowledgeSummary k;
    k.knowledge_points = {{"dB arithmetic", ""}};
    SeedSample s{"s", "q", "a", "", true};
    auto g = p1.generate_problems(k, s, "t", 4);
    CHECK(g.attempts == 4);
    CHECK(g.unparseable == 2);
    REQUIRE(g.candidates.size() == 2);
    CHECK(g.candidates[0].final_answer == 2);
    CHECK(g.candidates[0].provenance == "s");
    auto bad = mock_gateway({profile("t")}, [](const gateway::ProviderProfile&, const gateway::ChatRequest&) {
      return reply("nope");
    });
    Phase1 p2(*bad, store, opts_for({"t"}));
    try {
      p2.generate_problems(k, s, "t", 2);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParse);
    }
  }

  TEST_CASE("full phase on the simulator: bookkeeping and worker invariance") {
    auto store = prompt::TemplateStore::load_default();
    std::vector<std::string> teachers = {"ta", "tb", "tc"};
    auto seeds = sim_seeds(12);
    auto gw1 = sim_gateway(teachers);
    auto r1 = Phase1(*gw1, store, opts_for(teachers, 1)).run(seeds);
    auto gw8 = sim_gateway(teachers);
    auto r8 = Phase1(*gw8, store, opts_for(teachers, 8)).run(seeds);

    CHECK(r1.manifest.conserved());
    CHECK(r1.manifest.total_input() == 36);
    CHECK(r1.raw.size() == r1.reviews.size());
    CHECK(r1.knowledge.size() == seeds.size());
    CHECK(r1.reviewed.size() == r1.manifest.total_kept());
    for (std::size_t i = 0; i < r1.raw.size(); ++i) {
      CHECK(r1.reviews[i].candidate_id == r1.raw[i].id);
      CHECK(r1.reviews[i].reviewer_scores.count(r1.raw[i].generator_id) == 0);
    }
    REQUIRE(r1.reviewed.size() == r8.reviewed.size());
    for (std::size_t i = 0; i < r1.reviewed.size(); ++i)
      CHECK(r1.reviewed[i].to_json() == r8.reviewed[i].to_json());
    CHECK(r1.manifest.to_json()["per_teacher"] == r8.manifest.to_json()["per_teacher"]);
  }
}
