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
#include "dtaforge/decontam.hpp"
#include "dtaforge/error.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dtaforge;
using namespace dtaforge::decontam;
using testing_support::mock_gateway;
using testing_support::profile;
using testing_support::reply;

TEST_SUITE("decontam") {
  TEST_CASE("unit conversion to SI") {
    auto q = to_si(30, "dBm");
    CHECK(q.dimension == "power");
    CHECK(q.value == doctest::Approx(1.0));
    CHECK(to_si(0, "dBW").value == doctest::Approx(1.0));
    CHECK(to_si(2.4, "GHz").value == doctest::Approx(2.4e9));
    CHECK(to_si(5, "km").value == doctest::Approx(5000));
    CHECK(to_si(3, "dB").dimension == "ratio");
    CHECK(to_si(3, "").dimension == "scalar");
    auto p = parse_quantity("1,500 kHz");
    REQUIRE(p);
    CHECK(p->value == doctest::Approx(1.5e6));
    CHECK_FALSE(parse_quantity("fast"));
  }

  TEST_CASE("text normalization folds case, punctuation and number formats") {
    CHECK(normalize_text("The  Link, at 1,000.50 m!") == normalize_text("the link at 1000.5 m"));
    CHECK(normalize_text("x2 = 3") != normalize_text("x 2 = 3"));
  }

  TEST_CASE("shingles") {
    auto s = shingle("a b c d e f", 5);
    CHECK(s == std::vector<std::string>{"a b c d e", "b c d e f"});
    CHECK(shingle("a b", 5) == std::vector<std::string>{"a b"});
    CHECK(shingle("", 5).empty());
  }

  TEST_CASE("exact jaccard agrees with the set oracle") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
      auto p = oracle::make_pair_with(20 + rng() % 50, rng() % 20, rng, i);
      CHECK(exact_jaccard(p.a, p.b) == doctest::Approx(oracle::jaccard(p.a, p.b)));
      CHECK(oracle::jaccard(p.a, p.b) == doctest::Approx(p.jaccard));
    }
  }

  TEST_CASE("minhash estimates are unbiased at moderate size") {
    MinHasher h(11);
    std::mt19937_64 rng(17);
    double bias = 0.0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      auto p = oracle::make_pair_with(100, rng() % 101, rng, i);
      auto sa = minhash_signature(p.a, h, "a"), sb = minhash_signature(p.b, h, "b");
      bias += estimate_jaccard(sa, sb) - p.jaccard;
    }
    CHECK(std::fabs(bias / n) < 0.01);
  }

  TEST_CASE("signatures are deterministic and seed-dependent") {
    std::vector<std::string> sh = {"a b c d e", "b c d e f"};
    CHECK(minhash_signature(sh, MinHasher(1), "x").values == minhash_signature(sh, MinHasher(1), "x").values);
    CHECK(minhash_signature(sh, MinHasher(1), "x").values != minhash_signature(sh, MinHasher(2), "x").values);
    CHECK_THROWS_AS(minhash_signature({}, MinHasher(1), "x"), Error);
  }

  TEST_CASE("lsh index finds identical documents and rejects wrong lengths") {
    MinHasher h(3);
    LshIndex idx(32, 4);
    std::vector<std::string> sh = {"p q r s t", "q r s t u", "r s t u v"};
    idx.add(7, minhash_signature(sh, h, "d"));
    CHECK(idx.query(minhash_signature(sh, h, "q")) == std::vector<std::size_t>{7});
    CHECK(idx.membership(7) == 32);
    CHECK(idx.query(minhash_signature({"z y x w v"}, h, "o")).empty());
    CHECK_THROWS_AS(idx.add(1, minhash_signature(sh, MinHasher(3, 64), "s")), Error);
    CHECK(banding_probability(0.8, 32, 4) == doctest::Approx(oracle::banding(0.8, 32, 4)));
  }

  TEST_CASE("canonical documents") {
    auto d = canonicalize("Find the loss for d_km = 2 km, f_MHz = 900 MHz.",
                          {{"f_MHz", "900 MHz"}, {"d_km", "2 km"}},
                          std::string("20*log10(d_km) + 20*log10(f_MHz) + 32.44"));
    REQUIRE(d.si_params.size() == 2);
    CHECK(d.si_params[0].key == "d_km");  // sorted by key
    CHECK(d.si_params[0].value == doctest::Approx(2000));
    CHECK(d.si_params[1].dimension == "frequency");
    REQUIRE(d.canonical_formula);
    CHECK(canonicalize(d) == d);
    auto bad = canonicalize("text", {}, std::string("a + * b"));
    CHECK_FALSE(bad.canonical_formula);
    CHECK_FALSE(bad.formula_error.empty());
  }

  TEST_CASE("parameter and formula extraction from prose") {
    auto params = extract_parameters("Given P_tx = 20 dBm and G = 3 dBi, with d = 1.5 km.");
    REQUIRE(params.size() >= 2);
    CHECK(params[0].first == "P_tx");
    CHECK(params[0].second == "20 dBm");
    auto f = extract_formula("Use the relation below.\nC = B * log2(1 + S/N).");
    REQUIRE(f);
    CHECK(formula::numeric_equivalence(formula::parse(*f), formula::parse("B*log2(1+S/N)"), {}).equivalent);
  }

  TEST_CASE("slot abstraction matches renamed clones") {
    auto a = canonicalize("q", {{"P", "10 W"}, {"G", "2"}}, std::string("P * G"));
    auto b = canonicalize("q", {{"power", "10 W"}, {"gain", "2"}}, std::string("gain * power"));
    CHECK(slot_abstract(a).formula == slot_abstract(b).formula);
    auto c = canonicalize("q", {{"P", "10 W"}, {"G", "2"}}, std::string("P / G"));
    CHECK(slot_abstract(a).formula != slot_abstract(c).formula);
  }

  TEST_CASE("parameters must agree for a numeric-equivalence flag") {
    auto a = canonicalize("q", {{"P", "30 dBm"}}, std::string("P"));
    auto b = canonicalize("q", {{"x", "1 W"}}, std::string("x"));
    auto c = canonicalize("q", {{"x", "2 W"}}, std::string("x"));
    CHECK(parameters_agree(a, b, 1e-3));
    CHECK_FALSE(parameters_agree(a, c, 1e-3));
    CHECK(parameters_agree(a, canonicalize("q"), 1e-3));
  }

  TEST_CASE("sieve admission and aggregation") {
    DecontamOptions o;
    CHECK(enters_verification(0.86, std::nullopt, o));
    CHECK_FALSE(enters_verification(0.85, 0.89, o));
    CHECK(enters_verification(0.1, 0.90, o));
    CHECK(aggregate_entailment(0.9, 0.5, Aggregation::kMin) == 0.5);
    CHECK(aggregate_entailment(0.9, 0.5, Aggregation::kMean) == doctest::Approx(0.7));
  }

  TEST_CASE("semantic candidates keep the top K by either view") {
    DecontamOptions o;
    o.top_k = 2;
    Views c{{1, 0}, std::nullopt};
    std::vector<Views> bench = {{{0, 1}, std::nullopt}, {{1, 0}, std::nullopt}, {{1, 0.2}, std::nullopt}};
    auto got = semantic_candidates(c, bench, o);
    REQUIRE(got.size() == 2);
    CHECK(got[0].benchmark_index == 1);
    CHECK(got[1].benchmark_index == 2);
  }

  TEST_CASE("options validation") {
    DecontamOptions o;
    CHECK_NOTHROW(o.validate());
    o.bands = 16;
    CHECK_THROWS_AS(o.validate(), Error);
    o = DecontamOptions{};
    o.tau_txt = 1.5;
    CHECK_THROWS_AS(o.validate(), Error);
  }

  TEST_CASE("lexical filter flags verbatim copies only") {
    DecontamOptions o;
    std::vector<LexicalDoc> bench = {
        {"b1", canonicalize("Compute the free space path loss of a 2 km link at 900 MHz carrier frequency today.")},
        {"b2", canonicalize("An Erlang B system with 10 trunks carries 5 Erlangs of offered traffic; find blocking.")}};
    std::vector<LexicalDoc> cands = {
        {"c1", canonicalize("compute the FREE space path loss of a 2 km link, at 900 MHz carrier frequency today")},
        {"c2", canonicalize("A totally different question about satellite orbital periods and Kepler's third law.")}};
    auto r = lexical_filter(cands, bench, o);
    CHECK(r.flagged == std::vector<std::size_t>{0});
    CHECK(r.survivors == std::vector<std::size_t>{1});
    REQUIRE(r.flags.size() == 1);
    CHECK(r.flags[0].benchmark_id == "b1");
    CHECK(r.flags[0].reason == FlagReason::kLexical);
  }

  TEST_CASE("cross verification: entailment, numeric path and quarantine") {
    auto store = prompt::TemplateStore::load_default();
    DecontamOptions o;
    o.judge = "judge";
    std::string mode = "agree";
    auto gw = mock_gateway({profile("judge", gateway::Role::kJudge)},
                           [&](const gateway::ProviderProfile&, const gateway::ChatRequest&) {
                             if (mode == "agree") return reply("Both state the same task. \\box{0.9}");
                             if (mode == "one-way") return reply("\\box{0.3}");
                             return reply("I cannot decide.");
                           });
    auto da = canonicalize("q a"), db = canonicalize("q b");
    VerifyItem a{"a", "question a", &da}, b{"b", "question b", &db};
    auto out = cross_verify(a, b, *gw, store, o);
    CHECK(out.status == VerifyOutcome::Status::kFlagged);
    CHECK(out.flag->reason == FlagReason::kSemanticEntailment);
    CHECK(*out.s_xenc == doctest::Approx(0.9));
    mode = "one-way";
    CHECK(cross_verify(a, b, *gw, store, o).status == VerifyOutcome::Status::kClear);
    mode = "garbage";
    auto q = cross_verify(a, b, *gw, store, o);
    CHECK(q.status == VerifyOutcome::Status::kQuarantined);
    CHECK_FALSE(q.error.empty());

    // Equivalent formulas with agreeing parameters need no judge.
    auto fa = canonicalize("x", {{"P", "30 dBm"}}, std::string("10*log10(P)"));
    auto fb = canonicalize("y", {{"Q", "1 W"}}, std::string("log10(Q^10)"));
    VerifyItem na{"a", "x", &fa}, nb{"b", "y", &fb};
    auto n = cross_verify(na, nb, *gw, store, o);
    CHECK(n.status == VerifyOutcome::Status::kFlagged);
    CHECK(n.flag->reason == FlagReason::kNumericEquivalence);
  }
}
