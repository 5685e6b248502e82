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

// Benchmark decontamination: MinHash/LSH near-duplicate removal followed by a
// semantic sieve (canonical documents, two embedding views, and
// cross-verification by numeric equivalence or bidirectional entailment).

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dtaforge/formula.hpp"
#include "dtaforge/gateway.hpp"
#include "dtaforge/manifest.hpp"
#include "dtaforge/prompt_forge.hpp"
#include "dtaforge/synth_phase1.hpp"

namespace dtaforge::decontam {

// ---- canonical documents ---------------------------------------------------

struct Quantity {
  double value = 0.0;
  std::string dimension;  // "power", "frequency", ..., "scalar"
};

// Converts a value in `unit` to SI. Decibel quantities become linear (dBm and
// dBW to watts, dB and dBi to a ratio). Unknown units pass the value through
// with dimension "unit:<unit>"; an empty unit is "scalar".
Quantity to_si(double value, std::string_view unit);

// Parses "30 dBm", "2.4GHz", "1,000" and similar. nullopt when no leading
// number is present.
std::optional<Quantity> parse_quantity(std::string_view raw);

struct SiParam {
  std::string key;
  double value = 0.0;
  std::string dimension;

  bool operator==(const SiParam&) const = default;
};

struct CanonicalDoc {
  std::string norm_text;
  std::optional<std::string> canonical_formula;  // prefix notation
  std::vector<SiParam> si_params;                // sorted by key
  std::optional<std::string> source_formula;     // as written, for slot naming
  std::string formula_error;                     // set when the formula failed to parse

  Json to_json() const;
  bool operator==(const CanonicalDoc&) const = default;
};

// Case-folds, maps punctuation to spaces, rewrites numbers in shortest form
// ("1,000.50" -> "1000.5") and collapses whitespace.
std::string normalize_text(std::string_view text);

using RawParams = std::vector<std::pair<std::string, std::string>>;

// A formula that fails to parse leaves canonical_formula empty and records
// the error; the document is still usable for the text view.
CanonicalDoc canonicalize(std::string_view text, const RawParams& params = {},
                          const std::optional<std::string>& formula = std::nullopt);

// Re-canonicalization of an existing document; a fixed point.
CanonicalDoc canonicalize(const CanonicalDoc& doc);

// "name = value unit" assignments found in prose.
RawParams extract_parameters(std::string_view text);

// The first "Formula:" line, or the right-hand side of the first assignment
// that parses as a formula with at least one operator.
std::optional<std::string> extract_formula(std::string_view text);

// ---- lexical fingerprints --------------------------------------------------

// Word k-grams joined by single spaces. Texts with fewer than k words give
// one shingle holding the whole text; an empty text gives none.
std::vector<std::string> shingle(std::string_view norm_text, int k = 5);

double exact_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

class MinHasher {
 public:
  MinHasher(std::uint64_t run_seed, int num_hashes = 128);

  std::uint64_t family() const { return family_; }
  int size() const { return static_cast<int>(seeds_.size()); }
  std::uint64_t seed(int h) const { return seeds_.at(static_cast<std::size_t>(h)); }
  std::uint64_t hash(int h, std::string_view shingle) const;

 private:
  std::uint64_t family_;
  std::vector<std::uint64_t> seeds_;
};

struct MinHashSignature {
  std::vector<std::uint64_t> values;
  int shingle_k = 5;
  std::string doc_id;
  std::uint64_t family = 0;
};

// Throws kPrecondition on an empty shingle set.
MinHashSignature minhash_signature(const std::vector<std::string>& shingles,
                                   const MinHasher& hasher, std::string doc_id, int shingle_k = 5);

// Fraction of agreeing positions. Throws kPrecondition when the signatures
// come from different hash families or lengths.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

class LshIndex {
 public:
  LshIndex(int bands, int rows);

  // Throws kPrecondition unless the signature has bands*rows values.
  void add(std::size_t doc, const MinHashSignature& sig);
  // Documents sharing at least one band with `sig`, ascending.
  std::vector<std::size_t> query(const MinHashSignature& sig) const;

  int bands() const { return bands_; }
  int rows() const { return rows_; }
  // Number of band tables `doc` appears in.
  int membership(std::size_t doc) const;

 private:
  std::uint64_t band_key(const MinHashSignature& sig, int band) const;

  int bands_;
  int rows_;
  std::vector<std::unordered_map<std::uint64_t, std::vector<std::size_t>>> tables_;
  std::map<std::size_t, int> membership_;
};

// 1 - (1 - J^r)^b
double banding_probability(double jaccard, int bands, int rows);

// ---- flags -----------------------------------------------------------------

enum class FlagReason { kLexical, kSemanticEntailment, kNumericEquivalence };

std::string_view to_string(FlagReason r);
FlagReason flag_reason_from_string(std::string_view s);

struct ContaminationFlag {
  std::string candidate_id;
  std::string benchmark_id;
  FlagReason reason = FlagReason::kLexical;
  double score = 0.0;

  Json to_json() const;
  static ContaminationFlag from_json(const Json& j);
};

enum class Aggregation { kMin, kMean };

std::string_view to_string(Aggregation a);
Aggregation aggregation_from_string(std::string_view s);

struct DecontamOptions {
  double tau_jac = 0.8;
  int shingle_k = 5;
  int num_hashes = 128;
  int bands = 32;
  int rows = 4;
  double tau_txt = 0.86;
  double tau_form = 0.90;
  int top_k = 50;
  double tau_xenc = 0.60;
  double epsilon = 1e-3;
  Aggregation aggregation = Aggregation::kMin;
  int samples_per_variable = 20;
  formula::Range default_range;
  std::map<std::string, formula::Range> ranges;
  std::uint64_t run_seed = 0;
  int workers = 1;
  std::string embedder;  // provider id
  std::string judge;     // provider id
  gateway::Sampling judge_sampling{0.0, 1.0, std::nullopt, 1024, false};

  // Throws kConfig for inconsistent settings (b*r != H, thresholds outside
  // [0, 1], non-positive counts).
  void validate() const;
};

struct LexicalDoc {
  std::string id;
  CanonicalDoc doc;
};

struct LexicalResult {
  std::vector<std::size_t> survivors;  // candidate indices, ascending
  std::vector<std::size_t> flagged;    // candidate indices, ascending
  std::vector<ContaminationFlag> flags;  // parallel to `flagged`
};

// Indexes the benchmark, then compares each candidate against every band
// collision. A candidate is flagged against its best match when the estimate
// reaches tau_jac.
LexicalResult lexical_filter(const std::vector<LexicalDoc>& candidates,
                             const std::vector<LexicalDoc>& benchmark,
                             const DecontamOptions& opts);

// ---- semantic sieve --------------------------------------------------------

struct Views {
  std::vector<double> txt;
  std::optional<std::vector<double>> form;
};

// The string embedded for the structure view; empty without a formula.
std::string form_view_text(const CanonicalDoc& doc);

Views embed_views(const CanonicalDoc& doc, gateway::Gateway& gw, const std::string& embedder);

bool enters_verification(double cos_txt, std::optional<double> cos_form,
                         const DecontamOptions& opts);

struct SemanticPair {
  std::size_t benchmark_index = 0;
  double cos_txt = 0.0;
  std::optional<double> cos_form;
};

// Top-K benchmark neighbours by max(cos_txt, cos_form), kept when a view
// clears its threshold; strongest first.
std::vector<SemanticPair> semantic_candidates(const Views& candidate,
                                              const std::vector<Views>& benchmark,
                                              const DecontamOptions& opts);

// Variables renamed v1, v2, ... by first appearance, unit conversions removed,
// parameters reduced to (slot, dimension). A document without a formula is
// returned with its parameters only.
struct SlotDoc {
  std::string formula;
  std::vector<std::pair<std::string, std::string>> slots;

  bool operator==(const SlotDoc&) const = default;
};

SlotDoc slot_abstract(const CanonicalDoc& doc);

// Numeric equivalence of two documents' formulas. Uses the formulas as
// written when their variable sets agree, otherwise the slot abstractions.
// nullopt when either side lacks a formula or no shared variable set exists.
std::optional<formula::EquivalenceResult> formulas_equivalent(const CanonicalDoc& a,
                                                              const CanonicalDoc& b,
                                                              const DecontamOptions& opts);

// Same problem instance: the SI parameter values, sorted within each
// dimension, agree pairwise within rel_tol. Vacuously true when either side
// lists no parameters. An equivalent formula with different givens is a
// different problem.
bool parameters_agree(const CanonicalDoc& a, const CanonicalDoc& b, double rel_tol);

struct VerifyOutcome {
  enum class Status { kClear, kFlagged, kQuarantined };
  Status status = Status::kClear;
  std::optional<ContaminationFlag> flag;
  std::optional<double> s_xenc;
  std::string error;
};

double aggregate_entailment(double forward, double backward, Aggregation agg);

struct VerifyItem {
  std::string id;
  std::string question;
  const CanonicalDoc* doc = nullptr;
};

// Numeric equivalence (with agreeing parameters) first; otherwise the judge scores entailment in both
// directions. A judge failure quarantines the pair.
VerifyOutcome cross_verify(const VerifyItem& candidate, const VerifyItem& benchmark,
                           gateway::Gateway& gw, const prompt::TemplateStore& templates,
                           const DecontamOptions& opts);

// ---- stage -----------------------------------------------------------------

struct BenchmarkItem {
  std::string id;
  std::string question;
  std::string answer;
  std::optional<std::string> formula;
  RawParams params;

  static BenchmarkItem from_json(const Json& j, std::size_t line_index);
  Json to_json() const;
};

struct QuarantineRecord {
  std::string candidate_id;
  std::string benchmark_id;
  std::string error;

  Json to_json() const;
};

struct DecontamResult {
  std::vector<synth::TrainCandidate> clean;
  std::vector<ContaminationFlag> flags;
  std::vector<QuarantineRecord> quarantined;
  StageManifest manifest;
};

CanonicalDoc canonical_candidate(const synth::TrainCandidate& c);
CanonicalDoc canonical_benchmark(const BenchmarkItem& b);

class Decontaminator {
 public:
  Decontaminator(gateway::Gateway& gw, const prompt::TemplateStore& templates,
                 DecontamOptions opts, std::vector<std::string> teacher_order = {});

  // MinHash first, then the semantic sieve over the survivors.
  DecontamResult run(const std::vector<synth::TrainCandidate>& candidates,
                     const std::vector<BenchmarkItem>& benchmark) const;

 private:
  gateway::Gateway& gw_;
  const prompt::TemplateStore& templates_;
  DecontamOptions opts_;
  std::vector<std::string> teacher_order_;
};

}  // namespace dtaforge::decontam
