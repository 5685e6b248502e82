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

#include "dtaforge/decontam.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <regex>
#include <set>

#include "dtaforge/error.hpp"

namespace dtaforge::decontam {

// ---- units -----------------------------------------------------------------

namespace {

struct UnitDef {
  const char* name;
  double scale;
  const char* dimension;
  bool decibel;  // value is 10*log10 of the scaled quantity
};

// Exact-case table first; the lower-case fallback only covers names that are
// unambiguous once folded.
const std::vector<UnitDef>& unit_table() {
  static const std::vector<UnitDef> units = {
      {"W", 1.0, "power", false},       {"mW", 1e-3, "power", false},
      {"uW", 1e-6, "power", false},     {"\xC2\xB5W", 1e-6, "power", false},
      {"kW", 1e3, "power", false},      {"MW", 1e6, "power", false},
      {"dBm", 1e-3, "power", true},     {"dBW", 1.0, "power", true},
      {"dB", 1.0, "ratio", true},       {"dBi", 1.0, "ratio", true},
      {"Hz", 1.0, "frequency", false},  {"kHz", 1e3, "frequency", false},
      {"MHz", 1e6, "frequency", false}, {"GHz", 1e9, "frequency", false},
      {"THz", 1e12, "frequency", false},
      {"s", 1.0, "time", false},        {"ms", 1e-3, "time", false},
      {"us", 1e-6, "time", false},      {"\xC2\xB5s", 1e-6, "time", false},
      {"ns", 1e-9, "time", false},      {"min", 60.0, "time", false},
      {"m", 1.0, "length", false},      {"km", 1e3, "length", false},
      {"cm", 1e-2, "length", false},    {"mm", 1e-3, "length", false},
      {"bps", 1.0, "rate", false},      {"kbps", 1e3, "rate", false},
      {"Mbps", 1e6, "rate", false},     {"Gbps", 1e9, "rate", false},
      {"bit/s", 1.0, "rate", false},    {"kbit/s", 1e3, "rate", false},
      {"Mbit/s", 1e6, "rate", false},   {"Gbit/s", 1e9, "rate", false},
      {"J", 1.0, "energy", false},      {"mJ", 1e-3, "energy", false},
  };
  return units;
}

const UnitDef* find_unit(std::string_view unit) {
  for (const auto& u : unit_table())
    if (unit == u.name) return &u;
  static const std::set<std::string> folded = {"dbm", "dbw", "db",  "dbi",  "hz",
                                               "khz", "mhz", "ghz", "thz",  "bps",
                                               "kbps", "mbps", "gbps"};
  std::string low = to_lower(unit);
  if (!folded.count(low)) return nullptr;
  for (const auto& u : unit_table())
    if (to_lower(u.name) == low) return &u;
  return nullptr;
}

const std::string& number_pattern() {
  static const std::string p =
      R"([-+]?(?:(?:\d{1,3}(?:,\d{3})+(?!\d)|\d+)(?:\.\d+)?|\.\d+)(?:[eE][-+]?\d+)?)";
  return p;
}

std::optional<double> parse_grouped(std::string s) {
  s.erase(std::remove(s.begin(), s.end(), ','), s.end());
  return parse_double(s);
}

}  // namespace

Quantity to_si(double value, std::string_view unit) {
  auto u = trim(unit);
  if (u.empty()) return {value, "scalar"};
  const UnitDef* def = find_unit(u);
  if (!def) return {value, "unit:" + std::string(u)};
  double v = def->decibel ? std::pow(10.0, value / 10.0) : value;
  return {v * def->scale, def->dimension};
}

std::optional<Quantity> parse_quantity(std::string_view raw) {
  static const std::regex re("^\\s*(" + number_pattern() + ")\\s*((?:\xC2\xB5|[A-Za-z/])*)\\s*$");
  std::string s(raw);
  std::smatch m;
  if (!std::regex_match(s, m, re)) return std::nullopt;
  auto v = parse_grouped(m[1].str());
  if (!v) return std::nullopt;
  return to_si(*v, m[2].str());
}

// ---- canonical documents ---------------------------------------------------

Json CanonicalDoc::to_json() const {
  Json params = Json::array();
  for (const auto& p : si_params)
    params.push_back({{"key", p.key}, {"value", p.value}, {"dimension", p.dimension}});
  Json j{{"norm_text", norm_text}, {"si_params", params}};
  j["canonical_formula"] = canonical_formula ? Json(*canonical_formula) : Json(nullptr);
  if (!formula_error.empty()) j["formula_error"] = formula_error;
  return j;
}

std::string normalize_text(std::string_view text) {
  static const std::regex num("(?:(?:\\d{1,3}(?:,\\d{3})+(?!\\d)|\\d+)(?:\\.\\d+)?|\\.\\d+)"
                              "(?:[eE][-+]?\\d+)?");
  std::string out;
  out.reserve(text.size());
  std::string s(text);
  auto push_space = [&] {
    if (!out.empty() && out.back() != ' ') out.push_back(' ');
  };
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    bool prev_word = i > 0 && (std::isalnum(static_cast<unsigned char>(s[i - 1])) || s[i - 1] == '_');
    bool num_start = std::isdigit(c) ||
                     (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])));
    if (num_start && !prev_word) {
      std::smatch m;
      if (std::regex_search(s.cbegin() + static_cast<std::ptrdiff_t>(i), s.cend(), m, num,
                            std::regex_constants::match_continuous)) {
        auto v = parse_grouped(m.str());
        push_space();
        out += v ? format_double(*v) : m.str();
        out.push_back(' ');
        i += static_cast<std::size_t>(m.length());
        continue;
      }
    }
    if (std::isalnum(c) || c >= 0x80) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      push_space();
    }
    ++i;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

namespace {

void sort_params(std::vector<SiParam>& params) {
  std::stable_sort(params.begin(), params.end(),
                   [](const SiParam& a, const SiParam& b) { return a.key < b.key; });
  params.erase(std::unique(params.begin(), params.end(),
                           [](const SiParam& a, const SiParam& b) { return a.key == b.key; }),
               params.end());
}

}  // namespace

CanonicalDoc canonicalize(std::string_view text, const RawParams& params,
                          const std::optional<std::string>& formula) {
  CanonicalDoc doc;
  doc.norm_text = normalize_text(text);
  for (const auto& [key, raw] : params) {
    auto q = parse_quantity(raw);
    if (!q) continue;
    doc.si_params.push_back({std::string(trim(key)), q->value, q->dimension});
  }
  sort_params(doc.si_params);
  if (formula && !trim(*formula).empty()) {
    doc.source_formula = std::string(trim(*formula));
    try {
      doc.canonical_formula = formula::canonical_string(*doc.source_formula);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kParse) throw;
      doc.formula_error = e.what();
    }
  }
  return doc;
}

CanonicalDoc canonicalize(const CanonicalDoc& in) {
  CanonicalDoc doc = in;
  doc.norm_text = normalize_text(in.norm_text);
  sort_params(doc.si_params);
  if (doc.canonical_formula) doc.canonical_formula = formula::canonical_string(*doc.canonical_formula);
  return doc;
}

RawParams extract_parameters(std::string_view text) {
  static const std::regex re("([A-Za-z][A-Za-z0-9_]*)\\s*=\\s*(" + number_pattern() +
                             ")(?:\\s*((?:\xC2\xB5|[A-Za-z/])+))?");
  RawParams out;
  std::set<std::string> seen;
  std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator();
       ++it) {
    const auto& m = *it;
    std::string key = m[1].str();
    if (!seen.insert(key).second) continue;
    std::string raw = m[2].str();
    if (m[3].matched && find_unit(m[3].str())) raw += " " + m[3].str();
    out.emplace_back(std::move(key), std::move(raw));
  }
  return out;
}

namespace {

std::string clean_formula_text(std::string s) {
  static const std::regex frac(R"(\\[dt]?frac\s*\{([^{}]*)\}\s*\{([^{}]*)\})");
  for (std::string prev; prev != s;) {
    prev = s;
    s = std::regex_replace(s, frac, "(($1)/($2))");
  }
  static const std::regex sqrt_re(R"(\\sqrt\s*\{([^{}]*)\})");
  static const std::regex logb_re(R"(\\?log_\{?(10|2)\}?)");
  s = std::regex_replace(s, sqrt_re, "sqrt($1)");
  s = std::regex_replace(s, logb_re, "log$1");
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '$' || c == '`' || c == '{' || c == '}') continue;
    if (c == '\\') {
      // \cdot and \times become '*'; other commands are dropped.
      std::size_t j = i + 1;
      while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
      std::string cmd = s.substr(i + 1, j - i - 1);
      if (cmd == "cdot" || cmd == "times") out += '*';
      if (cmd == "log" || cmd == "ln" || cmd == "exp") out += cmd;
      i = j - 1;
      continue;
    }
    out.push_back(c);
  }
  auto t = std::string(trim(out));
  while (!t.empty() && (t.back() == '.' || t.back() == ',' || t.back() == ';')) t.pop_back();
  return std::string(trim(t));
}

bool usable_formula(const std::string& s) {
  if (s.find_first_of("+-*/^(") == std::string::npos) return false;
  try {
    return !formula::variables(formula::parse(s)).empty();
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

std::optional<std::string> extract_formula(std::string_view text) {
  auto lines = split_lines(text);
  for (const auto& line : lines) {
    auto pos = find_ci(line, "formula:");
    if (pos == std::string::npos) continue;
    auto body = clean_formula_text(line.substr(pos + 8));
    auto parts = split(body, '=');
    // "Formula: y = expr" names the output; keep the right-hand side.
    for (std::size_t i = parts.size() > 1 ? 1 : 0; i < parts.size(); ++i) {
      auto cand = clean_formula_text(parts[i]);
      if (usable_formula(cand)) return cand;
    }
  }
  for (const auto& line : lines) {
    auto parts = split(clean_formula_text(line), '=');
    for (std::size_t i = 1; i < parts.size(); ++i) {
      auto cand = clean_formula_text(parts[i]);
      if (usable_formula(cand)) return cand;
    }
  }
  return std::nullopt;
}

// ---- lexical fingerprints --------------------------------------------------

std::vector<std::string> shingle(std::string_view norm_text, int k) {
  if (k < 1) fail(ErrorCode::kPrecondition, "shingle: k must be >= 1");
  std::vector<std::string> words;
  std::string cur;
  for (char c : norm_text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  std::vector<std::string> out;
  if (words.empty()) return out;
  const auto uk = static_cast<std::size_t>(k);
  if (words.size() < uk) {
    out.push_back(join(words, " "));
    return out;
  }
  for (std::size_t i = 0; i + uk <= words.size(); ++i) {
    std::string s = words[i];
    for (std::size_t j = 1; j < uk; ++j) s += " " + words[i + j];
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double exact_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& s : sa) inter += sb.count(s);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

MinHasher::MinHasher(std::uint64_t run_seed, int num_hashes) {
  if (num_hashes < 1) fail(ErrorCode::kPrecondition, "MinHasher: num_hashes must be >= 1");
  family_ = derive_seed(run_seed, "minhash/" + std::to_string(num_hashes));
  seeds_.reserve(static_cast<std::size_t>(num_hashes));
  for (int h = 0; h < num_hashes; ++h)
    seeds_.push_back(mix64(family_ ^ mix64(static_cast<std::uint64_t>(h))));
}

std::uint64_t MinHasher::hash(int h, std::string_view shingle) const {
  return mix64(fnv1a64(shingle) ^ seed(h));
}

MinHashSignature minhash_signature(const std::vector<std::string>& shingles,
                                   const MinHasher& hasher, std::string doc_id, int shingle_k) {
  if (shingles.empty())
    fail(ErrorCode::kPrecondition, "minhash_signature: empty shingle set for '" + doc_id + "'");
  MinHashSignature sig;
  sig.values.assign(static_cast<std::size_t>(hasher.size()),
                    std::numeric_limits<std::uint64_t>::max());
  sig.shingle_k = shingle_k;
  sig.doc_id = std::move(doc_id);
  sig.family = hasher.family();
  for (const auto& s : shingles) {
    std::uint64_t base = fnv1a64(s);
    for (int h = 0; h < hasher.size(); ++h) {
      // hasher.hash(h, s) with the base hash hoisted out of the loop.
      auto& slot = sig.values[static_cast<std::size_t>(h)];
      slot = std::min(slot, mix64(base ^ hasher.seed(h)));
    }
  }
  return sig;
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.family != b.family || a.shingle_k != b.shingle_k)
    fail(ErrorCode::kPrecondition, "estimate_jaccard: signatures from different hash families");
  if (a.values.size() != b.values.size() || a.values.empty())
    fail(ErrorCode::kPrecondition, "estimate_jaccard: signature lengths differ");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) agree += a.values[i] == b.values[i];
  return static_cast<double>(agree) / static_cast<double>(a.values.size());
}

LshIndex::LshIndex(int bands, int rows) : bands_(bands), rows_(rows) {
  if (bands < 1 || rows < 1) fail(ErrorCode::kPrecondition, "LshIndex: bands and rows must be >= 1");
  tables_.resize(static_cast<std::size_t>(bands));
}

std::uint64_t LshIndex::band_key(const MinHashSignature& sig, int band) const {
  if (sig.values.size() != static_cast<std::size_t>(bands_ * rows_))
    fail(ErrorCode::kPrecondition, "LshIndex: signature length " +
                                       std::to_string(sig.values.size()) + " != bands*rows");
  std::uint64_t h = mix64(static_cast<std::uint64_t>(band));
  for (int r = 0; r < rows_; ++r)
    h = mix64(h ^ sig.values[static_cast<std::size_t>(band * rows_ + r)]);
  return h;
}

void LshIndex::add(std::size_t doc, const MinHashSignature& sig) {
  for (int b = 0; b < bands_; ++b) {
    auto& bucket = tables_[static_cast<std::size_t>(b)][band_key(sig, b)];
    if (bucket.empty() || bucket.back() != doc) bucket.push_back(doc);
  }
  membership_[doc] = bands_;
}

std::vector<std::size_t> LshIndex::query(const MinHashSignature& sig) const {
  std::vector<std::size_t> out;
  for (int b = 0; b < bands_; ++b) {
    const auto& table = tables_[static_cast<std::size_t>(b)];
    auto it = table.find(band_key(sig, b));
    if (it != table.end()) out.insert(out.end(), it->second.begin(), it->second.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int LshIndex::membership(std::size_t doc) const {
  auto it = membership_.find(doc);
  return it == membership_.end() ? 0 : it->second;
}

double banding_probability(double jaccard, int bands, int rows) {
  return 1.0 - std::pow(1.0 - std::pow(jaccard, rows), bands);
}

// ---- flags and options -----------------------------------------------------

std::string_view to_string(FlagReason r) {
  switch (r) {
    case FlagReason::kLexical: return "lexical";
    case FlagReason::kSemanticEntailment: return "semantic_entailment";
    case FlagReason::kNumericEquivalence: return "numeric_equivalence";
  }
  return "lexical";
}

FlagReason flag_reason_from_string(std::string_view s) {
  if (s == "lexical") return FlagReason::kLexical;
  if (s == "semantic_entailment") return FlagReason::kSemanticEntailment;
  if (s == "numeric_equivalence") return FlagReason::kNumericEquivalence;
  fail(ErrorCode::kParse, "unknown contamination reason '" + std::string(s) + "'");
}

Json ContaminationFlag::to_json() const {
  return Json{{"candidate_id", candidate_id},
              {"benchmark_id", benchmark_id},
              {"reason", std::string(to_string(reason))},
              {"score", score}};
}

ContaminationFlag ContaminationFlag::from_json(const Json& j) {
  ContaminationFlag f;
  f.candidate_id = j.at("candidate_id").get<std::string>();
  f.benchmark_id = j.at("benchmark_id").get<std::string>();
  f.reason = flag_reason_from_string(j.at("reason").get<std::string>());
  f.score = j.at("score").get<double>();
  return f;
}

std::string_view to_string(Aggregation a) { return a == Aggregation::kMin ? "min" : "mean"; }

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "min") return Aggregation::kMin;
  if (s == "mean") return Aggregation::kMean;
  fail(ErrorCode::kConfig, "entailment aggregation must be 'min' or 'mean', got '" +
                               std::string(s) + "'");
}

void DecontamOptions::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
      fail(ErrorCode::kConfig, std::string(name) + " must lie in [0, 1]");
  };
  unit(tau_jac, "tau_jac");
  unit(tau_txt, "tau_txt");
  unit(tau_form, "tau_form");
  unit(tau_xenc, "tau_xenc");
  if (shingle_k < 1) fail(ErrorCode::kConfig, "shingle_k must be >= 1");
  if (num_hashes < 1 || bands < 1 || rows < 1)
    fail(ErrorCode::kConfig, "num_hashes, bands and rows must be >= 1");
  if (bands * rows != num_hashes)
    fail(ErrorCode::kConfig, "bands * rows (" + std::to_string(bands * rows) +
                                 ") must equal num_hashes (" + std::to_string(num_hashes) + ")");
  if (top_k < 1) fail(ErrorCode::kConfig, "top_k must be >= 1");
  if (!(epsilon > 0.0)) fail(ErrorCode::kConfig, "epsilon must be positive");
  if (samples_per_variable < 1) fail(ErrorCode::kConfig, "samples_per_variable must be >= 1");
  if (!(default_range.lo < default_range.hi)) fail(ErrorCode::kConfig, "empty default range");
}

// ---- lexical filter --------------------------------------------------------

LexicalResult lexical_filter(const std::vector<LexicalDoc>& candidates,
                             const std::vector<LexicalDoc>& benchmark,
                             const DecontamOptions& opts) {
  MinHasher hasher(opts.run_seed, opts.num_hashes);
  LshIndex index(opts.bands, opts.rows);

  std::vector<std::optional<MinHashSignature>> bench_sigs(benchmark.size());
  parallel_for(benchmark.size(), opts.workers, [&](std::size_t i) {
    auto sh = shingle(benchmark[i].doc.norm_text, opts.shingle_k);
    if (!sh.empty()) bench_sigs[i] = minhash_signature(sh, hasher, benchmark[i].id, opts.shingle_k);
  });
  for (std::size_t i = 0; i < benchmark.size(); ++i)
    if (bench_sigs[i]) index.add(i, *bench_sigs[i]);

  std::vector<std::optional<ContaminationFlag>> hits(candidates.size());
  parallel_for(candidates.size(), opts.workers, [&](std::size_t i) {
    auto sh = shingle(candidates[i].doc.norm_text, opts.shingle_k);
    if (sh.empty()) return;
    auto sig = minhash_signature(sh, hasher, candidates[i].id, opts.shingle_k);
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j : index.query(sig)) {
      double est = estimate_jaccard(sig, *bench_sigs[j]);
      if (est > best) {
        best = est;
        best_j = j;
      }
    }
    if (best >= opts.tau_jac)
      hits[i] = ContaminationFlag{candidates[i].id, benchmark[best_j].id, FlagReason::kLexical, best};
  });

  LexicalResult out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (hits[i]) {
      out.flagged.push_back(i);
      out.flags.push_back(std::move(*hits[i]));
    } else {
      out.survivors.push_back(i);
    }
  }
  return out;
}

// ---- semantic sieve --------------------------------------------------------

std::string form_view_text(const CanonicalDoc& doc) {
  if (!doc.canonical_formula) return {};
  std::string s = *doc.canonical_formula;
  for (const auto& p : doc.si_params)
    s += " ; " + p.key + " = " + format_double(p.value) + " " + p.dimension;
  return s;
}

Views embed_views(const CanonicalDoc& doc, gateway::Gateway& gw, const std::string& embedder) {
  Views v;
  v.txt = gw.embed(embedder, doc.norm_text);
  if (doc.canonical_formula) v.form = gw.embed(embedder, form_view_text(doc));
  return v;
}

bool enters_verification(double cos_txt, std::optional<double> cos_form,
                         const DecontamOptions& opts) {
  return cos_txt >= opts.tau_txt || (cos_form && *cos_form >= opts.tau_form);
}

std::vector<SemanticPair> semantic_candidates(const Views& candidate,
                                              const std::vector<Views>& benchmark,
                                              const DecontamOptions& opts) {
  struct Scored {
    SemanticPair pair;
    double score;
  };
  std::vector<Scored> all;
  all.reserve(benchmark.size());
  for (std::size_t i = 0; i < benchmark.size(); ++i) {
    SemanticPair p;
    p.benchmark_index = i;
    p.cos_txt = gateway::cosine(candidate.txt, benchmark[i].txt);
    if (candidate.form && benchmark[i].form)
      p.cos_form = gateway::cosine(*candidate.form, *benchmark[i].form);
    double score = std::max(p.cos_txt, p.cos_form.value_or(-1.0));
    all.push_back({p, score});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Scored& a, const Scored& b) { return a.score > b.score; });
  if (all.size() > static_cast<std::size_t>(opts.top_k))
    all.resize(static_cast<std::size_t>(opts.top_k));
  std::vector<SemanticPair> out;
  for (const auto& s : all)
    if (enters_verification(s.pair.cos_txt, s.pair.cos_form, opts)) out.push_back(s.pair);
  return out;
}

SlotDoc slot_abstract(const CanonicalDoc& doc) {
  SlotDoc out;
  std::optional<formula::Expr> e;
  const auto& src = doc.source_formula ? doc.source_formula : doc.canonical_formula;
  if (src) {
    try {
      e = formula::parse(*src);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kParse) throw;
    }
  }
  if (!e) {
    for (const auto& p : doc.si_params) out.slots.emplace_back(p.key, p.dimension);
    return out;
  }
  std::map<std::string, std::string> names;
  auto order = formula::variables_in_order(*e);
  for (std::size_t i = 0; i < order.size(); ++i) names[order[i]] = "v" + std::to_string(i + 1);
  auto abstracted = formula::canonicalize(
      formula::strip_unit_conversions(formula::canonicalize(formula::rename_variables(*e, names))));
  out.formula = formula::to_prefix(abstracted);
  for (const auto& v : order) {
    auto it = std::find_if(doc.si_params.begin(), doc.si_params.end(),
                           [&](const SiParam& p) { return p.key == v; });
    out.slots.emplace_back(names[v], it == doc.si_params.end() ? "?" : it->dimension);
  }
  return out;
}

std::optional<formula::EquivalenceResult> formulas_equivalent(const CanonicalDoc& a,
                                                              const CanonicalDoc& b,
                                                              const DecontamOptions& opts) {
  if (!a.canonical_formula || !b.canonical_formula) return std::nullopt;
  formula::EquivalenceOptions eo;
  eo.samples_per_variable = opts.samples_per_variable;
  eo.rel_tol = opts.epsilon;
  eo.default_range = opts.default_range;
  eo.ranges = opts.ranges;
  eo.seed = derive_seed(opts.run_seed,
                        "numeq|" + *a.canonical_formula + "|" + *b.canonical_formula);

  auto fa = formula::parse(*a.canonical_formula);
  auto fb = formula::parse(*b.canonical_formula);
  auto va = formula::variables(fa);
  if (va.empty() || formula::variables(fb).empty()) return std::nullopt;
  if (va == formula::variables(fb)) return formula::numeric_equivalence(fa, fb, eo);

  auto sa = slot_abstract(a);
  auto sb = slot_abstract(b);
  if (sa.formula.empty() || sb.formula.empty()) return std::nullopt;
  auto ea = formula::parse(sa.formula);
  auto eb = formula::parse(sb.formula);
  if (formula::variables(ea) != formula::variables(eb)) return std::nullopt;
  eo.ranges.clear();  // slot names no longer match configured variable names
  return formula::numeric_equivalence(ea, eb, eo);
}

double aggregate_entailment(double forward, double backward, Aggregation agg) {
  return agg == Aggregation::kMin ? std::min(forward, backward) : 0.5 * (forward + backward);
}

namespace {

double judge_entailment(const std::string& premise, const std::string& hypothesis,
                        gateway::Gateway& gw, const prompt::TemplateStore& templates,
                        const DecontamOptions& opts) {
  auto text = templates.render(prompt::TemplateId::kEntailment,
                               {{"premise", premise}, {"hypothesis", hypothesis}});
  auto resp = gw.chat_complete(opts.judge, opts.judge_sampling.request(std::move(text)));
  return prompt::parse_boxed_score(resp.text);
}

bool judge_failure(ErrorCode c) {
  return c == ErrorCode::kTransport || c == ErrorCode::kProvider || c == ErrorCode::kParse ||
         c == ErrorCode::kRange || c == ErrorCode::kUnsupported;
}

}  // namespace

bool parameters_agree(const CanonicalDoc& a, const CanonicalDoc& b, double rel_tol) {
  if (a.si_params.empty() || b.si_params.empty()) return true;
  if (a.si_params.size() != b.si_params.size()) return false;
  auto values = [](const CanonicalDoc& d) {
    std::vector<std::pair<std::string, double>> v;
    for (const auto& p : d.si_params) v.emplace_back(p.dimension, p.value);
    std::sort(v.begin(), v.end());
    return v;
  };
  auto va = values(a), vb = values(b);
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i].first != vb[i].first) return false;
    double scale = std::max({std::fabs(va[i].second), std::fabs(vb[i].second), 1e-12});
    if (std::fabs(va[i].second - vb[i].second) / scale > rel_tol) return false;
  }
  return true;
}

VerifyOutcome cross_verify(const VerifyItem& candidate, const VerifyItem& benchmark,
                           gateway::Gateway& gw, const prompt::TemplateStore& templates,
                           const DecontamOptions& opts) {
  VerifyOutcome out;
  if (candidate.doc && benchmark.doc) {
    auto eq = formulas_equivalent(*candidate.doc, *benchmark.doc, opts);
    if (eq && eq->equivalent && parameters_agree(*candidate.doc, *benchmark.doc, opts.epsilon)) {
      out.status = VerifyOutcome::Status::kFlagged;
      out.flag = ContaminationFlag{candidate.id, benchmark.id, FlagReason::kNumericEquivalence,
                                   1.0 - eq->max_rel_err};
      return out;
    }
  }
  if (opts.judge.empty()) fail(ErrorCode::kConfig, "decontam: no entailment judge configured");
  double fwd, bwd;
  try {
    fwd = judge_entailment(candidate.question, benchmark.question, gw, templates, opts);
    bwd = judge_entailment(benchmark.question, candidate.question, gw, templates, opts);
  } catch (const Error& e) {
    if (!judge_failure(e.code())) throw;
    out.status = VerifyOutcome::Status::kQuarantined;
    out.error = e.what();
    return out;
  }
  double s = aggregate_entailment(fwd, bwd, opts.aggregation);
  out.s_xenc = s;
  if (s >= opts.tau_xenc) {
    out.status = VerifyOutcome::Status::kFlagged;
    out.flag = ContaminationFlag{candidate.id, benchmark.id, FlagReason::kSemanticEntailment, s};
  }
  return out;
}

// ---- stage -----------------------------------------------------------------

BenchmarkItem BenchmarkItem::from_json(const Json& j, std::size_t line_index) {
  BenchmarkItem b;
  b.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                          : "bench-" + std::to_string(line_index);
  if (j.contains("question"))
    b.question = j["question"].get<std::string>();
  else if (j.contains("problem"))
    b.question = j["problem"].get<std::string>();
  else
    fail(ErrorCode::kMissingKey, "benchmark item " + std::to_string(line_index) + ": no question");
  if (trim(b.question).empty())
    fail(ErrorCode::kPrecondition, "benchmark item '" + b.id + "': empty question");
  if (j.contains("answer"))
    b.answer = j["answer"].is_string() ? j["answer"].get<std::string>() : j["answer"].dump();
  if (j.contains("formula") && j["formula"].is_string()) b.formula = j["formula"].get<std::string>();
  if (j.contains("params")) {
    const auto& p = j["params"];
    if (p.is_object()) {
      for (const auto& [k, v] : p.items())
        b.params.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
    } else if (p.is_array()) {
      for (const auto& e : p) {
        const auto& v = e.at("value");
        b.params.emplace_back(e.at("key").get<std::string>(),
                              v.is_string() ? v.get<std::string>() : v.dump());
      }
    }
  }
  return b;
}

Json BenchmarkItem::to_json() const {
  Json params = Json::object();
  for (const auto& [k, v] : this->params) params[k] = v;
  Json j{{"id", id}, {"question", question}, {"answer", answer}, {"params", params}};
  if (formula) j["formula"] = *formula;
  return j;
}

Json QuarantineRecord::to_json() const {
  return Json{{"candidate_id", candidate_id}, {"benchmark_id", benchmark_id}, {"error", error}};
}

CanonicalDoc canonical_candidate(const synth::TrainCandidate& c) {
  auto f = extract_formula(c.y_train);
  if (!f) f = extract_formula(c.x_train);
  return canonicalize(c.x_train, extract_parameters(c.x_train), f);
}

CanonicalDoc canonical_benchmark(const BenchmarkItem& b) {
  auto params = b.params.empty() ? extract_parameters(b.question) : b.params;
  auto f = b.formula;
  if (!f) f = extract_formula(b.answer);
  if (!f) f = extract_formula(b.question);
  return canonicalize(b.question, params, f);
}

Decontaminator::Decontaminator(gateway::Gateway& gw, const prompt::TemplateStore& templates,
                               DecontamOptions opts, std::vector<std::string> teacher_order)
    : gw_(gw), templates_(templates), opts_(std::move(opts)),
      teacher_order_(std::move(teacher_order)) {
  opts_.validate();
}

DecontamResult Decontaminator::run(const std::vector<synth::TrainCandidate>& candidates,
                                   const std::vector<BenchmarkItem>& benchmark) const {
  DecontamResult result;
  auto& m = result.manifest;
  m.stage = "decontam";
  m.teacher_order = teacher_order_;
  for (const auto& c : candidates)
    if (std::find(m.teacher_order.begin(), m.teacher_order.end(), c.generator_id) ==
        m.teacher_order.end())
      m.teacher_order.push_back(c.generator_id);
  for (const auto& t : m.teacher_order) m.teacher(t);
  for (const auto& c : candidates) m.add_input(c.generator_id);

  std::vector<LexicalDoc> cand_docs(candidates.size()), bench_docs(benchmark.size());
  parallel_for(candidates.size(), opts_.workers, [&](std::size_t i) {
    cand_docs[i] = {candidates[i].id, canonical_candidate(candidates[i])};
  });
  parallel_for(benchmark.size(), opts_.workers, [&](std::size_t i) {
    bench_docs[i] = {benchmark[i].id, canonical_benchmark(benchmark[i])};
  });

  auto lexical = lexical_filter(cand_docs, bench_docs, opts_);
  for (std::size_t k = 0; k < lexical.flagged.size(); ++k) {
    m.add_drop(candidates[lexical.flagged[k]].generator_id, reason::kMinHash);
    result.flags.push_back(lexical.flags[k]);
  }

  const auto& survivors = lexical.survivors;
  std::vector<VerifyOutcome> outcomes(survivors.size());
  std::vector<std::string> quarantine_bench(survivors.size());
  std::size_t pairs_verified = 0;
  if (!survivors.empty() && !benchmark.empty()) {
    if (opts_.embedder.empty()) fail(ErrorCode::kConfig, "decontam: no embedder configured");
    std::vector<Views> bench_views(benchmark.size());
    parallel_for(benchmark.size(), opts_.workers, [&](std::size_t i) {
      bench_views[i] = embed_views(bench_docs[i].doc, gw_, opts_.embedder);
    });
    std::vector<std::size_t> pair_counts(survivors.size(), 0);
    parallel_for(survivors.size(), opts_.workers, [&](std::size_t s) {
      std::size_t i = survivors[s];
      auto views = embed_views(cand_docs[i].doc, gw_, opts_.embedder);
      VerifyItem cand{candidates[i].id, candidates[i].x_train, &cand_docs[i].doc};
      std::optional<VerifyOutcome> quarantined;
      for (const auto& pair : semantic_candidates(views, bench_views, opts_)) {
        const auto j = pair.benchmark_index;
        VerifyItem bench{benchmark[j].id, benchmark[j].question, &bench_docs[j].doc};
        ++pair_counts[s];
        auto o = cross_verify(cand, bench, gw_, templates_, opts_);
        if (o.status == VerifyOutcome::Status::kFlagged) {
          outcomes[s] = std::move(o);
          return;
        }
        if (o.status == VerifyOutcome::Status::kQuarantined && !quarantined) {
          quarantined = std::move(o);
          quarantine_bench[s] = benchmark[j].id;
        }
      }
      if (quarantined) outcomes[s] = std::move(*quarantined);
    });
    for (auto n : pair_counts) pairs_verified += n;
  }

  std::uint64_t numeric = 0, entail = 0;
  for (std::size_t s = 0; s < survivors.size(); ++s) {
    const auto& c = candidates[survivors[s]];
    auto& o = outcomes[s];
    switch (o.status) {
      case VerifyOutcome::Status::kFlagged:
        m.add_drop(c.generator_id, reason::kSemantic);
        (o.flag->reason == FlagReason::kNumericEquivalence ? numeric : entail)++;
        result.flags.push_back(*o.flag);
        break;
      case VerifyOutcome::Status::kQuarantined:
        m.add_drop(c.generator_id, reason::kQuarantined);
        result.quarantined.push_back({c.id, quarantine_bench[s], o.error});
        break;
      case VerifyOutcome::Status::kClear:
        m.add_kept(c.generator_id);
        result.clean.push_back(c);
        break;
    }
  }

  m.extra = Json{{"lexical_flags", lexical.flags.size()},
                 {"semantic_numeric_flags", numeric},
                 {"semantic_entailment_flags", entail},
                 {"quarantined", result.quarantined.size()},
                 {"pairs_verified", pairs_verified},
                 {"benchmark_items", benchmark.size()},
                 {"entailment_aggregation", std::string(to_string(opts_.aggregation))}};
  return result;
}

}  // namespace dtaforge::decontam
