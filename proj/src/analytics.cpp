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

#include "dtaforge/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>
#include <boost/tokenizer.hpp>

#include "dtaforge/error.hpp"

namespace dtaforge::analytics {

// ---- accuracy --------------------------------------------------------------

EvalQuestion EvalQuestion::from_json(const Json& j, std::size_t line_index) {
  EvalQuestion q;
  q.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                          : "eval-" + std::to_string(line_index);
  q.question = j.at("question").get<std::string>();
  const auto& g = j.at("gold_answer");
  if (g.is_number()) {
    q.gold_answer = g.get<double>();
  } else if (g.is_string()) {
    try {
      q.gold_answer = prompt::parse_single_number(g.get<std::string>());
    } catch (const Error&) {
      fail(ErrorCode::kParse, "eval item '" + q.id + "': gold answer '" + g.get<std::string>() +
                                  "' is not numeric");
    }
  } else {
    fail(ErrorCode::kParse, "eval item '" + q.id + "': gold answer is not numeric");
  }
  return q;
}

bool grade(std::string_view answer_text, double gold) {
  auto v = prompt::extract_final_answer(answer_text);
  return v && within_rel_tol(*v, gold, kGradeRelTol);
}

double pass_at_1(const std::vector<EvalItem>& items) {
  if (items.empty()) fail(ErrorCode::kPrecondition, "pass_at_1: no items");
  std::size_t correct = 0;
  for (const auto& it : items) {
    if (it.model_answers.size() != 1)
      fail(ErrorCode::kPrecondition, "pass_at_1: item '" + it.id + "' must carry one answer");
    correct += grade(it.model_answers[0], it.gold_answer);
  }
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

Vote majority_vote(const std::vector<std::string>& answers, double rel_tol) {
  std::vector<double> nums;
  std::size_t unparseable = 0;
  for (const auto& a : answers) {
    if (auto v = prompt::extract_final_answer(a))
      nums.push_back(*v);
    else
      ++unparseable;
  }
  std::sort(nums.begin(), nums.end());
  Vote best;
  for (std::size_t i = 0; i < nums.size();) {
    double anchor = nums[i];
    std::size_t j = i;
    while (j < nums.size() && within_rel_tol(nums[j], anchor, rel_tol)) ++j;
    // Ascending order: a later cluster needs strictly more votes to win.
    if (j - i > best.votes) best = {anchor, j - i};
    i = j;
  }
  if (unparseable > best.votes) best = {std::nullopt, unparseable};
  return best;
}

double cons_at_k(const std::vector<EvalItem>& items, std::size_t samples) {
  if (items.empty()) fail(ErrorCode::kPrecondition, "cons_at_k: no items");
  std::size_t correct = 0;
  for (const auto& it : items) {
    if (it.model_answers.size() != samples)
      fail(ErrorCode::kPrecondition, "cons_at_k: item '" + it.id + "' has " +
                                         std::to_string(it.model_answers.size()) + " answers, expected " +
                                         std::to_string(samples));
    auto v = majority_vote(it.model_answers);
    correct += v.representative && within_rel_tol(*v.representative, it.gold_answer, kGradeRelTol);
  }
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

DecodeProtocol pass1_protocol(bool thinking) {
  return {"pass@1", gateway::Sampling{0.0, 0.01, std::nullopt, 32768, thinking}, 1};
}

DecodeProtocol cons16_protocol(bool thinking) {
  return {"cons@16", gateway::Sampling{0.6, 0.95, 20, 32768, thinking}, 16};
}

std::vector<EvalItem> collect_answers(const std::vector<EvalQuestion>& questions,
                                      gateway::Gateway& gw, const std::string& model,
                                      const DecodeProtocol& protocol, std::uint64_t run_seed,
                                      int workers) {
  if (protocol.samples == 0) fail(ErrorCode::kPrecondition, "collect_answers: zero samples");
  std::vector<EvalItem> items(questions.size());
  const std::size_t k = protocol.samples;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    items[i].id = questions[i].id;
    items[i].gold_answer = questions[i].gold_answer;
    // Preallocated so concurrent writers never resize.
    items[i].model_answers.resize(k);
  }
  parallel_for(questions.size() * k, workers, [&](std::size_t n) {
    const auto& q = questions[n / k];
    auto seed = static_cast<std::int64_t>(
        derive_seed(run_seed, "eval|" + protocol.name + "|" + q.id + "|" + std::to_string(n % k)) &
        0x7fffffffffffffffULL);
    auto resp = gw.chat_complete(model, protocol.sampling.request(q.question, seed));
    items[n / k].model_answers[n % k] = std::move(resp.text);
  });
  return items;
}

// ---- efficiency ------------------------------------------------------------

void EfficiencyInput::validate() const {
  if (!(energy_per_token > 0.0) || !(latency > 0.0) || !(throughput > 0.0))
    fail(ErrorCode::kPrecondition, "efficiency row '" + model + "': inputs must be positive");
  if (pass1 && !(*pass1 >= 0.0 && *pass1 <= 1.0))
    fail(ErrorCode::kPrecondition, "efficiency row '" + model + "': pass1 outside [0, 1]");
}

Json DerivedMetrics::to_json() const {
  return Json{{"tokens_per_sample", tokens_per_sample},
              {"energy_per_sample_j", energy_per_sample},
              {"edp_j_s_per_token", edp},
              {"time_per_correct_s", time_per_correct},
              {"energy_per_correct_j", energy_per_correct}};
}

DerivedMetrics derived_metrics(const EfficiencyInput& e) {
  e.validate();
  if (!e.pass1 || *e.pass1 == 0.0)
    fail(ErrorCode::kRange, "derived_metrics: pass1 must be positive for '" + e.model + "'");
  DerivedMetrics d;
  d.tokens_per_sample = e.throughput * e.latency;
  d.energy_per_sample = e.energy_per_token * d.tokens_per_sample;
  d.edp = e.energy_per_token * e.latency;
  d.time_per_correct = e.latency / *e.pass1;
  d.energy_per_correct = d.energy_per_sample / *e.pass1;
  return d;
}

namespace {

bool parse_bool(std::string s, const std::string& where) {
  s = to_lower(trim(s));
  if (s == "yes" || s == "true" || s == "1" || s == "on") return true;
  if (s == "no" || s == "false" || s == "0" || s == "off") return false;
  fail(ErrorCode::kParse, where + ": thinking must be yes/no, got '" + s + "'");
}

double parse_field(const std::string& s, const std::string& where) {
  auto v = parse_double(s);
  if (!v) fail(ErrorCode::kParse, where + ": '" + s + "' is not a number");
  return *v;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c)
      width[c] = std::max(width[c], r[c].size());
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < width.size(); ++c) {
      std::string cell = c < cells.size() ? cells[c] : "";
      if (c) out += "  ";
      // First column left-aligned, numbers right-aligned.
      if (c == 0)
        out += cell + std::string(width[c] - cell.size(), ' ');
      else
        out += std::string(width[c] - cell.size(), ' ') + cell;
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

}  // namespace

std::vector<EfficiencyInput> parse_efficiency_csv(std::string_view csv) {
  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  auto lines = split_lines(csv);
  std::vector<std::string> header;
  std::vector<EfficiencyInput> out;
  std::map<std::string, std::size_t> col;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    std::string line(trim(lines[ln]));
    if (line.empty() || line[0] == '#') continue;
    Tokenizer tok(line);
    std::vector<std::string> cells;
    for (const auto& t : tok) cells.emplace_back(trim(t));
    if (header.empty()) {
      header = cells;
      for (std::size_t c = 0; c < header.size(); ++c) col[to_lower(header[c])] = c;
      for (const char* need :
           {"model", "thinking", "energy_j_per_token", "latency_s", "throughput_tok_s"})
        if (!col.count(need))
          fail(ErrorCode::kParse, std::string("efficiency csv: missing column '") + need + "'");
      continue;
    }
    const std::string where = "efficiency csv line " + std::to_string(ln + 1);
    if (cells.size() != header.size())
      fail(ErrorCode::kParse, where + ": expected " + std::to_string(header.size()) +
                                  " fields, got " + std::to_string(cells.size()));
    EfficiencyInput e;
    e.model = cells[col["model"]];
    e.thinking = parse_bool(cells[col["thinking"]], where);
    e.energy_per_token = parse_field(cells[col["energy_j_per_token"]], where);
    e.latency = parse_field(cells[col["latency_s"]], where);
    e.throughput = parse_field(cells[col["throughput_tok_s"]], where);
    if (col.count("pass1") && !cells[col["pass1"]].empty())
      e.pass1 = parse_field(cells[col["pass1"]], where);
    e.validate();
    out.push_back(std::move(e));
  }
  if (header.empty()) fail(ErrorCode::kParse, "efficiency csv: no header");
  return out;
}

std::string efficiency_table(const std::vector<EfficiencyInput>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& e : rows)
    cells.push_back({e.model, e.thinking ? "Yes" : "No", fixed(e.energy_per_token, 2),
                     fixed(e.latency, 2), fixed(e.throughput, 2)});
  return render_table({"Model", "Thinking", "Energy (J/token)", "Latency (s)", "Throughput (tok/s)"},
                      cells);
}

std::string derived_table(const std::vector<EfficiencyInput>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& e : rows) {
    std::vector<std::string> r = {e.model, e.thinking ? "Yes" : "No"};
    if (e.pass1 && *e.pass1 > 0.0) {
      auto d = derived_metrics(e);
      for (auto s : {fixed(d.tokens_per_sample, 1), fixed(d.edp, 3), fixed(d.energy_per_sample, 1),
                     fixed(d.time_per_correct, 2), fixed(d.energy_per_correct, 1)})
        r.push_back(s);
    } else {
      r.push_back(fixed(e.throughput * e.latency, 1));
      r.push_back(fixed(e.energy_per_token * e.latency, 3));
      r.push_back(fixed(e.energy_per_token * e.throughput * e.latency, 1));
      r.push_back("n/a");
      r.push_back("n/a");
    }
    cells.push_back(std::move(r));
  }
  return render_table({"Model", "Thinking", "Tokens/sample", "EDP (J*s/token)", "Energy/sample (J)",
                       "Time/correct (s)", "Energy/correct (J)"},
                      cells);
}

// ---- token shift -----------------------------------------------------------

std::string_view to_string(TokenCategory c) {
  switch (c) {
    case TokenCategory::kLogicalStructural: return "logical_structural";
    case TokenCategory::kDomainSpecific: return "domain_specific";
    case TokenCategory::kContent: return "content";
  }
  return "content";
}

TokenCategory Lexicons::categorize(const std::string& token) const {
  if (logical_structural.count(token)) return TokenCategory::kLogicalStructural;
  if (domain_specific.count(token)) return TokenCategory::kDomainSpecific;
  return TokenCategory::kContent;
}

namespace {

std::set<std::string> read_lexicon(const std::filesystem::path& path) {
  std::set<std::string> out;
  for (const auto& raw : split_lines(read_file(path))) {
    auto line = raw.substr(0, raw.find('#'));
    auto t = to_lower(trim(line));
    if (!t.empty()) out.insert(t);
  }
  return out;
}

}  // namespace

Lexicons Lexicons::load(const std::filesystem::path& dir) {
  Lexicons l;
  l.logical_structural = read_lexicon(dir / "logical_structural.txt");
  l.domain_specific = read_lexicon(dir / "domain_specific.txt");
  return l;
}

Lexicons Lexicons::load_default() {
  if (const char* env = std::getenv("DTAFORGE_RESOURCES"); env && *env)
    return load(std::filesystem::path(env) / "lexicons");
  return load(std::filesystem::path(DTAFORGE_RESOURCE_DIR) / "lexicons");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '_' || c == '\'' || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Json TokenShiftRow::to_json() const {
  return Json{{"token", token},
              {"baseline_freq", baseline_freq},
              {"target_freq", target_freq},
              {"baseline_count", baseline_count},
              {"target_count", target_count},
              {"baseline_rank", baseline_rank},
              {"target_rank", target_rank},
              {"rank_delta", rank_delta},
              {"shift", shift},
              {"category", std::string(to_string(category))}};
}

namespace {

struct Counts {
  std::unordered_map<std::string, std::size_t> freq;
  std::size_t total = 0;
  std::unordered_map<std::string, std::size_t> rank;

  explicit Counts(const std::vector<std::string>& corpus) {
    for (const auto& doc : corpus)
      for (auto& t : tokenize(doc)) {
        ++freq[t];
        ++total;
      }
    std::vector<std::pair<std::string, std::size_t>> order(freq.begin(), freq.end());
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    for (std::size_t i = 0; i < order.size(); ++i) rank[order[i].first] = i + 1;
  }

  std::size_t count(const std::string& t) const {
    auto it = freq.find(t);
    return it == freq.end() ? 0 : it->second;
  }
  std::size_t rank_of(const std::string& t) const {
    auto it = rank.find(t);
    return it == rank.end() ? freq.size() + 1 : it->second;
  }
};

}  // namespace

std::vector<TokenShiftRow> token_shift(const std::vector<std::string>& baseline_corpus,
                                       const std::vector<std::string>& target_corpus,
                                       const Lexicons& lexicons) {
  Counts base(baseline_corpus), target(target_corpus);
  if (base.total == 0 || target.total == 0)
    fail(ErrorCode::kPrecondition, "token_shift: empty corpus");
  const double nb = static_cast<double>(base.total), nt = static_cast<double>(target.total);
  const double alpha = 1.0 / (nb + nt);

  std::set<std::string> vocab;
  for (const auto& [t, _] : base.freq) vocab.insert(t);
  for (const auto& [t, _] : target.freq) vocab.insert(t);

  std::vector<TokenShiftRow> rows;
  rows.reserve(vocab.size());
  for (const auto& t : vocab) {
    TokenShiftRow r;
    r.token = t;
    r.baseline_count = base.count(t);
    r.target_count = target.count(t);
    r.baseline_freq = static_cast<double>(r.baseline_count) / nb;
    r.target_freq = static_cast<double>(r.target_count) / nt;
    r.baseline_rank = base.rank_of(t);
    r.target_rank = target.rank_of(t);
    r.rank_delta = static_cast<long long>(r.baseline_rank) - static_cast<long long>(r.target_rank);
    r.shift = std::log((r.target_freq + alpha) / (r.baseline_freq + alpha));
    r.category = lexicons.categorize(t);
    rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const TokenShiftRow& a, const TokenShiftRow& b) {
    double x = std::abs(a.shift), y = std::abs(b.shift);
    return x != y ? x > y : a.token < b.token;
  });
  return rows;
}

std::string token_shift_table(const std::vector<TokenShiftRow>& rows, std::size_t limit) {
  std::vector<std::vector<std::string>> cells;
  for (std::size_t i = 0; i < rows.size() && i < limit; ++i) {
    const auto& r = rows[i];
    cells.push_back({r.token, std::string(to_string(r.category)), fixed(r.baseline_freq * 1000, 3),
                     fixed(r.target_freq * 1000, 3), std::to_string(r.baseline_rank),
                     std::to_string(r.target_rank), fixed(r.shift, 3)});
  }
  return render_table({"Token", "Category", "Base/1k", "Target/1k", "Base rank", "Target rank", "Shift"},
                      cells);
}

// ---- confidence intervals --------------------------------------------------

MeanCi mean_ci(const std::vector<double>& values) {
  if (values.size() < 3) fail(ErrorCode::kPrecondition, "mean_ci: need at least 3 values");
  const double n = static_cast<double>(values.size());
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  double s = std::sqrt(ss / (n - 1.0));
  boost::math::students_t dist(n - 1.0);
  double t = boost::math::quantile(dist, 0.975);
  double half = t * s / std::sqrt(n);
  return {mean, mean - half, mean + half};
}

// ---- pairwise judging ------------------------------------------------------

prompt::PairwiseScores debias(const prompt::PairwiseScores& original,
                              const prompt::PairwiseScores& swapped) {
  prompt::PairwiseScores out;
  out.score_a = 0.5 * (original.score_a + swapped.score_b);
  out.score_b = 0.5 * (original.score_b + swapped.score_a);
  out.summary = original.summary;
  return out;
}

Json PairwiseResult::to_json() const {
  return Json{{"score_a", score_a},
              {"score_b", score_b},
              {"original", {{"a", original.score_a}, {"b", original.score_b}}},
              {"swapped", {{"a", swapped.score_a}, {"b", swapped.score_b}}}};
}

namespace {

prompt::PairwiseScores judge_once(const std::string& question, const std::string& a,
                                  const std::string& b, gateway::Gateway& gw,
                                  const std::string& judge, const prompt::TemplateStore& templates,
                                  const gateway::Sampling& sampling) {
  auto text = templates.render(prompt::TemplateId::kPairwise,
                               {{"question", question}, {"answer_a", a}, {"answer_b", b}});
  auto req = sampling.request(text);
  auto resp = gw.chat_complete(judge, req);
  try {
    return prompt::parse_pairwise_json(resp.text);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kParse && e.code() != ErrorCode::kRange &&
        e.code() != ErrorCode::kMissingKey)
      throw;
  }
  req.messages.push_back({"assistant", resp.text});
  req.messages.push_back({"user", templates.render(prompt::TemplateId::kJsonReminder, {})});
  auto retry = gw.chat_complete(judge, req);
  try {
    return prompt::parse_pairwise_json(retry.text);
  } catch (const Error& e) {
    fail(ErrorCode::kParse, std::string("pairwise judge reply unparseable after re-ask: ") + e.what());
  }
}

}  // namespace

PairwiseResult pairwise_judge(const std::string& question, const std::string& answer_a,
                              const std::string& answer_b, gateway::Gateway& gw,
                              const std::string& judge, const prompt::TemplateStore& templates,
                              const gateway::Sampling& sampling) {
  PairwiseResult r;
  r.original = judge_once(question, answer_a, answer_b, gw, judge, templates, sampling);
  r.swapped = judge_once(question, answer_b, answer_a, gw, judge, templates, sampling);
  auto d = debias(r.original, r.swapped);
  r.score_a = d.score_a;
  r.score_b = d.score_b;
  return r;
}

Json PairwiseSummary::to_json() const {
  return Json{{"n", n},           {"mean_a", mean_a}, {"mean_b", mean_b},
              {"wins_a", wins_a}, {"wins_b", wins_b}, {"ties", ties}};
}

PairwiseSummary summarize_pairwise(const std::vector<PairwiseResult>& results) {
  PairwiseSummary s;
  s.n = results.size();
  for (const auto& r : results) {
    s.mean_a += r.score_a;
    s.mean_b += r.score_b;
    if (r.score_a > r.score_b)
      ++s.wins_a;
    else if (r.score_b > r.score_a)
      ++s.wins_b;
    else
      ++s.ties;
  }
  if (s.n) {
    s.mean_a /= static_cast<double>(s.n);
    s.mean_b /= static_cast<double>(s.n);
  }
  return s;
}

}  // namespace dtaforge::analytics
