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

#include "dtaforge/align_phase2.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dtaforge/error.hpp"

namespace dtaforge::align {

using prompt::TemplateId;

double reward_total(const prompt::RewardScores& s, const RewardWeights& w) {
  double r = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) r += w[k] * s.scores[k];
  return r;
}

std::vector<double> z_scores(const std::vector<double>& values) {
  std::vector<double> z(values.size(), 0.0);
  if (values.size() < 2) return z;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) return z;
  const double n = static_cast<double>(values.size());
  double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / n);
  for (std::size_t i = 0; i < values.size(); ++i) z[i] = (values[i] - mean) / sd;
  return z;
}

double r_ifd(double ppl_x, double ppl_x_given_y) {
  if (!(ppl_x > 0.0) || !(ppl_x_given_y > 0.0))
    fail(ErrorCode::kRange, "r_ifd: perplexities must be positive");
  return std::log(ppl_x) - std::log(ppl_x_given_y);
}

Json StyleGuide::to_json() const {
  return Json{{"language_tone_detail_rules", language_tone_detail_rules},
              {"structure_rules", structure_rules},
              {"induced_from", induced_from},
              {"summarizer_id", summarizer_id},
              {"markdown", markdown}};
}

StyleGuide StyleGuide::from_json(const Json& j) {
  StyleGuide s;
  s.language_tone_detail_rules = j.at("language_tone_detail_rules").get<std::vector<std::string>>();
  s.structure_rules = j.at("structure_rules").get<std::vector<std::string>>();
  s.induced_from = j.value("induced_from", std::size_t{0});
  s.summarizer_id = j.value("summarizer_id", std::string());
  s.markdown = j.value("markdown", std::string());
  return s;
}

Json AlignedCandidate::to_json() const {
  Json scores = Json::object();
  for (std::size_t k = 0; k < prompt::RewardScores::kCriteria.size(); ++k)
    scores[std::string(prompt::RewardScores::kCriteria[k])] = reward_scores.scores[k];
  return Json{{"sample_id", sample_id}, {"teacher_id", teacher_id}, {"y_aligned", y_aligned},
              {"r_student", r_student}, {"reward_scores", scores},   {"r_reward", r_reward},
              {"z_student", z_student}, {"z_reward", z_reward},      {"r_total", r_total}};
}

Json AlignedSample::to_json() const {
  return Json{{"id", id},
              {"x_train", x_train},
              {"y_star", y_star},
              {"winning_teacher", winning_teacher},
              {"generator_id", generator_id},
              {"final_answer", final_answer},
              {"selection_margin", selection_margin}};
}

AlignedSample AlignedSample::from_json(const Json& j) {
  AlignedSample s;
  s.id = j.at("id").get<std::string>();
  s.x_train = j.at("x_train").get<std::string>();
  s.y_star = j.at("y_star").get<std::string>();
  s.winning_teacher = j.at("winning_teacher").get<std::string>();
  s.generator_id = j.value("generator_id", std::string());
  s.final_answer = j.value("final_answer", 0.0);
  s.selection_margin = j.value("selection_margin", 0.0);
  return s;
}

Selection fuse_and_select(std::vector<AlignedCandidate> candidates,
                          const std::vector<std::string>& priority) {
  if (candidates.empty()) fail(ErrorCode::kPrecondition, "fuse_and_select: empty candidate set");
  std::vector<double> rs, rr;
  for (const auto& c : candidates) {
    rs.push_back(c.r_student);
    rr.push_back(c.r_reward);
  }
  auto zs = z_scores(rs);
  auto zr = z_scores(rr);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].z_student = zs[i];
    candidates[i].z_reward = zr[i];
    candidates[i].r_total = zs[i] + zr[i];
  }
  auto rank = [&](const std::string& t) {
    return static_cast<std::size_t>(std::find(priority.begin(), priority.end(), t) -
                                    priority.begin());
  };
  Selection sel;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& w = candidates[sel.winner];
    // Rounding can split totals that are equal in exact arithmetic (two
    // candidates always score z = +-1), so near-equal totals count as ties.
    bool tie = std::fabs(c.r_total - w.r_total) <= kFusionTieTolerance;
    if ((!tie && c.r_total > w.r_total) || (tie && rank(c.teacher_id) < rank(w.teacher_id)))
      sel.winner = i;
  }
  if (candidates.size() > 1) {
    double runner_up = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (i != sel.winner) runner_up = std::max(runner_up, candidates[i].r_total);
    sel.margin = candidates[sel.winner].r_total - runner_up;
  }
  sel.scored = std::move(candidates);
  return sel;
}

Phase2::Phase2(gateway::Gateway& gw, const prompt::TemplateStore& templates, Phase2Options opts)
    : gw_(gw), templates_(templates), opts_(std::move(opts)) {
  if (opts_.teachers.empty()) fail(ErrorCode::kConfig, "phase2 needs at least one teacher");
  if (opts_.student.empty()) fail(ErrorCode::kConfig, "phase2 needs a student provider");
  if (opts_.summarizer.empty()) fail(ErrorCode::kConfig, "phase2 needs a style summarizer");
  if (opts_.judge.empty()) fail(ErrorCode::kConfig, "phase2 needs a reward judge");
  if (opts_.style_cap == 0) fail(ErrorCode::kConfig, "style_cap must be positive");
}

std::vector<StylePair> Phase2::collect_style_corpus(
    const std::vector<synth::TrainCandidate>& samples) const {
  std::vector<StylePair> out(samples.size());
  auto sampling = opts_.student_sampling;
  sampling.enable_thinking = false;
  parallel_for(samples.size(), opts_.workers, [&](std::size_t i) {
    auto resp = gw_.chat_complete(opts_.student, sampling.request(samples[i].x_train));
    out[i] = {samples[i].x_train, resp.text};
  });
  return out;
}

std::vector<std::size_t> Phase2::style_subsample(std::size_t n) const {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n <= opts_.style_cap) return idx;
  std::mt19937_64 rng(derive_seed(opts_.run_seed, "style-corpus"));
  // Partial Fisher-Yates: the first style_cap slots are a uniform sample.
  for (std::size_t i = 0; i < opts_.style_cap; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(opts_.style_cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

StyleGuide Phase2::induce_style(const std::vector<StylePair>& corpus) const {
  if (corpus.empty()) fail(ErrorCode::kPrecondition, "induce_style: empty style corpus");
  auto chosen = style_subsample(corpus.size());
  std::string examples;
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    const auto& p = corpus[chosen[k]];
    if (k) examples += "\n\n";
    examples += "### Example " + std::to_string(k + 1) + "\n**Question:**\n" + p.question +
                "\n\n**Answer:**\n" + p.answer;
  }
  auto text = templates_.render(TemplateId::kSummarizeStyle, {{"examples", examples}});
  auto resp = gw_.chat_complete(opts_.summarizer, opts_.summarize_sampling.request(std::move(text)));
  auto rules = prompt::parse_style_guide(resp.text);
  StyleGuide g;
  g.language_tone_detail_rules = std::move(rules.language_tone_detail);
  g.structure_rules = std::move(rules.structure);
  g.induced_from = chosen.size();
  g.summarizer_id = opts_.summarizer;
  g.markdown = resp.text;
  return g;
}

RewriteResult Phase2::rewrite_trajectory(const synth::TrainCandidate& sample,
                                         const StyleGuide& style,
                                         const std::string& teacher) const {
  auto text = templates_.render(
      TemplateId::kAlign, {{"style_language_rules", prompt::format_rules(style.language_tone_detail_rules)},
                           {"style_structure_rules", prompt::format_rules(style.structure_rules)},
                           {"question", sample.x_train},
                           {"answer", sample.y_train}});
  auto resp = gw_.chat_complete(teacher, opts_.align_sampling.request(std::move(text)));
  RewriteResult r;
  auto answer = prompt::extract_final_answer(resp.text);
  if (!answer) {
    r.drop_reason = reason::kNoFinalAnswer;
  } else if (!within_rel_tol(*answer, sample.final_answer, opts_.answer_rel_tol)) {
    r.drop_reason = reason::kAnswerDrift;
  } else {
    r.text = std::move(resp.text);
  }
  return r;
}

std::string Phase2::reflection_context(const std::string& y_aligned) const {
  auto ctx = templates_.render(TemplateId::kReflectWrapper, {{"response", y_aligned}});
  if (ctx.empty() || ctx.back() != '\n') ctx.push_back('\n');
  return ctx;
}

double Phase2::score_student_reflection(const std::string& x_train,
                                        const std::string& y_aligned) const {
  return score_student_reflection(x_train, y_aligned,
                                  gw_.perplexity(opts_.student, "", x_train).perplexity);
}

double Phase2::score_student_reflection(const std::string& x_train, const std::string& y_aligned,
                                        double ppl_x) const {
  auto cond = gw_.perplexity(opts_.student, reflection_context(y_aligned), x_train);
  return r_ifd(ppl_x, cond.perplexity);
}

std::pair<prompt::RewardScores, double> Phase2::score_reward(const std::string& x_train,
                                                             const std::string& y_aligned) const {
  auto text = templates_.render(TemplateId::kReward, {{"question", x_train}, {"answer", y_aligned}});
  auto req = opts_.judge_sampling.request(text);
  auto resp = gw_.chat_complete(opts_.judge, req);
  auto recoverable = [](ErrorCode c) {
    return c == ErrorCode::kParse || c == ErrorCode::kRange || c == ErrorCode::kMissingKey;
  };
  try {
    auto s = prompt::parse_reward_json(resp.text);
    return {s, reward_total(s, opts_.reward_weights)};
  } catch (const Error& e) {
    if (!recoverable(e.code())) throw;
  }
  req.messages.push_back({"assistant", resp.text});
  req.messages.push_back({"user", templates_.render(TemplateId::kJsonReminder, {})});
  auto retry = gw_.chat_complete(opts_.judge, req);
  try {
    auto s = prompt::parse_reward_json(retry.text);
    return {s, reward_total(s, opts_.reward_weights)};
  } catch (const Error& e) {
    if (!recoverable(e.code())) throw;
    fail(ErrorCode::kParse, std::string("reward judge reply unparseable after re-ask: ") + e.what());
  }
}

Phase2Result Phase2::run(const std::vector<synth::TrainCandidate>& samples,
                         std::optional<StyleGuide> style) const {
  Phase2Result result;
  auto& m = result.manifest;
  m.stage = "phase2";
  m.teacher_order = opts_.teachers;
  for (const auto& t : opts_.teachers) m.teacher(t);
  for (const auto& s : samples) m.add_input(s.generator_id);

  if (style) {
    result.style = std::move(*style);
  } else if (!samples.empty()) {
    // Only the subsample reaches the summarizer, so only it is asked of the
    // student.
    std::vector<synth::TrainCandidate> picked;
    for (auto i : style_subsample(samples.size())) picked.push_back(samples[i]);
    result.style = induce_style(collect_style_corpus(picked));
  }

  struct PerSample {
    std::optional<Selection> selection;
    std::map<std::string, std::map<std::string, std::uint64_t>> drops;  // teacher -> reason -> n
  };
  std::vector<PerSample> work(samples.size());
  parallel_for(samples.size(), opts_.workers, [&](std::size_t i) {
    const auto& sample = samples[i];
    auto& w = work[i];
    std::vector<AlignedCandidate> cands;
    std::optional<double> ppl_x;
    for (const auto& teacher : opts_.teachers) {
      auto rw = rewrite_trajectory(sample, result.style, teacher);
      if (!rw.text) {
        ++w.drops[teacher][rw.drop_reason];
        continue;
      }
      AlignedCandidate c;
      c.sample_id = sample.id;
      c.teacher_id = teacher;
      c.y_aligned = std::move(*rw.text);
      try {
        std::tie(c.reward_scores, c.r_reward) = score_reward(sample.x_train, c.y_aligned);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kParse) throw;
        ++w.drops[teacher][reason::kUnparseable];
        continue;
      }
      if (!ppl_x) ppl_x = gw_.perplexity(opts_.student, "", sample.x_train).perplexity;
      c.r_student = score_student_reflection(sample.x_train, c.y_aligned, *ppl_x);
      cands.push_back(std::move(c));
    }
    if (!cands.empty()) w.selection = fuse_and_select(std::move(cands), opts_.teachers);
  });

  Json candidate_drops = Json::object();
  std::map<std::string, std::uint64_t> wins;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& sample = samples[i];
    auto& w = work[i];
    for (const auto& [teacher, reasons] : w.drops)
      for (const auto& [why, n] : reasons) {
        auto& slot = candidate_drops[teacher][why];
        slot = slot.is_null() ? n : slot.get<std::uint64_t>() + n;
      }
    if (!w.selection) {
      m.add_drop(sample.generator_id, reason::kNoCandidate);
      continue;
    }
    const auto& sel = *w.selection;
    const auto& win = sel.scored[sel.winner];
    for (std::size_t k = 0; k < sel.scored.size(); ++k) {
      Json row = sel.scored[k].to_json();
      row["selected"] = k == sel.winner;
      result.sidecar.push_back(std::move(row));
    }
    AlignedSample out;
    out.id = sample.id;
    out.x_train = sample.x_train;
    out.y_star = win.y_aligned;
    out.winning_teacher = win.teacher_id;
    out.generator_id = sample.generator_id;
    out.final_answer = sample.final_answer;
    out.selection_margin = sel.margin;
    ++wins[win.teacher_id];
    m.add_kept(sample.generator_id);
    result.samples.push_back(std::move(out));
  }
  m.extra = Json{{"candidate_drops", candidate_drops},
                 {"wins_by_teacher", wins},
                 {"scored_candidates", result.sidecar.size()},
                 {"style_induced_from", result.style.induced_from}};
  return result;
}

}  // namespace dtaforge::align
