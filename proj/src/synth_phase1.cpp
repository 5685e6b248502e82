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

#include "dtaforge/synth_phase1.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "dtaforge/error.hpp"

namespace dtaforge::synth {

using prompt::TemplateId;

void SeedSample::validate() const {
  if (trim(x_seed).empty()) fail(ErrorCode::kPrecondition, "seed '" + id + "': empty question");
  if (trim(y_seed).empty()) fail(ErrorCode::kPrecondition, "seed '" + id + "': empty solution");
}

Json SeedSample::to_json() const {
  return Json{{"id", id},
              {"x_seed", x_seed},
              {"y_seed", y_seed},
              {"domain", domain},
              {"is_detailed", is_detailed}};
}

SeedSample SeedSample::from_json(const Json& j, std::size_t line_index) {
  SeedSample s;
  s.id = j.value("id", "seed-" + std::to_string(line_index));
  s.x_seed = j.at("x_seed").get<std::string>();
  s.y_seed = j.at("y_seed").get<std::string>();
  s.domain = j.value("domain", std::string());
  s.is_detailed = j.value("is_detailed", false);
  s.validate();
  return s;
}

Json KnowledgeSummary::to_json() const {
  Json points = Json::array();
  for (const auto& p : knowledge_points)
    points.push_back({{"description", p.description}, {"relevance", p.relevance}});
  return Json{{"knowledge_points", points},
              {"skills",
               {{"strategy", skills.strategy},
                {"decomposition", skills.decomposition},
                {"formula_applications", skills.formula_applications}}},
              {"source_teachers", source_teachers},
              {"merged_by", merged_by}};
}

std::string TrainCandidate::make_id(const std::string& generator_id, const std::string& x_train,
                                    const std::string& y_train) {
  std::string key = generator_id;
  key += '\x1f';
  key += x_train;
  key += '\x1f';
  key += y_train;
  return sha256_hex(key).substr(0, 20);
}

Json TrainCandidate::to_json() const {
  return Json{{"id", id},
              {"x_train", x_train},
              {"y_train", y_train},
              {"final_answer", final_answer},
              {"generator_id", generator_id},
              {"provenance", provenance}};
}

TrainCandidate TrainCandidate::from_json(const Json& j) {
  TrainCandidate c;
  c.x_train = j.at("x_train").get<std::string>();
  c.y_train = j.at("y_train").get<std::string>();
  c.final_answer = j.at("final_answer").get<double>();
  c.generator_id = j.at("generator_id").get<std::string>();
  c.provenance = j.value("provenance", std::string());
  c.id = j.value("id", make_id(c.generator_id, c.x_train, c.y_train));
  if (!std::isfinite(c.final_answer))
    fail(ErrorCode::kPrecondition, "candidate '" + c.id + "' has a non-finite final answer");
  return c;
}

Json ReviewRecord::to_json() const {
  return Json{{"candidate_id", candidate_id},
              {"reviewer_scores", reviewer_scores},
              {"consensus", consensus},
              {"kept", kept},
              {"drop_reason", drop_reason}};
}

ReviewRecord ReviewRecord::from_json(const Json& j) {
  ReviewRecord r;
  r.candidate_id = j.at("candidate_id").get<std::string>();
  r.reviewer_scores = j.value("reviewer_scores", std::map<std::string, double>{});
  r.consensus = j.value("consensus", 0.0);
  r.kept = j.value("kept", false);
  r.drop_reason = j.value("drop_reason", std::string());
  return r;
}

ReviewRecord make_review_record(std::string candidate_id, std::map<std::string, double> scores,
                                double tau) {
  ReviewRecord r;
  r.candidate_id = std::move(candidate_id);
  r.reviewer_scores = std::move(scores);
  if (r.reviewer_scores.empty()) {
    r.consensus = 0.0;
    r.kept = false;
    r.drop_reason = reason::kReviewUnavailable;
    return r;
  }
  double sum = 0.0;
  for (const auto& [_, s] : r.reviewer_scores) sum += s;
  r.consensus = sum / static_cast<double>(r.reviewer_scores.size());
  r.kept = r.consensus >= tau;
  if (!r.kept) r.drop_reason = reason::kPeerReview;
  return r;
}

FilterResult filter_reviewed(const std::vector<TrainCandidate>& candidates,
                             const std::vector<ReviewRecord>& records, StageManifest& manifest) {
  if (candidates.size() != records.size())
    fail(ErrorCode::kPrecondition, "filter_reviewed: " + std::to_string(candidates.size()) +
                                       " candidates but " + std::to_string(records.size()) +
                                       " review records");
  FilterResult out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const auto& r = records[i];
    if (c.id != r.candidate_id)
      fail(ErrorCode::kPrecondition, "filter_reviewed: record " + std::to_string(i) + " is for '" +
                                         r.candidate_id + "', candidate is '" + c.id + "'");
    manifest.add_input(c.generator_id);
    if (r.kept) {
      manifest.add_kept(c.generator_id);
      out.kept.push_back(c);
    } else {
      manifest.add_drop(c.generator_id,
                        r.drop_reason.empty() ? std::string(reason::kPeerReview) : r.drop_reason);
      out.dropped.push_back(c);
    }
  }
  return out;
}

std::string normalize_description(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  while (!out.empty() && (out.back() == '.' || out.back() == ' ')) out.pop_back();
  return out;
}

Phase1::Phase1(gateway::Gateway& gw, const prompt::TemplateStore& templates, Phase1Options opts)
    : gw_(gw), templates_(templates), opts_(std::move(opts)) {
  if (opts_.teachers.empty()) fail(ErrorCode::kConfig, "phase1 needs at least one teacher");
  if (opts_.integrator.empty()) opts_.integrator = opts_.teachers.front();
}

std::string Phase1::domain_of(const SeedSample& seed) const {
  return seed.domain.empty() ? opts_.default_domain : seed.domain;
}

std::string Phase1::ensure_detailed(const SeedSample& seed, const std::string& teacher) const {
  seed.validate();
  if (seed.is_detailed) return seed.y_seed;
  auto prompt = templates_.render(
      TemplateId::kDetail,
      {{"domain", domain_of(seed)}, {"question", seed.x_seed}, {"answer", seed.y_seed}});
  auto resp = gw_.chat_complete(teacher, opts_.detail_sampling.request(std::move(prompt)));
  if (trim(resp.text).empty())
    fail(ErrorCode::kProvider, "teacher '" + teacher + "' returned an empty detailed solution");
  return resp.text;
}

prompt::KnowledgeList Phase1::extract_knowledge(const SeedSample& seed,
                                                const std::string& detailed,
                                                const std::string& teacher) const {
  if (trim(detailed).empty()) fail(ErrorCode::kPrecondition, "extract_knowledge: empty solution");
  auto prompt = templates_.render(
      TemplateId::kExtract,
      {{"domain", domain_of(seed)}, {"question", seed.x_seed}, {"answer", detailed}});
  auto resp = gw_.chat_complete(teacher, opts_.extract_sampling.request(std::move(prompt)));
  return prompt::parse_knowledge(resp.text);
}

KnowledgeSummary Phase1::summarize_knowledge(
    const SeedSample& seed,
    const std::vector<std::pair<std::string, prompt::KnowledgeList>>& per_teacher,
    const std::string& integrator) const {
  if (per_teacher.empty())
    fail(ErrorCode::kPrecondition, "summarize_knowledge: no per-teacher lists");
  std::string lists;
  for (std::size_t i = 0; i < per_teacher.size(); ++i) {
    if (i) lists += "\n\n";
    lists += "### Analyst " + std::to_string(i + 1) + "\n";
    lists += prompt::format_knowledge(per_teacher[i].second);
  }
  auto prompt = templates_.render(
      TemplateId::kMergeKnowledge,
      {{"domain", domain_of(seed)}, {"question", seed.x_seed}, {"knowledge_lists", lists}});
  auto resp = gw_.chat_complete(integrator, opts_.merge_sampling.request(std::move(prompt)));
  auto merged = prompt::parse_knowledge(resp.text);

  KnowledgeSummary out;
  std::set<std::string> seen;
  for (auto& p : merged.points) {
    if (seen.insert(normalize_description(p.description)).second)
      out.knowledge_points.push_back(std::move(p));
  }
  out.skills = std::move(merged.skills);
  for (const auto& [teacher, _] : per_teacher) out.source_teachers.push_back(teacher);
  out.merged_by = integrator;
  return out;
}

GenerationResult Phase1::generate_problems(const KnowledgeSummary& k, const SeedSample& seed,
                                           const std::string& teacher, int n) const {
  if (n < 1) fail(ErrorCode::kPrecondition, "generate_problems: n must be >= 1");
  std::string points;
  for (const auto& p : k.knowledge_points) {
    if (!points.empty()) points += '\n';
    points += "- " + p.description;
    if (!p.relevance.empty()) points += ". Relevance: " + p.relevance;
  }
  std::string skills = "- Strategy: " + k.skills.strategy + "\n- Decomposing: " +
                       k.skills.decomposition +
                       "\n- Formula Application & Mathematical Tools: " +
                       k.skills.formula_applications;
  auto prompt = templates_.render(
      TemplateId::kGenerate,
      {{"domain", domain_of(seed)}, {"knowledge_points", points}, {"skills", skills}});

  GenerationResult out;
  for (int i = 0; i < n; ++i) {
    ++out.attempts;
    // Distinct per-call seeds keep replayed generations distinct.
    auto call_seed = static_cast<std::int64_t>(
        derive_seed(opts_.run_seed, "generate|" + teacher + "|" + seed.id + "|" +
                                        std::to_string(i)) &
        0x7fffffffffffffffULL);
    auto resp = gw_.chat_complete(teacher, opts_.generate_sampling.request(prompt, call_seed));
    try {
      auto g = prompt::parse_generated_problem(resp.text);
      TrainCandidate c;
      c.x_train = g.statement;
      c.y_train = g.solution_steps + "\n\nFinal Answer: " + format_double(g.final_answer);
      c.final_answer = g.final_answer;
      c.generator_id = teacher;
      c.provenance = seed.id;
      c.id = TrainCandidate::make_id(teacher, c.x_train, c.y_train);
      out.candidates.push_back(std::move(c));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kParse && e.code() != ErrorCode::kMissingKey &&
          e.code() != ErrorCode::kRange)
        throw;
      ++out.unparseable;
    }
  }
  if (out.candidates.empty())
    fail(ErrorCode::kParse, "teacher '" + teacher + "': all " + std::to_string(n) +
                                " generations for seed '" + seed.id + "' were unparseable");
  return out;
}

std::vector<std::string> Phase1::reviewers_for(const std::string& generator) const {
  std::vector<std::string> out;
  for (const auto& t : opts_.teachers)
    if (t != generator) out.push_back(t);
  return out;
}

ReviewRecord Phase1::peer_review(const TrainCandidate& c,
                                 const std::vector<std::string>& reviewers) const {
  if (reviewers.empty())
    fail(ErrorCode::kPrecondition, "peer_review: empty reviewer committee for '" + c.id + "'");
  if (std::find(reviewers.begin(), reviewers.end(), c.generator_id) != reviewers.end())
    fail(ErrorCode::kPrecondition, "peer_review: generator '" + c.generator_id +
                                       "' cannot review its own candidate");
  auto prompt = templates_.render(TemplateId::kPeerReview,
                                  {{"question", c.x_train}, {"answer", c.y_train}});
  std::map<std::string, double> scores;
  for (const auto& reviewer : reviewers) {
    auto resp = gw_.chat_complete(reviewer, opts_.review_sampling.request(prompt));
    try {
      scores[reviewer] = prompt::parse_boxed_score(resp.text);
    } catch (const Error& e) {
      // An unreadable verdict is excluded from the mean, not scored as 0.
      if (e.code() != ErrorCode::kParse && e.code() != ErrorCode::kRange) throw;
    }
  }
  return make_review_record(c.id, std::move(scores), opts_.tau);
}

Phase1Result Phase1::run(const std::vector<SeedSample>& seeds) const {
  struct PerSeed {
    KnowledgeSummary summary;
    std::vector<GenerationResult> generations;  // teacher order
  };
  std::vector<PerSeed> per_seed(seeds.size());

  parallel_for(seeds.size(), opts_.workers, [&](std::size_t s) {
    const auto& seed = seeds[s];
    std::vector<std::pair<std::string, prompt::KnowledgeList>> lists;
    for (const auto& teacher : opts_.teachers) {
      auto detailed = ensure_detailed(seed, teacher);
      lists.emplace_back(teacher, extract_knowledge(seed, detailed, teacher));
    }
    auto& out = per_seed[s];
    out.summary = summarize_knowledge(seed, lists, opts_.integrator);
    for (const auto& teacher : opts_.teachers) {
      try {
        out.generations.push_back(
            generate_problems(out.summary, seed, teacher, opts_.problems_per_seed));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kParse) throw;
        GenerationResult failed;
        failed.attempts = failed.unparseable = static_cast<std::uint64_t>(opts_.problems_per_seed);
        out.generations.push_back(std::move(failed));
      }
    }
  });

  Phase1Result result;
  result.manifest.stage = "phase1";
  result.manifest.teacher_order = opts_.teachers;
  for (const auto& t : opts_.teachers) result.manifest.teacher(t);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    Json k = per_seed[s].summary.to_json();
    k["seed_id"] = seeds[s].id;
    result.knowledge.push_back(std::move(k));
    for (std::size_t t = 0; t < opts_.teachers.size(); ++t) {
      auto& g = per_seed[s].generations[t];
      if (g.unparseable) {
        result.manifest.add_input(opts_.teachers[t], g.unparseable);
        result.manifest.add_drop(opts_.teachers[t], reason::kUnparseable, g.unparseable);
      }
      for (auto& c : g.candidates) result.raw.push_back(std::move(c));
    }
  }

  result.reviews.resize(result.raw.size());
  parallel_for(result.raw.size(), opts_.workers, [&](std::size_t i) {
    const auto& c = result.raw[i];
    result.reviews[i] = peer_review(c, reviewers_for(c.generator_id));
  });

  auto filtered = filter_reviewed(result.raw, result.reviews, result.manifest);
  result.reviewed = std::move(filtered.kept);
  result.manifest.extra = Json{{"seeds", seeds.size()},
                               {"raw_candidates", result.raw.size()},
                               {"reviewed", result.reviewed.size()},
                               {"tau", opts_.tau},
                               {"integrator", opts_.integrator}};
  return result;
}

}  // namespace dtaforge::synth
