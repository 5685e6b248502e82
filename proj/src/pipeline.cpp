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

#include "dtaforge/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>
#include <sstream>

#include "dtaforge/align_phase2.hpp"
#include "dtaforge/analytics.hpp"
#include "dtaforge/decontam.hpp"
#include "dtaforge/error.hpp"
#include "dtaforge/prompt_forge.hpp"
#include "dtaforge/sim_backend.hpp"
#include "dtaforge/synth_phase1.hpp"

namespace dtaforge::pipeline {
namespace fs = std::filesystem;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kInit: return "init";
    case Stage::kPhase1: return "phase1";
    case Stage::kDecontam: return "decontam";
    case Stage::kPhase2: return "phase2";
    case Stage::kAnalyze: return "analyze";
  }
  return "?";
}

Stage stage_from_string(std::string_view s) {
  for (Stage st : all_stages())
    if (to_string(st) == s) return st;
  fail(ErrorCode::kConfig, "unknown stage '" + std::string(s) +
                               "' (expected init, phase1, decontam, phase2 or analyze)");
}

std::vector<Stage> all_stages() {
  return {Stage::kInit, Stage::kPhase1, Stage::kDecontam, Stage::kPhase2, Stage::kAnalyze};
}

std::vector<Stage> parse_stages(std::string_view csv) {
  std::set<Stage> picked;
  for (const auto& part : split(csv, ',')) {
    auto name = trim(part);
    if (!name.empty()) picked.insert(stage_from_string(name));
  }
  if (picked.empty()) fail(ErrorCode::kConfig, "no stages selected");
  return {picked.begin(), picked.end()};
}

std::string files::manifest(Stage s) { return "manifest_" + std::string(to_string(s)) + ".json"; }

// ---- lock ------------------------------------------------------------------

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / files::kLock) {
  fs::create_directories(run_dir);
  int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      fail(ErrorCode::kIo, "run directory " + run_dir.string() +
                               " is locked by another run (remove " + path_.string() +
                               " if that run is gone)");
    fail(ErrorCode::kIo, "cannot create " + path_.string() + ": " + std::strerror(errno));
  }
  std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

// ---- summary ---------------------------------------------------------------

Json RunSummary::to_json() const {
  Json st = Json::array();
  for (const auto& s : stages) {
    Json j{{"stage", to_string(s.stage)}, {"status", s.status}, {"output_hash", s.output_hash}};
    if (!s.error.empty()) j["error"] = s.error;
    st.push_back(std::move(j));
  }
  Json out{{"stages", st}, {"exit_code", exit_code}, {"final_hash", final_hash}};
  if (!error.empty()) out["error"] = error;
  return out;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kReplayMiss: return kExitReplayMiss;
    case ErrorCode::kConfig: return kExitValidation;
    default: return kExitStage;
  }
}

// ---- hashing ---------------------------------------------------------------

std::string hash_files(const fs::path& dir, const std::vector<std::string>& names) {
  std::string acc;
  for (const auto& n : names) {
    acc += n;
    acc.push_back('\0');
    acc += sha256_hex(read_file(dir / n));
    acc.push_back('\n');
  }
  return sha256_hex(acc);
}

std::string hash_paths(const std::vector<fs::path>& paths) {
  std::string acc;
  for (const auto& p : paths) {
    acc += p.filename().string();
    acc.push_back('\0');
    acc += sha256_hex(read_file(p));
    acc.push_back('\n');
  }
  return sha256_hex(acc);
}

namespace {

std::vector<Json> to_rows(const auto& items) {
  std::vector<Json> rows;
  rows.reserve(items.size());
  for (const auto& it : items) rows.push_back(it.to_json());
  return rows;
}

void write_jsonl(const fs::path& p, const std::vector<Json>& rows) {
  write_file_atomic(p, to_jsonl(rows));
}

std::vector<Json> read_required(const fs::path& p) {
  if (!fs::exists(p)) fail(ErrorCode::kIo, "missing input file: expected " + p.string());
  return read_jsonl(p);
}

prompt::TemplateStore load_templates(const config::RunConfig& cfg) {
  if (!cfg.paths.resources.empty()) return prompt::TemplateStore::load(cfg.paths.resources / "templates");
  return prompt::TemplateStore::load_default();
}

analytics::Lexicons load_lexicons(const config::RunConfig& cfg) {
  if (!cfg.paths.resources.empty()) return analytics::Lexicons::load(cfg.paths.resources / "lexicons");
  return analytics::Lexicons::load_default();
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * v);
  return buf;
}

}  // namespace

// ---- pipeline --------------------------------------------------------------

Pipeline::Pipeline(config::RunConfig cfg, fs::path run_dir)
    : cfg_(std::move(cfg)), dir_(std::move(run_dir)) {
  std::optional<fs::path> cache;
  if (!cfg_.paths.replay_dir.empty()) cache = cfg_.paths.replay_dir;
  gw_ = std::make_unique<gateway::Gateway>(cfg_.providers, cfg_.replay_mode, cache);
  sim::install(*gw_);
}

Pipeline::~Pipeline() = default;

std::vector<fs::path> Pipeline::inputs_of(Stage s) const {
  switch (s) {
    case Stage::kInit: {
      std::vector<fs::path> in;
      for (const auto& p : {cfg_.paths.seeds, cfg_.paths.benchmark, cfg_.paths.eval,
                            cfg_.paths.efficiency_csv})
        if (!p.empty()) in.push_back(p);
      return in;
    }
    case Stage::kPhase1: return {cfg_.paths.seeds};
    case Stage::kDecontam: return {dir_ / files::kReviewed, cfg_.paths.benchmark};
    case Stage::kPhase2: return {dir_ / files::kClean};
    case Stage::kAnalyze: {
      std::vector<fs::path> in{dir_ / files::kAligned};
      if (!cfg_.analyze.eval_models.empty()) in.push_back(cfg_.paths.eval);
      if (!cfg_.paths.efficiency_csv.empty()) in.push_back(cfg_.paths.efficiency_csv);
      return in;
    }
  }
  return {};
}

std::vector<std::string> Pipeline::outputs_of(Stage s) const {
  switch (s) {
    case Stage::kInit: return {files::kConfig};
    case Stage::kPhase1: return {files::kRaw, files::kReviews, files::kKnowledge, files::kReviewed};
    case Stage::kDecontam: return {files::kClean, files::kFlags, files::kQuarantine};
    case Stage::kPhase2: return {files::kStyleMd, files::kStyleJson, files::kAligned, files::kScores};
    case Stage::kAnalyze: return {files::kEvalOutputs, files::kAnalyticsJson, files::kAnalyticsTxt};
  }
  return {};
}

bool Pipeline::up_to_date(Stage s, const std::string& input_hash) const {
  if (force_) return false;
  auto mpath = dir_ / files::manifest(s);
  if (!fs::exists(mpath)) return false;
  StageManifest m;
  try {
    m = StageManifest::from_json(Json::parse(read_file(mpath)));
  } catch (const std::exception&) {
    return false;
  }
  if (m.input_hash != input_hash || m.config_digest != cfg_.digest()) return false;
  auto outs = outputs_of(s);
  for (const auto& o : outs)
    if (!fs::exists(dir_ / o)) return false;
  return hash_files(dir_, outs) == m.output_hash;
}

void Pipeline::finish(StageManifest& m, Stage s, const std::string& input_hash,
                      double seconds) const {
  m.stage = std::string(to_string(s));
  m.input_hash = input_hash;
  m.output_hash = hash_files(dir_, outputs_of(s));
  m.config_digest = cfg_.digest();
  m.wall_time_s = seconds;
  write_file_atomic(dir_ / files::manifest(s), m.to_json().dump(2) + "\n");
}

StageOutcome Pipeline::run_stage(Stage s) {
  StageOutcome out;
  out.stage = s;
  for (const auto& in : inputs_of(s))
    if (!fs::exists(in))
      fail(ErrorCode::kIo, std::string(to_string(s)) + ": missing input file: expected " + in.string());
  std::string input_hash = hash_paths(inputs_of(s));
  if (up_to_date(s, input_hash)) {
    out.status = "skipped";
    out.output_hash = hash_files(dir_, outputs_of(s));
    return out;
  }
  auto t0 = std::chrono::steady_clock::now();
  StageManifest m;
  switch (s) {
    case Stage::kInit: do_init(m); break;
    case Stage::kPhase1: do_phase1(m); break;
    case Stage::kDecontam: do_decontam(m); break;
    case Stage::kPhase2: do_phase2(m); break;
    case Stage::kAnalyze: do_analyze(m); break;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  finish(m, s, input_hash, secs);
  out.status = "ran";
  out.output_hash = m.output_hash;
  return out;
}

RunSummary Pipeline::run(const std::vector<Stage>& stages) {
  RunSummary summary;
  auto violations = cfg_.violations();
  if (!violations.empty()) {
    summary.exit_code = kExitValidation;
    summary.error = "config: " + join(violations, "; ");
    return summary;
  }
  RunLock lock(dir_);
  // Disabled stages in the config drop out of the request.
  std::vector<Stage> todo;
  for (Stage s : stages) {
    bool on = s == Stage::kInit || (s == Stage::kPhase1 && cfg_.stages.phase1) ||
              (s == Stage::kDecontam && cfg_.stages.decontam) ||
              (s == Stage::kPhase2 && cfg_.stages.phase2) ||
              (s == Stage::kAnalyze && cfg_.stages.analyze);
    if (on) todo.push_back(s);
  }
  std::string hashes;
  for (Stage s : todo) {
    try {
      auto o = run_stage(s);
      hashes += std::string(to_string(s)) + "=" + o.output_hash + "\n";
      summary.stages.push_back(std::move(o));
    } catch (const Error& e) {
      summary.stages.push_back({s, "failed", "", e.what()});
      summary.exit_code = exit_code_for(e.code());
      summary.error = std::string(to_string(s)) + ": " + e.what();
      break;
    } catch (const std::exception& e) {
      summary.stages.push_back({s, "failed", "", e.what()});
      summary.exit_code = kExitStage;
      summary.error = std::string(to_string(s)) + ": " + e.what();
      break;
    }
  }
  summary.final_hash = sha256_hex(hashes);
  write_file_atomic(dir_ / files::kSummary, summary.to_json().dump(2) + "\n");
  return summary;
}

// ---- stages ----------------------------------------------------------------

void Pipeline::do_init(StageManifest& m) {
  write_file_atomic(dir_ / files::kConfig, cfg_.to_json().dump(2) + "\n");
  Json extra{{"warnings", cfg_.warnings()}, {"config_digest", cfg_.digest()}};
  if (!cfg_.paths.seeds.empty()) extra["seeds"] = read_jsonl(cfg_.paths.seeds).size();
  if (!cfg_.paths.benchmark.empty())
    extra["benchmark_items"] = read_jsonl(cfg_.paths.benchmark).size();
  if (!cfg_.paths.eval.empty()) extra["eval_questions"] = read_jsonl(cfg_.paths.eval).size();
  m.teacher_order = cfg_.teachers;
  m.extra = std::move(extra);
}

void Pipeline::do_phase1(StageManifest& m) {
  auto rows = read_required(cfg_.paths.seeds);
  std::vector<synth::SeedSample> seeds;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto s = synth::SeedSample::from_json(rows[i], i);
    if (cfg_.seeds_detailed) s.is_detailed = true;
    seeds.push_back(std::move(s));
  }
  auto templates = load_templates(cfg_);
  synth::Phase1 phase(*gw_, templates, cfg_.phase1_options());
  auto res = phase.run(seeds);
  write_jsonl(dir_ / files::kRaw, to_rows(res.raw));
  write_jsonl(dir_ / files::kReviews, to_rows(res.reviews));
  write_jsonl(dir_ / files::kKnowledge, res.knowledge);
  write_jsonl(dir_ / files::kReviewed, to_rows(res.reviewed));
  m = std::move(res.manifest);
}

void Pipeline::do_decontam(StageManifest& m) {
  std::vector<synth::TrainCandidate> cands;
  for (const auto& j : read_required(dir_ / files::kReviewed))
    cands.push_back(synth::TrainCandidate::from_json(j));
  std::vector<decontam::BenchmarkItem> bench;
  auto brows = read_required(cfg_.paths.benchmark);
  for (std::size_t i = 0; i < brows.size(); ++i)
    bench.push_back(decontam::BenchmarkItem::from_json(brows[i], i));
  auto templates = load_templates(cfg_);
  decontam::Decontaminator d(*gw_, templates, cfg_.decontam_options(), cfg_.teachers);
  auto res = d.run(cands, bench);
  write_jsonl(dir_ / files::kClean, to_rows(res.clean));
  write_jsonl(dir_ / files::kFlags, to_rows(res.flags));
  write_jsonl(dir_ / files::kQuarantine, to_rows(res.quarantined));
  m = std::move(res.manifest);
}

void Pipeline::do_phase2(StageManifest& m) {
  std::vector<synth::TrainCandidate> samples;
  for (const auto& j : read_required(dir_ / files::kClean))
    samples.push_back(synth::TrainCandidate::from_json(j));
  auto templates = load_templates(cfg_);
  align::Phase2 phase(*gw_, templates, cfg_.phase2_options());
  auto res = phase.run(samples);
  write_file_atomic(dir_ / files::kStyleMd, res.style.markdown + "\n");
  write_file_atomic(dir_ / files::kStyleJson, res.style.to_json().dump(2) + "\n");
  write_jsonl(dir_ / files::kAligned, to_rows(res.samples));
  write_jsonl(dir_ / files::kScores, res.sidecar);
  m = std::move(res.manifest);
}

void Pipeline::do_analyze(StageManifest& m) {
  std::vector<align::AlignedSample> aligned;
  for (const auto& j : read_required(dir_ / files::kAligned))
    aligned.push_back(align::AlignedSample::from_json(j));

  Json report = Json::object();
  std::ostringstream txt;
  std::map<std::string, std::uint64_t> wins;
  double margin = 0.0;
  for (const auto& a : aligned) {
    ++wins[a.winning_teacher];
    margin += a.selection_margin;
  }
  report["aligned_samples"] = aligned.size();
  report["wins_by_teacher"] = wins;
  report["mean_selection_margin"] = aligned.empty() ? 0.0 : margin / static_cast<double>(aligned.size());
  txt << "Aligned samples: " << aligned.size() << "\n";
  for (const auto& t : cfg_.teachers) txt << "  selected from " << t << ": " << wins[t] << "\n";

  std::vector<Json> eval_rows;
  std::map<std::string, double> pass1_by_label;
  std::map<std::string, std::vector<std::string>> pass1_outputs;
  if (!cfg_.analyze.eval_models.empty()) {
    auto rows = read_required(cfg_.paths.eval);
    std::vector<analytics::EvalQuestion> qs;
    for (std::size_t i = 0; i < rows.size(); ++i) qs.push_back(analytics::EvalQuestion::from_json(rows[i], i));
    if (cfg_.analyze.eval_limit > 0 && qs.size() > cfg_.analyze.eval_limit) qs.resize(cfg_.analyze.eval_limit);
    Json acc = Json::array();
    txt << "\nAccuracy on " << qs.size() << " questions\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-24s %-9s %-9s %10s\n", "Model", "Thinking", "Protocol", "Accuracy");
    txt << line;
    for (const auto& em : cfg_.analyze.eval_models) {
      for (const auto& proto_name : cfg_.analyze.protocols) {
        auto proto = proto_name == "cons@16" ? analytics::cons16_protocol(em.thinking)
                                             : analytics::pass1_protocol(em.thinking);
        auto items = analytics::collect_answers(qs, *gw_, em.provider, proto, cfg_.run_seed, cfg_.workers);
        double score = proto.samples == 1 ? analytics::pass_at_1(items)
                                          : analytics::cons_at_k(items, proto.samples);
        acc.push_back({{"model", em.label}, {"thinking", em.thinking}, {"protocol", proto.name}, {"accuracy", score}});
        std::snprintf(line, sizeof(line), "%-24s %-9s %-9s %10s\n", em.label.c_str(),
                      em.thinking ? "yes" : "no", proto.name.c_str(), pct(score).c_str());
        txt << line;
        if (proto.samples == 1) {
          pass1_by_label[em.label] = score;
          auto& outs = pass1_outputs[em.label];
          for (const auto& it : items) outs.push_back(it.model_answers.front());
        }
        for (const auto& it : items)
          eval_rows.push_back({{"model", em.label}, {"protocol", proto.name}, {"id", it.id},
                               {"gold_answer", it.gold_answer}, {"answers", it.model_answers}});
      }
    }
    report["accuracy"] = acc;
  }
  write_jsonl(dir_ / files::kEvalOutputs, eval_rows);

  if (!cfg_.analyze.token_shift_baseline.empty()) {
    const auto& base = pass1_outputs[cfg_.analyze.token_shift_baseline];
    const auto& target = pass1_outputs[cfg_.analyze.token_shift_target];
    if (base.empty() || target.empty())
      fail(ErrorCode::kConfig, "analyze.token_shift needs pass@1 outputs for both models");
    auto rows = analytics::token_shift(base, target, load_lexicons(cfg_));
    // Rows come sorted by |shift|; one-off numbers dominate a flat top list, so
    // each category gets its own slice.
    Json by_cat = Json::object();
    txt << "\nToken shift (" << cfg_.analyze.token_shift_baseline << " -> "
        << cfg_.analyze.token_shift_target << ")\n";
    for (auto cat : {analytics::TokenCategory::kLogicalStructural,
                     analytics::TokenCategory::kDomainSpecific, analytics::TokenCategory::kContent}) {
      std::vector<analytics::TokenShiftRow> slice;
      for (const auto& r : rows)
        if (r.category == cat && slice.size() < 15) slice.push_back(r);
      Json arr = Json::array();
      for (const auto& r : slice) arr.push_back(r.to_json());
      by_cat[std::string(analytics::to_string(cat))] = arr;
      txt << "[" << analytics::to_string(cat) << "]\n" << analytics::token_shift_table(slice, 15);
    }
    report["token_shift"] = by_cat;
  }

  if (!cfg_.paths.efficiency_csv.empty()) {
    auto eff = analytics::parse_efficiency_csv(read_file(cfg_.paths.efficiency_csv));
    for (auto& e : eff)
      if (!e.pass1)
        if (auto it = pass1_by_label.find(e.model); it != pass1_by_label.end() && it->second > 0)
          e.pass1 = it->second;
    Json derived = Json::array();
    for (const auto& e : eff)
      if (e.pass1) {
        auto d = analytics::derived_metrics(e).to_json();
        d["model"] = e.model;
        d["thinking"] = e.thinking;
        derived.push_back(std::move(d));
      }
    report["efficiency"] = derived;
    txt << "\nEfficiency\n" << analytics::efficiency_table(eff) << "\nDerived metrics\n"
        << analytics::derived_table(eff);
  }

  write_file_atomic(dir_ / files::kAnalyticsJson, report.dump(2) + "\n");
  write_file_atomic(dir_ / files::kAnalyticsTxt, txt.str());
  m.teacher_order = cfg_.teachers;
  m.extra = Json{{"aligned_samples", aligned.size()}, {"eval_rows", eval_rows.size()}};
}

// ---- report ----------------------------------------------------------------

std::string funnel_table(const std::vector<StageManifest>& manifests) {
  std::map<std::string, const StageManifest*> by_stage;
  std::vector<std::string> teachers;
  for (const auto& m : manifests) {
    by_stage[m.stage] = &m;
    if (teachers.empty() && !m.teacher_order.empty()) teachers = m.teacher_order;
  }
  if (teachers.empty())
    for (const auto& m : manifests)
      for (const auto& [t, c] : m.per_teacher)
        if (std::find(teachers.begin(), teachers.end(), t) == teachers.end()) teachers.push_back(t);

  struct Row {
    std::string label;
    std::vector<std::uint64_t> v;
  };
  std::vector<Row> rows;
  std::vector<std::string> absent;
  auto count_row = [&](const std::string& label, const char* stage, auto getter, bool always) {
    auto it = by_stage.find(stage);
    if (it == by_stage.end()) return;
    Row r{label, {}};
    std::uint64_t total = 0;
    for (const auto& t : teachers) {
      auto pt = it->second->per_teacher.find(t);
      std::uint64_t n = pt == it->second->per_teacher.end() ? 0 : getter(pt->second);
      r.v.push_back(n);
      total += n;
    }
    if (always || total > 0) rows.push_back(std::move(r));
  };
  auto drop = [](const char* why) {
    return [why](const TeacherCounts& c) {
      auto it = c.dropped.find(why);
      return it == c.dropped.end() ? std::uint64_t{0} : it->second;
    };
  };
  auto input = [](const TeacherCounts& c) { return c.input; };
  auto kept = [](const TeacherCounts& c) { return c.kept; };

  count_row("Generated", "phase1", input, true);
  count_row("Unparseable", "phase1", drop(reason::kUnparseable), false);
  count_row("Review unavailable", "phase1", drop(reason::kReviewUnavailable), false);
  count_row("Peer Review", "phase1", drop(reason::kPeerReview), true);
  count_row("MinHash", "decontam", drop(reason::kMinHash), true);
  count_row("Semantic", "decontam", drop(reason::kSemantic), true);
  count_row("Quarantined", "decontam", drop(reason::kQuarantined), false);
  count_row("Curated", "decontam", kept, true);
  count_row("No aligned candidate", "phase2", drop(reason::kNoCandidate), false);
  count_row("Aligned", "phase2", kept, true);
  for (const char* st : {"phase1", "decontam", "phase2"})
    if (!by_stage.count(st)) absent.push_back(st);

  std::size_t label_w = 6;
  for (const auto& r : rows) label_w = std::max(label_w, r.label.size());
  std::vector<std::size_t> col_w;
  for (const auto& t : teachers) col_w.push_back(std::max<std::size_t>(t.size(), 6));
  std::ostringstream out;
  auto cell = [&](const std::string& s, std::size_t w, bool left) {
    if (left) out << s << std::string(w - std::min(w, s.size()), ' ');
    else out << std::string(w - std::min(w, s.size()), ' ') << s;
  };
  cell("Method", label_w, true);
  for (std::size_t i = 0; i < teachers.size(); ++i) {
    out << "  ";
    cell(teachers[i], col_w[i], false);
  }
  out << "  " << std::string(5, ' ') << "Total\n";
  std::size_t width = label_w + 12;
  for (auto w : col_w) width += w + 2;
  out << std::string(width - 1, '-') << "\n";
  for (const auto& r : rows) {
    cell(r.label, label_w, true);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < r.v.size(); ++i) {
      out << "  ";
      cell(std::to_string(r.v[i]), col_w[i], false);
      total += r.v[i];
    }
    out << "  ";
    cell(std::to_string(total), 10, false);
    out << "\n";
  }
  for (const auto& a : absent) out << "(" << a << ": absent)\n";
  return out.str();
}

std::string report(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) fail(ErrorCode::kIo, "no run directory at " + run_dir.string());
  std::vector<StageManifest> manifests;
  std::vector<std::string> present;
  for (Stage s : all_stages()) {
    auto p = run_dir / files::manifest(s);
    if (!fs::exists(p)) continue;
    manifests.push_back(StageManifest::from_json(Json::parse(read_file(p))));
    present.push_back(std::string(to_string(s)));
  }
  if (manifests.empty()) fail(ErrorCode::kIo, "no stage manifests in " + run_dir.string());

  std::ostringstream out;
  out << "Run directory: " << run_dir.string() << "\n";
  out << "Stages:";
  for (Stage s : all_stages()) {
    bool here = std::find(present.begin(), present.end(), to_string(s)) != present.end();
    out << " " << to_string(s) << (here ? "" : " (absent)");
  }
  out << "\n\nSample removal per teacher\n" << funnel_table(manifests);

  out << "\nDataset sizes\n";
  for (const char* f : {files::kRaw, files::kReviewed, files::kClean, files::kAligned}) {
    auto p = run_dir / f;
    if (fs::exists(p)) out << "  " << f << ": " << read_jsonl(p).size() << "\n";
    else out << "  " << f << ": absent\n";
  }
  for (const auto& m : manifests)
    if (!m.conserved()) out << "WARNING: counts in " << m.stage << " do not reconcile\n";
  if (fs::exists(run_dir / files::kAnalyticsTxt))
    out << "\nAnalytics\n" << read_file(run_dir / files::kAnalyticsTxt);
  return out.str();
}

std::vector<std::string> compare_runs(const fs::path& a, const fs::path& b) {
  std::vector<std::string> diffs;
  for (Stage s : all_stages()) {
    auto pa = a / files::manifest(s), pb = b / files::manifest(s);
    bool ea = fs::exists(pa), eb = fs::exists(pb);
    if (!ea && !eb) continue;
    if (ea != eb) {
      diffs.push_back(std::string(to_string(s)) + ": manifest present in only one run");
      continue;
    }
    auto ma = StageManifest::from_json(Json::parse(read_file(pa)));
    auto mb = StageManifest::from_json(Json::parse(read_file(pb)));
    if (s == Stage::kInit) continue;  // config.json embeds paths
    if (ma.output_hash != mb.output_hash)
      diffs.push_back(std::string(to_string(s)) + ": output hash " + ma.output_hash.substr(0, 12) +
                      " vs " + mb.output_hash.substr(0, 12));
  }
  auto da = a / files::kAligned, db = b / files::kAligned;
  if (fs::exists(da) && fs::exists(db) && read_file(da) != read_file(db))
    diffs.push_back(std::string(files::kAligned) + ": contents differ");
  return diffs;
}

}  // namespace dtaforge::pipeline
