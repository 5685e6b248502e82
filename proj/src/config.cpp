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

#include "dtaforge/config.hpp"

#include <cmath>
#include <map>

#include "dtaforge/error.hpp"

namespace dtaforge::config {
namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::kConfig, "config: '" + where + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) fail(ErrorCode::kConfig, "config: unknown key '" + (where.empty() ? k : where + "." + k) + "'");
  }
}

class Reader {
 public:
  explicit Reader(std::set<std::string>& seen) : seen_(seen) {}

  template <typename T>
  void get(const Json& obj, const std::string& prefix, const char* key, T& out) {
    if (!obj.contains(key)) return;
    seen_.insert(prefix.empty() ? key : prefix + "." + key);
    try {
      out = obj.at(key).get<T>();
    } catch (const Json::exception& e) {
      fail(ErrorCode::kConfig, "config: '" + (prefix.empty() ? std::string(key) : prefix + "." + key) +
                                   "' has the wrong type: " + e.what());
    }
  }

  void sampling(const Json& obj, const std::string& prefix, const char* key, gateway::Sampling& s) {
    if (!obj.contains(key)) return;
    const Json& j = obj.at(key);
    std::string where = prefix + "." + key;
    check_keys(j, {"temperature", "top_p", "top_k", "max_tokens", "enable_thinking"}, where);
    seen_.insert(where);
    try {
      s = gateway::Sampling::from_json(j, s);
    } catch (const Json::exception& e) {
      fail(ErrorCode::kConfig, "config: '" + where + "': " + e.what());
    }
  }

 private:
  std::set<std::string>& seen_;
};

formula::Range range_from(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(ErrorCode::kConfig, "config: '" + where + "' must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

RunConfig RunConfig::from_json(const Json& j, const fs::path& base_dir) {
  RunConfig c;
  check_keys(j, {"run_seed", "workers", "replay_mode", "providers", "teachers", "integrator",
                 "student", "summarizer", "judge", "embedder", "seeds_detailed", "phase1",
                 "decontam", "phase2", "analyze", "paths", "stages"},
             "");
  Reader r(c.explicit_fields);
  r.get(j, "", "run_seed", c.run_seed);
  r.get(j, "", "workers", c.workers);
  if (j.contains("replay_mode")) {
    c.explicit_fields.insert("replay_mode");
    c.replay_mode = gateway::replay_mode_from_string(j.at("replay_mode").get<std::string>());
  }
  if (j.contains("providers")) {
    if (!j["providers"].is_array()) fail(ErrorCode::kConfig, "config: 'providers' must be an array");
    for (const auto& p : j["providers"]) {
      check_keys(p, {"id", "kind", "endpoint", "model_name", "role", "max_concurrent",
                     "request_timeout_s", "api_key_env", "supports_logprobs", "embedding_dim"},
                 "providers[]");
      try {
        c.providers.push_back(gateway::ProviderProfile::from_json(p));
      } catch (const Json::exception& e) {
        fail(ErrorCode::kConfig, std::string("config: provider entry: ") + e.what());
      }
    }
  }
  r.get(j, "", "teachers", c.teachers);
  r.get(j, "", "integrator", c.integrator);
  r.get(j, "", "student", c.student);
  r.get(j, "", "summarizer", c.summarizer);
  r.get(j, "", "judge", c.judge);
  r.get(j, "", "embedder", c.embedder);
  r.get(j, "", "seeds_detailed", c.seeds_detailed);

  if (j.contains("phase1")) {
    const Json& p = j["phase1"];
    check_keys(p, {"tau", "problems_per_seed", "domain", "samplings"}, "phase1");
    r.get(p, "phase1", "tau", c.phase1.tau);
    r.get(p, "phase1", "problems_per_seed", c.phase1.problems_per_seed);
    r.get(p, "phase1", "domain", c.phase1.default_domain);
    if (p.contains("samplings")) {
      const Json& s = p["samplings"];
      check_keys(s, {"detail", "extract", "merge", "generate", "review"}, "phase1.samplings");
      r.sampling(s, "phase1.samplings", "detail", c.phase1.detail_sampling);
      r.sampling(s, "phase1.samplings", "extract", c.phase1.extract_sampling);
      r.sampling(s, "phase1.samplings", "merge", c.phase1.merge_sampling);
      r.sampling(s, "phase1.samplings", "generate", c.phase1.generate_sampling);
      r.sampling(s, "phase1.samplings", "review", c.phase1.review_sampling);
    }
  }
  if (j.contains("decontam")) {
    const Json& d = j["decontam"];
    check_keys(d, {"tau_jac", "shingle_k", "num_hashes", "bands", "rows", "tau_txt", "tau_form",
                   "top_k", "tau_xenc", "epsilon", "aggregation", "samples_per_variable",
                   "default_range", "ranges", "judge_sampling"},
               "decontam");
    auto& o = c.decontam;
    r.get(d, "decontam", "tau_jac", o.tau_jac);
    r.get(d, "decontam", "shingle_k", o.shingle_k);
    r.get(d, "decontam", "num_hashes", o.num_hashes);
    r.get(d, "decontam", "bands", o.bands);
    r.get(d, "decontam", "rows", o.rows);
    r.get(d, "decontam", "tau_txt", o.tau_txt);
    r.get(d, "decontam", "tau_form", o.tau_form);
    r.get(d, "decontam", "top_k", o.top_k);
    r.get(d, "decontam", "tau_xenc", o.tau_xenc);
    r.get(d, "decontam", "epsilon", o.epsilon);
    r.get(d, "decontam", "samples_per_variable", o.samples_per_variable);
    if (d.contains("aggregation")) {
      c.explicit_fields.insert("decontam.aggregation");
      o.aggregation = decontam::aggregation_from_string(d["aggregation"].get<std::string>());
    }
    if (d.contains("default_range")) {
      c.explicit_fields.insert("decontam.default_range");
      o.default_range = range_from(d["default_range"], "decontam.default_range");
    }
    if (d.contains("ranges")) {
      c.explicit_fields.insert("decontam.ranges");
      for (const auto& [var, rng] : d["ranges"].items())
        o.ranges[var] = range_from(rng, "decontam.ranges." + var);
    }
    r.sampling(d, "decontam", "judge_sampling", o.judge_sampling);
  }
  if (j.contains("phase2")) {
    const Json& p = j["phase2"];
    check_keys(p, {"reward_weights", "style_cap", "answer_rel_tol", "samplings"}, "phase2");
    if (p.contains("reward_weights")) {
      c.explicit_fields.insert("phase2.reward_weights");
      const Json& w = p["reward_weights"];
      if (!w.is_array() || w.size() != 4)
        fail(ErrorCode::kConfig, "config: 'phase2.reward_weights' must hold four numbers");
      for (std::size_t i = 0; i < 4; ++i) c.phase2.reward_weights[i] = w[i].get<double>();
    }
    r.get(p, "phase2", "style_cap", c.phase2.style_cap);
    r.get(p, "phase2", "answer_rel_tol", c.phase2.answer_rel_tol);
    if (p.contains("samplings")) {
      const Json& s = p["samplings"];
      check_keys(s, {"student", "summarize", "align", "judge"}, "phase2.samplings");
      r.sampling(s, "phase2.samplings", "student", c.phase2.student_sampling);
      r.sampling(s, "phase2.samplings", "summarize", c.phase2.summarize_sampling);
      r.sampling(s, "phase2.samplings", "align", c.phase2.align_sampling);
      r.sampling(s, "phase2.samplings", "judge", c.phase2.judge_sampling);
    }
  }
  if (j.contains("analyze")) {
    const Json& a = j["analyze"];
    check_keys(a, {"eval_models", "protocols", "token_shift", "eval_limit"}, "analyze");
    if (a.contains("eval_models")) {
      for (const auto& m : a["eval_models"]) {
        check_keys(m, {"label", "provider", "thinking"}, "analyze.eval_models[]");
        EvalModel e;
        e.provider = m.at("provider").get<std::string>();
        e.label = m.value("label", e.provider);
        e.thinking = m.value("thinking", false);
        c.analyze.eval_models.push_back(std::move(e));
      }
    }
    r.get(a, "analyze", "protocols", c.analyze.protocols);
    r.get(a, "analyze", "eval_limit", c.analyze.eval_limit);
    if (a.contains("token_shift")) {
      const Json& t = a["token_shift"];
      check_keys(t, {"baseline", "target"}, "analyze.token_shift");
      r.get(t, "analyze.token_shift", "baseline", c.analyze.token_shift_baseline);
      r.get(t, "analyze.token_shift", "target", c.analyze.token_shift_target);
    }
  }
  if (j.contains("paths")) {
    const Json& p = j["paths"];
    check_keys(p, {"seeds", "benchmark", "eval", "efficiency_csv", "replay_dir", "resources"}, "paths");
    auto path = [&](const char* key, fs::path& out) {
      std::string s;
      r.get(p, "paths", key, s);
      if (!s.empty()) out = resolve(base_dir, s);
    };
    path("seeds", c.paths.seeds);
    path("benchmark", c.paths.benchmark);
    path("eval", c.paths.eval);
    path("efficiency_csv", c.paths.efficiency_csv);
    path("replay_dir", c.paths.replay_dir);
    path("resources", c.paths.resources);
  }
  if (j.contains("stages")) {
    const Json& s = j["stages"];
    check_keys(s, {"phase1", "decontam", "phase2", "analyze"}, "stages");
    r.get(s, "stages", "phase1", c.stages.phase1);
    r.get(s, "stages", "decontam", c.stages.decontam);
    r.get(s, "stages", "phase2", c.stages.phase2);
    r.get(s, "stages", "analyze", c.stages.analyze);
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& file) {
  Json j;
  try {
    j = Json::parse(read_file(file));
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kConfig, "config " + file.string() + ": " + e.what());
  }
  return from_json(j, file.parent_path());
}

Json RunConfig::to_json() const {
  Json providers_j = Json::array();
  for (const auto& p : providers) providers_j.push_back(p.to_json());
  Json ranges = Json::object();
  for (const auto& [k, r] : decontam.ranges) ranges[k] = {r.lo, r.hi};
  Json eval_models = Json::array();
  for (const auto& m : analyze.eval_models)
    eval_models.push_back({{"label", m.label}, {"provider", m.provider}, {"thinking", m.thinking}});
  return Json{
      {"run_seed", run_seed},
      {"workers", workers},
      {"replay_mode", gateway::to_string(replay_mode)},
      {"providers", providers_j},
      {"teachers", teachers},
      {"integrator", integrator},
      {"student", student},
      {"summarizer", summarizer},
      {"judge", judge},
      {"embedder", embedder},
      {"seeds_detailed", seeds_detailed},
      {"phase1",
       {{"tau", phase1.tau},
        {"problems_per_seed", phase1.problems_per_seed},
        {"domain", phase1.default_domain},
        {"samplings",
         {{"detail", phase1.detail_sampling.to_json()},
          {"extract", phase1.extract_sampling.to_json()},
          {"merge", phase1.merge_sampling.to_json()},
          {"generate", phase1.generate_sampling.to_json()},
          {"review", phase1.review_sampling.to_json()}}}}},
      {"decontam",
       {{"tau_jac", decontam.tau_jac},
        {"shingle_k", decontam.shingle_k},
        {"num_hashes", decontam.num_hashes},
        {"bands", decontam.bands},
        {"rows", decontam.rows},
        {"tau_txt", decontam.tau_txt},
        {"tau_form", decontam.tau_form},
        {"top_k", decontam.top_k},
        {"tau_xenc", decontam.tau_xenc},
        {"epsilon", decontam.epsilon},
        {"aggregation", decontam::to_string(decontam.aggregation)},
        {"samples_per_variable", decontam.samples_per_variable},
        {"default_range", {decontam.default_range.lo, decontam.default_range.hi}},
        {"ranges", ranges},
        {"judge_sampling", decontam.judge_sampling.to_json()}}},
      {"phase2",
       {{"reward_weights", phase2.reward_weights},
        {"style_cap", phase2.style_cap},
        {"answer_rel_tol", phase2.answer_rel_tol},
        {"samplings",
         {{"student", phase2.student_sampling.to_json()},
          {"summarize", phase2.summarize_sampling.to_json()},
          {"align", phase2.align_sampling.to_json()},
          {"judge", phase2.judge_sampling.to_json()}}}}},
      {"analyze",
       {{"eval_models", eval_models},
        {"protocols", analyze.protocols},
        {"token_shift",
         {{"baseline", analyze.token_shift_baseline}, {"target", analyze.token_shift_target}}},
        {"eval_limit", analyze.eval_limit}}},
      {"paths",
       {{"seeds", paths.seeds.string()},
        {"benchmark", paths.benchmark.string()},
        {"eval", paths.eval.string()},
        {"efficiency_csv", paths.efficiency_csv.string()},
        {"replay_dir", paths.replay_dir.string()},
        {"resources", paths.resources.string()}}},
      {"stages",
       {{"phase1", stages.phase1},
        {"decontam", stages.decontam},
        {"phase2", stages.phase2},
        {"analyze", stages.analyze}}}};
}

std::string RunConfig::digest() const {
  Json j = to_json();
  j.erase("workers");
  j.erase("replay_mode");
  j.erase("paths");
  for (auto& p : j["providers"]) {
    p.erase("max_concurrent");
    p.erase("request_timeout_s");
  }
  return sha256_hex(j.dump());
}

std::vector<std::string> RunConfig::violations() const {
  std::vector<std::string> v;
  auto add = [&](std::string s) { v.push_back(std::move(s)); };
  std::set<std::string> ids;
  for (const auto& p : providers) {
    if (p.id.empty()) add("providers: a profile has an empty id");
    if (!ids.insert(p.id).second) add("providers: duplicate id '" + p.id + "'");
    if (p.max_concurrent < 1) add("providers." + p.id + ": max_concurrent must be >= 1");
    if (p.kind == "http" && p.endpoint.empty()) add("providers." + p.id + ": http profile needs an endpoint");
  }
  auto known = [&](const std::string& id, const std::string& field) {
    if (id.empty()) add(field + ": not set");
    else if (!ids.count(id)) add(field + ": unknown provider '" + id + "'");
  };
  if (workers < 1) add("workers must be >= 1");
  if (teachers.empty()) add("teachers: the list must not be empty");
  std::set<std::string> tset;
  for (const auto& t : teachers) {
    known(t, "teachers");
    if (!tset.insert(t).second) add("teachers: '" + t + "' listed twice");
  }
  if (!integrator.empty()) known(integrator, "integrator");

  if (stages.phase1) {
    if (teachers.size() < 2) add("phase1: peer review needs at least two teachers");
    if (paths.seeds.empty()) add("paths.seeds: required when phase1 is enabled");
  }
  if (!in_unit(phase1.tau)) add("phase1.tau must lie in [0, 1]");
  if (phase1.problems_per_seed < 1) add("phase1.problems_per_seed must be >= 1");

  const auto& d = decontam;
  if (stages.decontam) {
    known(embedder, "embedder");
    known(judge, "judge");
    if (paths.benchmark.empty()) add("paths.benchmark: required when decontam is enabled");
  }
  for (auto [val, name] : {std::pair{d.tau_jac, "decontam.tau_jac"}, {d.tau_txt, "decontam.tau_txt"},
                           {d.tau_form, "decontam.tau_form"}, {d.tau_xenc, "decontam.tau_xenc"}})
    if (!in_unit(val)) add(std::string(name) + " must lie in [0, 1]");
  if (!(d.epsilon > 0.0 && d.epsilon < 1.0)) add("decontam.epsilon must lie in (0, 1)");
  if (d.shingle_k < 1) add("decontam.shingle_k must be >= 1");
  if (d.num_hashes < 1 || d.bands < 1 || d.rows < 1)
    add("decontam.num_hashes, bands and rows must be >= 1");
  else if (d.bands * d.rows != d.num_hashes)
    add("decontam: bands * rows = " + std::to_string(d.bands * d.rows) + " but num_hashes = " +
        std::to_string(d.num_hashes));
  if (d.top_k < 1) add("decontam.top_k must be >= 1");
  if (d.samples_per_variable < 1) add("decontam.samples_per_variable must be >= 1");
  if (!(d.default_range.lo < d.default_range.hi)) add("decontam.default_range is empty");
  for (const auto& [k, r] : d.ranges)
    if (!(r.lo < r.hi)) add("decontam.ranges." + k + " is empty");

  double wsum = 0.0;
  for (double w : phase2.reward_weights) {
    if (!(w >= 0.0)) add("phase2.reward_weights must be non-negative");
    wsum += w;
  }
  if (std::fabs(wsum - 1.0) > 1e-9)
    add("phase2.reward_weights sum to " + format_double(wsum) + ", not 1");
  if (phase2.style_cap < 1) add("phase2.style_cap must be >= 1");
  if (!(phase2.answer_rel_tol > 0.0)) add("phase2.answer_rel_tol must be positive");
  if (stages.phase2) {
    known(student, "student");
    known(summarizer, "summarizer");
    known(judge, "judge");
  }

  std::set<std::string> labels;
  for (const auto& m : analyze.eval_models) {
    known(m.provider, "analyze.eval_models." + m.label);
    if (!labels.insert(m.label).second) add("analyze.eval_models: duplicate label '" + m.label + "'");
  }
  for (const auto& p : analyze.protocols)
    if (p != "pass@1" && p != "cons@16") add("analyze.protocols: unknown protocol '" + p + "'");
  if (!analyze.eval_models.empty() && paths.eval.empty() && stages.analyze)
    add("paths.eval: required when analyze.eval_models is set");
  for (const auto& [label, field] : {std::pair{analyze.token_shift_baseline, "baseline"},
                                     {analyze.token_shift_target, "target"}})
    if (!label.empty() && !labels.count(label))
      add(std::string("analyze.token_shift.") + field + ": unknown eval model '" + label + "'");
  if (analyze.token_shift_baseline.empty() != analyze.token_shift_target.empty())
    add("analyze.token_shift: set both baseline and target, or neither");

  if (replay_mode != gateway::ReplayMode::kOff && paths.replay_dir.empty())
    add("paths.replay_dir: required when replay_mode is " + std::string(gateway::to_string(replay_mode)));
  return v;
}

std::vector<std::string> RunConfig::warnings() const {
  std::vector<std::string> w;
  auto unset = [&](const std::string& f) { return !explicit_fields.count(f); };
  if (unset("phase1.tau"))
    w.push_back("phase1.tau has no reference value; using the built-in default " + format_double(phase1.tau));
  for (const char* s : {"detail", "extract", "merge", "generate", "review"})
    if (unset(std::string("phase1.samplings.") + s))
      w.push_back(std::string("phase1.samplings.") + s + " has no reference value; using built-in sampling defaults");
  for (const char* s : {"student", "summarize", "align", "judge"})
    if (unset(std::string("phase2.samplings.") + s))
      w.push_back(std::string("phase2.samplings.") + s + " has no reference value; using built-in sampling defaults");
  if (unset("decontam.judge_sampling"))
    w.push_back("decontam.judge_sampling has no reference value; using built-in sampling defaults");
  if (unset("decontam.aggregation"))
    w.push_back("decontam.aggregation has no reference value; using the built-in default 'min'");
  if (unset("decontam.default_range"))
    w.push_back("decontam.default_range has no reference value; using the built-in default [0.1, 100]");
  if (unset("decontam.samples_per_variable"))
    w.push_back("decontam.samples_per_variable has no reference value; using the built-in default 20");
  if (unset("phase2.style_cap"))
    w.push_back("phase2.style_cap has no reference value; using the built-in default 200");
  if (unset("seeds_detailed"))
    w.push_back("seeds_detailed has no reference value; using the built-in default false (per-record flags apply)");
  return w;
}

synth::Phase1Options RunConfig::phase1_options() const {
  auto o = phase1;
  o.teachers = teachers;
  o.integrator = integrator.empty() && !teachers.empty() ? teachers.front() : integrator;
  o.run_seed = run_seed;
  o.workers = workers;
  return o;
}

decontam::DecontamOptions RunConfig::decontam_options() const {
  auto o = decontam;
  o.run_seed = run_seed;
  o.workers = workers;
  o.embedder = embedder;
  o.judge = judge;
  return o;
}

align::Phase2Options RunConfig::phase2_options() const {
  auto o = phase2;
  o.teachers = teachers;
  o.student = student;
  o.summarizer = summarizer;
  o.judge = judge;
  o.run_seed = run_seed;
  o.workers = workers;
  return o;
}

}  // namespace dtaforge::config
