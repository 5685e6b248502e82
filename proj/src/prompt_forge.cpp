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

#include "dtaforge/prompt_forge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <regex>

#include "dtaforge/error.hpp"
#include "dtaforge/util.hpp"

#ifndef DTAFORGE_RESOURCE_DIR
#define DTAFORGE_RESOURCE_DIR "resources"
#endif

namespace dtaforge::prompt {

namespace {

constexpr std::pair<TemplateId, std::string_view> kTemplateNames[] = {
    {TemplateId::kDetail, "detail"},
    {TemplateId::kExtract, "extract"},
    {TemplateId::kGenerate, "generate"},
    {TemplateId::kPeerReview, "peer_review"},
    {TemplateId::kSummarizeStyle, "summarize_style"},
    {TemplateId::kAlign, "align"},
    {TemplateId::kReward, "reward"},
    {TemplateId::kPairwise, "pairwise"},
    {TemplateId::kMergeKnowledge, "merge_knowledge"},
    {TemplateId::kEntailment, "entailment"},
    {TemplateId::kReflectWrapper, "reflect_wrapper"},
    {TemplateId::kJsonReminder, "json_reminder"},
};

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Locates the next {{name}} at or after `from`; returns npos when none.
std::size_t next_placeholder(std::string_view body, std::size_t from, std::string& name,
                             std::size_t& end) {
  while (true) {
    auto open = body.find("{{", from);
    if (open == std::string_view::npos) return open;
    auto close = body.find("}}", open + 2);
    if (close == std::string_view::npos) return std::string_view::npos;
    auto inner = trim(body.substr(open + 2, close - open - 2));
    bool ok = !inner.empty() && !std::isdigit(static_cast<unsigned char>(inner.front()));
    for (char c : inner) ok = ok && is_name_char(c);
    if (ok) {
      name = std::string(inner);
      end = close + 2;
      return open;
    }
    from = open + 1;
  }
}

[[noreturn]] void parse_fail(const std::string& what) { fail(ErrorCode::kParse, what); }

// Strips markdown emphasis, bullets and heading marks from the start of a line.
std::string_view strip_line_markers(std::string_view line) {
  line = trim(line);
  while (!line.empty()) {
    char c = line.front();
    if (c == '-' || c == '*' || c == '#' || c == '>' || c == '+' || c == '_' ||
        c == ' ' || c == '\t') {
      line.remove_prefix(1);
    } else {
      break;
    }
  }
  return line;
}

std::string strip_emphasis(std::string_view s) {
  std::string out;
  for (char c : s)
    if (c != '*' && c != '`') out.push_back(c);
  return std::string(trim(out));
}

}  // namespace

std::string_view to_string(TemplateId id) {
  for (const auto& [tid, name] : kTemplateNames)
    if (tid == id) return name;
  return "unknown";
}

TemplateId template_id_from_string(std::string_view s) {
  for (const auto& [tid, name] : kTemplateNames)
    if (name == s) return tid;
  fail(ErrorCode::kPrecondition, "unknown template id '" + std::string(s) + "'");
}

std::vector<std::string> placeholders_in(std::string_view body) {
  std::vector<std::string> out;
  std::string name;
  std::size_t end = 0;
  for (auto pos = next_placeholder(body, 0, name, end); pos != std::string_view::npos;
       pos = next_placeholder(body, end, name, end)) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

std::string render_body(std::string_view body,
                        const std::map<std::string, std::string>& bindings) {
  std::string out;
  out.reserve(body.size());
  std::string name;
  std::size_t end = 0, cursor = 0;
  for (auto pos = next_placeholder(body, 0, name, end); pos != std::string_view::npos;
       pos = next_placeholder(body, end, name, end)) {
    auto it = bindings.find(name);
    if (it == bindings.end())
      fail(ErrorCode::kMissingKey, "missing binding for placeholder '" + name + "'");
    out.append(body.substr(cursor, pos - cursor));
    out.append(it->second);
    cursor = end;
  }
  out.append(body.substr(cursor));
  return out;
}

TemplateStore TemplateStore::load(const std::filesystem::path& dir) {
  auto manifest_path = dir / "manifest.json";
  Json manifest;
  try {
    manifest = Json::parse(read_file(manifest_path));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kConfig, manifest_path.string() + ": " + e.what());
  }
  TemplateStore store;
  store.version_ = manifest.value("version", std::string("unversioned"));
  for (const auto& [name, file] : manifest.at("templates").items()) {
    auto id = template_id_from_string(name);
    std::string body = read_file(dir / file.get<std::string>());
    // Files end with a newline for editor hygiene; it is not template text.
    if (!body.empty() && body.back() == '\n') body.pop_back();
    Template t{id, body, {}};
    for (auto& p : placeholders_in(body)) t.required_placeholders.insert(p);
    store.templates_[id] = std::move(t);
  }
  return store;
}

std::filesystem::path TemplateStore::default_resource_dir() {
  if (const char* env = std::getenv("DTAFORGE_RESOURCES"); env && *env) return env;
  return DTAFORGE_RESOURCE_DIR;
}

TemplateStore TemplateStore::load_default() { return load(default_resource_dir() / "templates"); }

const Template& TemplateStore::get(TemplateId id) const {
  auto it = templates_.find(id);
  if (it == templates_.end())
    fail(ErrorCode::kPrecondition, "template '" + std::string(to_string(id)) + "' not loaded");
  return it->second;
}

std::string TemplateStore::render(TemplateId id,
                                  const std::map<std::string, std::string>& bindings) const {
  return render_body(get(id).body, bindings);
}

// ---- boxed score -----------------------------------------------------------

double parse_boxed_score(std::string_view text) {
  std::size_t content_begin = std::string_view::npos;
  for (std::size_t pos = text.find("\\box"); pos != std::string_view::npos;
       pos = text.find("\\box", pos + 1)) {
    std::size_t brace = pos + 4;
    if (text.substr(brace, 2) == "ed") brace += 2;
    if (brace < text.size() && text[brace] == '{') content_begin = brace + 1;
  }
  if (content_begin == std::string_view::npos) parse_fail("no \\box{} score found");
  int depth = 1;
  std::size_t i = content_begin;
  for (; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}' && --depth == 0) break;
  }
  if (i >= text.size()) parse_fail("unterminated \\box{}");
  auto content = text.substr(content_begin, i - content_begin);
  auto value = parse_double(content);
  if (!value) parse_fail("\\box{} content is not numeric: '" + std::string(content) + "'");
  if (*value < 0.0 || *value > 1.0)
    fail(ErrorCode::kRange, "boxed score " + std::string(trim(content)) + " outside [0, 1]");
  return *value;
}

std::string format_boxed_score(double score) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "\\box{%.2f}", score);
  return buf;
}

// ---- JSON extraction -------------------------------------------------------

namespace {

// End index (inclusive) of the balanced object starting at `open`, or npos.
std::size_t match_object(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false, escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

std::string drop_trailing_commas(std::string_view s) {
  std::string out;
  bool in_string = false, escaped = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      out.push_back(c);
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && (s[j] == '}' || s[j] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

std::optional<Json> parse_object(std::string_view span) {
  auto j = Json::parse(drop_trailing_commas(span), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

Json locate_json(std::string_view text) {
  auto span = extract_json_object(text);
  if (!span) parse_fail("no JSON object found");
  return *parse_object(*span);
}

}  // namespace

std::optional<std::string> extract_json_object(std::string_view text) {
  for (std::size_t open = text.find('{'); open != std::string_view::npos;
       open = text.find('{', open + 1)) {
    auto close = match_object(text, open);
    if (close == std::string_view::npos) continue;
    auto span = text.substr(open, close - open + 1);
    if (parse_object(span)) return std::string(span);
  }
  return std::nullopt;
}

RewardScores parse_reward_json(std::string_view text) {
  Json j = locate_json(text);
  RewardScores out;
  for (std::size_t k = 0; k < RewardScores::kCriteria.size(); ++k) {
    std::string key(RewardScores::kCriteria[k]);
    if (!j.contains(key)) fail(ErrorCode::kMissingKey, "reward JSON missing '" + key + "'");
    const Json& entry = j[key];
    const Json* score = &entry;
    if (entry.is_object()) {
      if (!entry.contains("score"))
        fail(ErrorCode::kMissingKey, "reward JSON '" + key + "' has no score");
      score = &entry["score"];
      if (entry.contains("explanation") && entry["explanation"].is_string())
        out.explanations[k] = entry["explanation"].get<std::string>();
    }
    if (!score->is_number()) parse_fail("reward score for '" + key + "' is not a number");
    double v = score->get<double>();
    if (v < 0.0 || v > 10.0)
      fail(ErrorCode::kRange, "reward score for '" + key + "' outside 0-10");
    if (v != std::floor(v)) parse_fail("reward score for '" + key + "' is not a whole number");
    out.scores[k] = static_cast<int>(v);
  }
  return out;
}

PairwiseScores parse_pairwise_json(std::string_view text) {
  Json root = locate_json(text);
  const Json& ev = root.contains("evaluation") && root["evaluation"].is_object()
                       ? root["evaluation"]
                       : root;
  auto score_of = [&](const char* key) {
    if (!ev.contains(key)) fail(ErrorCode::kMissingKey, std::string("pairwise JSON missing '") + key + "'");
    const Json& e = ev[key];
    const Json* s = &e;
    if (e.is_object()) {
      if (!e.contains("score"))
        fail(ErrorCode::kMissingKey, std::string("pairwise '") + key + "' has no score");
      s = &e["score"];
    }
    if (!s->is_number()) parse_fail(std::string("pairwise score for '") + key + "' is not a number");
    double v = s->get<double>();
    if (v < 0.0 || v > 10.0)
      fail(ErrorCode::kRange, std::string("pairwise score for '") + key + "' outside 0-10");
    return v;
  };
  PairwiseScores out;
  out.score_a = score_of("answer_a");
  out.score_b = score_of("answer_b");
  if (ev.contains("summary") && ev["summary"].is_string())
    out.summary = ev["summary"].get<std::string>();
  return out;
}

// ---- numbers in prose ------------------------------------------------------

namespace {

const std::regex& number_regex() {
  static const std::regex re(
      R"((?:^|[^\w.])([-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?:[eE][-+]?\d+)?|[-+]?\.\d+(?:[eE][-+]?\d+)?))");
  return re;
}

std::optional<double> to_number(std::string token) {
  token.erase(std::remove(token.begin(), token.end(), ','), token.end());
  return parse_double(token);
}

// All numbers in `s`, in order. A "x 10^k" suffix scales the preceding number.
std::vector<double> numbers_in(std::string_view s) {
  std::vector<double> out;
  std::string str(s);
  static const std::regex pow10(R"(^\s*(?:x|×|\*|\\times)\s*10\s*\^\s*\{?([-+]?\d+)\}?)");
  for (auto it = std::sregex_iterator(str.begin(), str.end(), number_regex());
       it != std::sregex_iterator(); ++it) {
    auto v = to_number((*it)[1].str());
    if (!v) continue;
    std::smatch m;
    std::string rest((*it)[1].second, str.cend());
    if (std::regex_search(rest, m, pow10)) *v *= std::pow(10.0, std::stod(m[1].str()));
    out.push_back(*v);
  }
  return out;
}

std::string unwrap_answer(std::string_view s) {
  std::string t(trim(s));
  for (std::string_view wrapper : {"\\boxed{", "\\box{"}) {
    auto pos = t.find(wrapper);
    if (pos != std::string::npos) {
      auto close = t.find('}', pos);
      if (close != std::string::npos)
        t = t.substr(pos + wrapper.size(), close - pos - wrapper.size()) + t.substr(close + 1);
    }
  }
  std::string out;
  for (char c : t)
    if (c != '*' && c != '$' && c != '`') out.push_back(c);
  t = std::string(trim(out));
  while (!t.empty() && (t.back() == '.' || t.back() == ';')) t.pop_back();
  if (!t.empty() && t.front() == '=') t.erase(0, 1);
  return std::string(trim(t));
}

}  // namespace

double parse_single_number(std::string_view text) {
  std::string t = unwrap_answer(text);
  static const std::regex lead(
      R"(^([-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d*)?(?:[eE][-+]?\d+)?|[-+]?\.\d+(?:[eE][-+]?\d+)?)(?:\s*(?:x|×|\*|\\times)\s*10\s*\^\s*\{?([-+]?\d+)\}?)?(.*)$)");
  std::smatch m;
  if (!std::regex_match(t, m, lead)) parse_fail("not a single numeric value: '" + t + "'");
  auto v = to_number(m[1].str());
  if (!v) parse_fail("not a single numeric value: '" + t + "'");
  if (m[2].matched) *v *= std::pow(10.0, std::stod(m[2].str()));
  std::string rest(trim(m[3].str()));
  // A trailing unit is fine; a second number or a glued digit is not.
  static const std::regex second_number(R"((^|[\s,;(])[-+]?\.?\d)");
  if (!rest.empty() && (std::isdigit(static_cast<unsigned char>(rest.front())) ||
                        std::regex_search(rest, second_number)))
    parse_fail("more than one numeric value: '" + t + "'");
  if (!std::isfinite(*v)) parse_fail("numeric value is not finite");
  return *v;
}

std::optional<double> extract_final_answer(std::string_view text) {
  auto lines = split_lines(text);
  for (std::size_t i = lines.size(); i-- > 0;) {
    auto pos = find_ci(lines[i], "final answer");
    if (pos == std::string::npos) continue;
    std::string tail = lines[i].substr(pos + 12);
    for (std::size_t j = i + 1; j < lines.size() && trim(strip_emphasis(tail)).size() <= 1; ++j)
      tail += " " + lines[j];
    auto nums = numbers_in(unwrap_answer(tail));
    if (!nums.empty()) return nums.front();
  }
  for (std::size_t pos = text.rfind("\\boxed{"); pos != std::string_view::npos;) {
    auto close = text.find('}', pos);
    if (close == std::string_view::npos) break;
    auto nums = numbers_in(text.substr(pos + 7, close - pos - 7));
    if (!nums.empty()) return nums.front();
    break;
  }
  auto nums = numbers_in(text);
  if (nums.empty()) return std::nullopt;
  return nums.back();
}

// ---- labelled sections -----------------------------------------------------

namespace {

struct Section {
  std::size_t line = 0;
  std::string first;  // remainder of the label line after the colon
};

// Finds a line that starts (after markdown markers) with `label`, optionally
// followed by a colon. Returns the first match.
std::optional<Section> find_label(const std::vector<std::string>& lines,
                                  std::string_view label, std::size_t from = 0) {
  for (std::size_t i = from; i < lines.size(); ++i) {
    auto body = strip_line_markers(lines[i]);
    if (!starts_with_ci(body, label)) continue;
    auto rest = body.substr(label.size());
    std::size_t k = 0;
    while (k < rest.size() && (rest[k] == '*' || rest[k] == ' ' || rest[k] == '_')) ++k;
    rest.remove_prefix(k);
    if (!rest.empty() && rest.front() != ':' && rest.front() != '-' &&
        rest.substr(0, 3) != "\xE2\x80\x94")
      continue;
    if (!rest.empty() && rest.front() == ':') rest.remove_prefix(1);
    return Section{i, strip_emphasis(rest)};
  }
  return std::nullopt;
}

std::string section_text(const std::vector<std::string>& lines, const Section& s,
                         std::size_t end_line) {
  std::string out = s.first;
  for (std::size_t i = s.line + 1; i < end_line && i < lines.size(); ++i) {
    if (!out.empty()) out += '\n';
    out += lines[i];
  }
  return std::string(trim(out));
}

}  // namespace

GeneratedProblem parse_generated_problem(std::string_view text) {
  auto lines = split_lines(text);
  static constexpr std::string_view kLabels[] = {"Problem Statement", "Solution Steps",
                                                 "Final Answer"};
  std::optional<Section> found[3];
  for (int i = 0; i < 3; ++i) {
    found[i] = find_label(lines, kLabels[i]);
    if (!found[i])
      fail(ErrorCode::kMissingKey, "generated problem missing '" + std::string(kLabels[i]) + "'");
  }
  auto end_of = [&](int i) {
    std::size_t end = lines.size();
    for (int j = 0; j < 3; ++j)
      if (j != i && found[j]->line > found[i]->line) end = std::min(end, found[j]->line);
    return end;
  };
  GeneratedProblem g;
  g.statement = section_text(lines, *found[0], end_of(0));
  g.solution_steps = section_text(lines, *found[1], end_of(1));
  std::string answer = section_text(lines, *found[2], end_of(2));
  if (g.statement.empty()) parse_fail("empty problem statement");
  if (g.solution_steps.empty()) parse_fail("empty solution steps");
  std::string first_line;
  for (const auto& l : split_lines(answer)) {
    if (!trim(l).empty()) {
      first_line = l;
      break;
    }
  }
  g.final_answer = parse_single_number(first_line);
  return g;
}

KnowledgeList parse_knowledge(std::string_view text) {
  // Several lists may be concatenated (an integrator echoing its inputs), so
  // knowledge points are gathered from every knowledge section and skill
  // fields from the first skills section that provides them.
  auto lines = split_lines(text);
  if (!find_label(lines, "Core Knowledge Points Assessed"))
    fail(ErrorCode::kMissingKey, "missing 'Core Knowledge Points Assessed' section");
  if (!find_label(lines, "Problem-Solving Skills"))
    fail(ErrorCode::kMissingKey, "missing 'Problem-Solving Skills' section");

  static const std::regex point_re(R"(^knowledge point\s*\d*\s*[:.\-]?\s*(.*)$)",
                                   std::regex::icase);
  enum class In { kNone, kPoints, kSkills } in = In::kNone;
  KnowledgeList out;
  auto set_once = [](std::string& field, const std::optional<Section>& s) {
    if (s && field.empty()) field = s->first;
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::vector<std::string> one{lines[i]};
    if (find_label(one, "Core Knowledge Points Assessed")) {
      in = In::kPoints;
      continue;
    }
    if (find_label(one, "Problem-Solving Skills")) {
      in = In::kSkills;
      continue;
    }
    if (in == In::kPoints) {
      std::string body = strip_emphasis(strip_line_markers(lines[i]));
      std::smatch m;
      if (!std::regex_match(body, m, point_re)) continue;
      std::string rest = m[1].str();
      KnowledgePoint p;
      auto rel = find_ci(rest, "relevance:");
      if (rel == std::string::npos) {
        p.description = std::string(trim(rest));
      } else {
        p.description = std::string(trim(rest.substr(0, rel)));
        p.relevance = std::string(trim(rest.substr(rel + 10)));
      }
      while (!p.description.empty() && p.description.back() == '.') p.description.pop_back();
      if (!p.description.empty()) out.points.push_back(std::move(p));
    } else if (in == In::kSkills) {
      set_once(out.skills.strategy, find_label(one, "Strategy"));
      auto decomp = find_label(one, "Decomposing Complex Problems");
      if (!decomp) decomp = find_label(one, "Decomposing");
      set_once(out.skills.decomposition, decomp);
      auto formula = find_label(one, "Formula Application & Mathematical Tools");
      if (!formula) formula = find_label(one, "Formula Application");
      set_once(out.skills.formula_applications, formula);
    }
  }
  if (out.points.empty()) parse_fail("no knowledge points found");
  return out;
}

StyleRules parse_style_guide(std::string_view text) {
  auto lines = split_lines(text);
  auto lang = find_label(lines, "Language, Tone, and Level of Detail");
  auto structure = find_label(lines, "Answer Structure and Organization");
  if (!lang) fail(ErrorCode::kMissingKey, "style guide missing the language/tone/detail section");
  if (!structure) fail(ErrorCode::kMissingKey, "style guide missing the structure section");

  auto rules_between = [&](std::size_t begin, std::size_t end) {
    std::vector<std::string> rules;
    for (std::size_t i = begin + 1; i < end && i < lines.size(); ++i) {
      std::string_view raw = trim(lines[i]);
      if (raw.empty()) continue;
      bool bullet = raw.front() == '-' || raw.front() == '*' || raw.front() == '+' ||
                    std::isdigit(static_cast<unsigned char>(raw.front()));
      if (!bullet || raw.front() == '#') continue;
      std::string_view body = raw;
      while (!body.empty() && (std::isdigit(static_cast<unsigned char>(body.front())) ||
                               body.front() == '.' || body.front() == ')'))
        body.remove_prefix(1);
      std::string rule = strip_emphasis(strip_line_markers(body));
      if (!rule.empty()) rules.push_back(std::move(rule));
    }
    return rules;
  };
  StyleRules out;
  std::size_t lang_end = structure->line > lang->line ? structure->line : lines.size();
  std::size_t struct_end = lang->line > structure->line ? lang->line : lines.size();
  out.language_tone_detail = rules_between(lang->line, lang_end);
  out.structure = rules_between(structure->line, struct_end);
  if (out.language_tone_detail.empty())
    parse_fail("style guide language/tone/detail section has no rules");
  if (out.structure.empty()) parse_fail("style guide structure section has no rules");
  return out;
}

std::string format_knowledge(const KnowledgeList& k) {
  std::string out = "- Core Knowledge Points Assessed\n";
  for (std::size_t i = 0; i < k.points.size(); ++i) {
    out += "  - **Knowledge Point " + std::to_string(i + 1) + ":** " + k.points[i].description +
           ".";
    if (!k.points[i].relevance.empty()) out += " Relevance: " + k.points[i].relevance;
    out += "\n";
  }
  out += "- Problem-Solving Skills\n";
  out += "  - **Strategy:** " + k.skills.strategy + "\n";
  out += "  - **Decomposing Complex Problems:** " + k.skills.decomposition + "\n";
  out += "  - **Formula Application & Mathematical Tools:** " + k.skills.formula_applications;
  return out;
}

std::string format_rules(const std::vector<std::string>& rules) {
  std::string out;
  for (const auto& r : rules) {
    if (!out.empty()) out += '\n';
    out += "- " + r;
  }
  return out;
}

}  // namespace dtaforge::prompt
