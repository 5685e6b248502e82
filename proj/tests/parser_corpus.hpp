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

// A 200-case corpus for the four model-output parsers. Every case is built
// from a known ground truth (the scores or fields that were rendered), so the
// expected outcome never comes from the parser under test. Cases cover prose
// wrapping, code fences, reordered keys and sections, decoy braces, trailing
// commas and out-of-range values.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dtaforge/error.hpp"

namespace corpus {

enum class Parser { kBoxed, kReward, kPairwise, kProblem };

struct Case {
  Parser parser;
  std::string label;
  std::string text;
  std::optional<dtaforge::ErrorCode> error;  // expected typed failure
  std::vector<double> values;                // expected values on success
  bool has_json = false;                     // JSON cases: a parseable object is present
};

namespace detail {

inline const char* kProse[] = {
    "Sure, here is my assessment.",
    "After reviewing the response carefully:",
    "I considered each criterion {as requested} and found the following.",
    "Note: braces like {this} in prose are not JSON.",
    "Here you go!",
};

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string wrap(const std::string& body, std::mt19937_64& rng) {
  switch (rng() % 4) {
    case 0: return body;
    case 1: return std::string(kProse[rng() % 5]) + "\n" + body + "\nLet me know if anything is unclear.";
    case 2: return std::string(kProse[rng() % 5]) + "\n```json\n" + body + "\n```\n";
    default: return "{not json at all}\n" + body + "\n";
  }
}

inline const std::array<const char*, 4> kCriteria = {"correctness", "completeness", "clarity",
                                                     "conciseness"};

}  // namespace detail

inline std::vector<Case> build() {
  using dtaforge::ErrorCode;
  using namespace detail;
  std::mt19937_64 rng(0xC0FFEE);
  std::vector<Case> out;

  // ---- boxed scores (50) ----
  for (int i = 0; i < 50; ++i) {
    Case c{Parser::kBoxed, "boxed-" + std::to_string(i), "", std::nullopt, {}, false};
    double v = static_cast<double>(rng() % 101) / 100.0;
    std::string prose = kProse[rng() % 5];
    switch (i % 10) {
      case 0: c.text = prose + "\n\\box{" + fmt(v) + "}"; c.values = {v}; break;
      case 1: c.text = "Score: \\boxed{" + fmt(v) + "} overall."; c.values = {v}; break;
      case 2: c.text = "\\box{ " + fmt(v) + " }\n"; c.values = {v}; break;
      case 3: c.text = "First guess \\box{0.10}, revised: \\box{" + fmt(v) + "}"; c.values = {v}; break;
      case 4: c.text = prose + " \\box{" + fmt(1.0 + v + 0.01) + "}"; c.error = ErrorCode::kRange; break;
      case 5: c.text = "\\box{-" + fmt(v + 0.01) + "}"; c.error = ErrorCode::kRange; break;
      case 6: c.text = "\\box{high}"; c.error = ErrorCode::kParse; break;
      case 7: c.text = prose + " no score given"; c.error = ErrorCode::kParse; break;
      case 8: c.text = "\\box{" + fmt(v); c.error = ErrorCode::kParse; break;
      default: c.text = "Final: \\box{" + fmt(v) + "}\n(as instructed)"; c.values = {v}; break;
    }
    out.push_back(std::move(c));
  }

  // ---- reward JSON (50) ----
  for (int i = 0; i < 50; ++i) {
    Case c{Parser::kReward, "reward-" + std::to_string(i), "", std::nullopt, {}, true};
    std::array<int, 4> s{};
    for (auto& x : s) x = static_cast<int>(rng() % 11);
    std::array<std::size_t, 4> order = {0, 1, 2, 3};
    if (i % 3 == 1) std::shuffle(order.begin(), order.end(), rng);
    bool nested = i % 2 == 0;
    int mode = i % 10;
    std::string body = "{";
    for (std::size_t n = 0; n < 4; ++n) {
      std::size_t k = order[n];
      if (mode == 6 && k == 2) continue;  // missing key
      std::string score = std::to_string(s[k]);
      if (mode == 4 && k == 0) score = "11";
      if (mode == 5 && k == 3) score = "-1";
      if (mode == 7 && k == 1) score = "7.5";
      if (mode == 8 && k == 1) score = "\"seven\"";
      body += std::string(n ? ", " : "") + "\"" + kCriteria[k] + "\": ";
      if (nested)
        body += "{\"score\": " + score + ", \"explanation\": \"uses {braces} and \\\"quotes\\\"\"}";
      else
        body += score;
    }
    if (mode == 3) body += ",";  // trailing comma
    body += "}";
    c.text = wrap(body, rng);
    switch (mode) {
      case 4:
      case 5: c.error = ErrorCode::kRange; break;
      case 6: c.error = ErrorCode::kMissingKey; break;
      case 7:
      case 8: c.error = ErrorCode::kParse; break;
      case 9:
        c.text = "The answer deserves " + std::to_string(s[0]) + "/10 for correctness.";
        c.error = ErrorCode::kParse;
        c.has_json = false;
        break;
      default: c.values = {double(s[0]), double(s[1]), double(s[2]), double(s[3])};
    }
    out.push_back(std::move(c));
  }

  // ---- pairwise JSON (50) ----
  for (int i = 0; i < 50; ++i) {
    Case c{Parser::kPairwise, "pairwise-" + std::to_string(i), "", std::nullopt, {}, true};
    double a = static_cast<double>(rng() % 21) / 2.0, b = static_cast<double>(rng() % 21) / 2.0;
    int mode = i % 10;
    std::string sa = fmt(a), sb = fmt(b);
    if (mode == 4) sa = "10.5";
    if (mode == 5) sb = "-2";
    auto entry = [&](const std::string& v, bool nested) {
      return nested ? "{\"score\": " + v + ", \"reason\": \"ok}\"}" : v;
    };
    bool nested = i % 2 == 0;
    std::string fa = "\"answer_a\": " + entry(sa, nested);
    std::string fb = "\"answer_b\": " + entry(sb, nested);
    if (mode == 6) fb = "\"answer_c\": " + entry(sb, nested);
    std::string fields = i % 3 == 1 ? fb + ", " + fa : fa + ", " + fb;
    fields += ", \"summary\": \"A and {B} compared\"";
    std::string body = i % 4 < 2 ? "{\"evaluation\": {" + fields + "}}" : "{" + fields + "}";
    if (mode == 7) body = "{\"evaluation\": {" + fields + "},}";
    c.text = wrap(body, rng);
    switch (mode) {
      case 4:
      case 5: c.error = ErrorCode::kRange; break;
      case 6: c.error = ErrorCode::kMissingKey; break;
      case 8:
        c.text = "Answer A is better, 8 vs 6.";
        c.error = ErrorCode::kParse;
        c.has_json = false;
        break;
      case 9:
        c.text = "{\"evaluation\": {\"answer_a\": 3, \"answer_b\": 4";  // truncated
        c.error = ErrorCode::kParse;
        c.has_json = false;
        break;
      default: c.values = {std::stod(sa), std::stod(sb)};
    }
    out.push_back(std::move(c));
  }

  // ---- generated problems (50) ----
  for (int i = 0; i < 50; ++i) {
    Case c{Parser::kProblem, "problem-" + std::to_string(i), "", std::nullopt, {}, false};
    double ans = static_cast<double>(rng() % 100000) / 100.0 + 0.01;
    std::string stmt = "A link has " + std::to_string(rng() % 50 + 1) + " km of fibre. Find the loss.";
    std::string steps = "1. Multiply the length by the attenuation.\n2. Add the splice losses.";
    std::string sec_p = "Problem Statement: " + stmt;
    std::string sec_s = "Solution Steps:\n" + steps;
    std::string sec_a = "Final Answer: " + fmt(ans);
    int mode = i % 10;
    if (mode == 1) {
      sec_p = "**Problem Statement:** " + stmt;
      sec_s = "**Solution Steps:**\n" + steps;
      sec_a = "**Final Answer:** " + fmt(ans) + " dB";
    }
    if (mode == 2) {
      sec_p = "- Problem Statement: " + stmt;
      sec_s = "- Solution Steps:\n" + steps;
      sec_a = "- Final Answer: \\boxed{" + fmt(ans) + "}";
    }
    if (mode == 3) sec_a = "### Final Answer\n" + fmt(ans);
    if (mode == 4) sec_a = "Final Answer: about forty";
    if (mode == 5) sec_a = "Final Answer: " + fmt(ans) + " or " + fmt(ans + 1);
    if (mode == 6) sec_s = "";
    if (mode == 7) sec_p = "Problem Statement:";
    std::vector<std::string> secs = {sec_p, sec_s, sec_a};
    if (i % 3 == 1) std::swap(secs[0], secs[2]);
    if (i % 3 == 2) std::swap(secs[1], secs[2]);
    std::string text = mode == 8 ? "Here is a new problem.\n\n" : "";
    for (const auto& s : secs)
      if (!s.empty()) text += s + "\n\n";
    c.text = text;
    switch (mode) {
      case 4:
      case 5: c.error = ErrorCode::kParse; break;
      case 6: c.error = ErrorCode::kMissingKey; break;
      case 7: c.error = ErrorCode::kParse; break;
      default: c.values = {std::stod(fmt(ans))};
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace corpus
