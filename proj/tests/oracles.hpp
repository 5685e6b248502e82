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

// Reference implementations used by the unit and acceptance tests. Each one is
// written from the definition, without calling the library routine it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dtaforge/formula.hpp"
#include "json.hpp"

namespace oracle {

// |A ∩ B| / |A ∪ B| on deduplicated sets.
inline double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& s : sa) inter += sb.count(s);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

// Collision probability of a pair with similarity j under b bands of r rows.
inline double banding(double j, int b, int r) {
  double band_all_equal = 1.0;
  for (int i = 0; i < r; ++i) band_all_equal *= j;
  double no_band = 1.0;
  for (int i = 0; i < b; ++i) no_band *= (1.0 - band_all_equal);
  return 1.0 - no_band;
}

// Two shingle sets with exactly `inter` shared items out of `uni` in total.
struct SetPair {
  std::vector<std::string> a, b;
  double jaccard = 0.0;
};

inline SetPair make_pair_with(std::size_t uni, std::size_t inter, std::mt19937_64& rng,
                              std::uint64_t tag) {
  SetPair p;
  std::size_t rest = uni - inter;
  std::size_t only_a = rest / 2 + (rest % 2 ? (rng() & 1) : 0);
  std::size_t only_b = rest - only_a;
  auto item = [&](const char* kind, std::size_t i) {
    return std::string(kind) + "-" + std::to_string(tag) + "-" + std::to_string(i) + "-" +
           std::to_string(rng() % 1000003);
  };
  for (std::size_t i = 0; i < inter; ++i) {
    auto s = item("s", i);
    p.a.push_back(s);
    p.b.push_back(s);
  }
  for (std::size_t i = 0; i < only_a; ++i) p.a.push_back(item("a", i));
  for (std::size_t i = 0; i < only_b; ++i) p.b.push_back(item("b", i));
  std::shuffle(p.a.begin(), p.a.end(), rng);
  std::shuffle(p.b.begin(), p.b.end(), rng);
  p.jaccard = static_cast<double>(inter) / static_cast<double>(uni);
  return p;
}

// Population z-scores: zero vector when the values have no spread.
inline std::vector<double> zs(const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  if (v.size() < 2) return out;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  if (var <= 0.0) return out;
  double sd = std::sqrt(var);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
  return out;
}

// Winner of the fused score; ties go to the earlier entry in `priority`
// (teacher rank of each candidate given in `rank`).
inline std::size_t fused_winner(const std::vector<double>& r_student,
                                const std::vector<double>& r_reward,
                                const std::vector<std::size_t>& rank) {
  auto a = zs(r_student), b = zs(r_reward);
  std::size_t best = 0;
  for (std::size_t i = 1; i < a.size(); ++i) {
    double ti = a[i] + b[i], tb = a[best] + b[best];
    bool tie = std::fabs(ti - tb) <= 1e-9;
    if ((!tie && ti > tb) || (tie && rank[i] < rank[best])) best = i;
  }
  return best;
}

// ---- JSON span location by bracket matching ------------------------------

// First balanced {...} span (string-aware) that parses as a JSON object once
// trailing commas are removed.
inline std::optional<std::string> first_json_object(const std::string& text) {
  for (std::size_t open = 0; open < text.size(); ++open) {
    if (text[open] != '{') continue;
    std::vector<char> stack;
    bool str = false, esc = false;
    std::size_t close = std::string::npos;
    for (std::size_t i = open; i < text.size(); ++i) {
      char c = text[i];
      if (str) {
        if (esc) esc = false;
        else if (c == '\\') esc = true;
        else if (c == '"') str = false;
        continue;
      }
      if (c == '"') str = true;
      else if (c == '{' || c == '[') stack.push_back(c);
      else if (c == '}' || c == ']') {
        if (stack.empty()) break;
        stack.pop_back();
        if (stack.empty()) {
          close = i;
          break;
        }
      }
    }
    if (close == std::string::npos) continue;
    std::string span = text.substr(open, close - open + 1);
    std::string cleaned;
    bool s2 = false, e2 = false;
    for (std::size_t i = 0; i < span.size(); ++i) {
      char c = span[i];
      if (s2) {
        cleaned += c;
        if (e2) e2 = false;
        else if (c == '\\') e2 = true;
        else if (c == '"') s2 = false;
        continue;
      }
      if (c == '"') s2 = true;
      if (c == ',') {
        std::size_t j = i + 1;
        while (j < span.size() && std::isspace(static_cast<unsigned char>(span[j]))) ++j;
        if (j < span.size() && (span[j] == '}' || span[j] == ']')) continue;
      }
      cleaned += c;
    }
    auto j = nlohmann::json::parse(cleaned, nullptr, false);
    if (!j.is_discarded() && j.is_object()) return span;
  }
  return std::nullopt;
}

// ---- random expression trees ---------------------------------------------

using dtaforge::formula::Expr;

inline Expr random_expr(std::mt19937_64& rng, int depth) {
  using K = Expr::Kind;
  static const char* vars[] = {"a", "b", "c", "d", "x", "y"};
  static const char* fns[] = {"log10", "log", "sqrt", "exp", "log2"};
  std::uniform_int_distribution<int> pick(0, 9);
  int p = depth <= 0 ? pick(rng) % 2 : pick(rng);
  if (p == 0) return Expr::number(static_cast<double>(1 + rng() % 40) / 4.0);
  if (p == 1) return Expr::var(vars[rng() % 6]);
  if (p <= 5) {
    K k = p <= 3 ? K::kAdd : K::kMul;
    std::size_t n = 2 + rng() % 3;
    std::vector<Expr> kids;
    for (std::size_t i = 0; i < n; ++i) kids.push_back(random_expr(rng, depth - 1));
    return Expr::node(k, std::move(kids));
  }
  if (p == 6) return Expr::node(K::kMul, {random_expr(rng, depth - 1), random_expr(rng, depth - 1)});
  if (p == 7) return Expr::node(K::kDiv, {random_expr(rng, depth - 1), random_expr(rng, depth - 1)});
  if (p == 8)
    return Expr::node(K::kPow, {random_expr(rng, depth - 1),
                                Expr::number(static_cast<double>(1 + rng() % 3))});
  return Expr::call(fns[rng() % 5], random_expr(rng, depth - 1));
}

// Reorders the operands of every sum and product, recursively.
inline Expr shuffle_commutative(const Expr& e, std::mt19937_64& rng) {
  Expr out = e;
  for (auto& k : out.kids) k = shuffle_commutative(k, rng);
  if (out.kind == Expr::Kind::kAdd || out.kind == Expr::Kind::kMul)
    std::shuffle(out.kids.begin(), out.kids.end(), rng);
  return out;
}

// ---- derived efficiency metrics ------------------------------------------

struct Derived {
  double tokens, edp, energy_sample, time_correct, energy_correct;
};

inline Derived derive(double j_per_token, double latency, double throughput, double pass1) {
  double tokens = throughput * latency;
  double energy = j_per_token * tokens;
  return {tokens, j_per_token * latency, energy, latency / pass1, energy / pass1};
}

// ---- misc -----------------------------------------------------------------

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng{std::random_device{}()};
    path = std::filesystem::temp_directory_path() /
           ("dtaforge-" + tag + "-" + std::to_string(rng() % 100000000));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace oracle
