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

// Small symbolic layer for the formulas that appear in problem statements:
// parsing (infix and the prefix form this module emits), canonical ordering
// with constant folding, evaluation, and template slot abstraction.

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dtaforge::formula {

struct Expr {
  enum class Kind { kNum, kVar, kAdd, kMul, kDiv, kPow, kCall };

  Kind kind = Kind::kNum;
  double num = 0.0;
  std::string name;  // variable or function name
  std::vector<Expr> kids;

  static Expr number(double v);
  static Expr var(std::string name);
  static Expr node(Kind k, std::vector<Expr> kids);
  static Expr call(std::string fn, Expr arg);

  bool operator==(const Expr&) const = default;
};

// Accepts infix ("2*x + log10(y)") and prefix ("(+ (* 2 x) (log10 y))").
// Subtraction and unary minus become multiplication by -1. Function names:
// log (natural; "ln" is an alias), log10, log2, exp, sqrt. Throws kParse.
Expr parse(std::string_view text);

// Flattens + and *, folds constants, drops additive zeros and unit factors,
// and sorts commutative operands by their prefix rendering.
Expr canonicalize(const Expr& e);

std::string to_prefix(const Expr& e);

// to_prefix(canonicalize(parse(text))).
std::string canonical_string(std::string_view text);

// Throws kRange on a domain violation (log of a non-positive value, division
// by zero, negative sqrt, non-finite result) and kMissingKey for an unbound
// variable.
double evaluate(const Expr& e, const std::map<std::string, double>& vars);

std::set<std::string> variables(const Expr& e);

// Distinct variables in pre-order, i.e. source order for a freshly parsed
// infix expression.
std::vector<std::string> variables_in_order(const Expr& e);

Expr rename_variables(const Expr& e, const std::map<std::string, std::string>& names);

// Removes decimal unit-scaling factors (10^(3k) in products and quotients),
// decibel offsets (+-30, +-60, +-90 in sums) and the dB <-> linear wrappers
// 10*log10(x) and 10^(x/10). Expects a canonical expression.
Expr strip_unit_conversions(const Expr& e);

struct Range {
  double lo = 0.1;
  double hi = 100.0;
};

struct EquivalenceOptions {
  int samples_per_variable = 20;
  double rel_tol = 1e-3;
  double floor = 1e-9;
  Range default_range;
  std::map<std::string, Range> ranges;
  std::uint64_t seed = 0;
  // Rejected draws allowed per accepted sample before giving up.
  int max_redraws_per_sample = 10;
};

struct EquivalenceResult {
  bool equivalent = false;
  double max_rel_err = 0.0;
  int samples = 0;
  int rejected = 0;
};

// max over samples of |f1 - f2| / max(|f1|, floor) <= rel_tol. Draws that
// fall outside either formula's domain are redrawn; exhausting the redraw
// budget yields equivalent = false. Throws kPrecondition when the variable
// sets differ.
EquivalenceResult numeric_equivalence(const Expr& f1, const Expr& f2,
                                      const EquivalenceOptions& opts);

}  // namespace dtaforge::formula
