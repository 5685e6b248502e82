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

#include "dtaforge/formula.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

#include "dtaforge/error.hpp"
#include "dtaforge/util.hpp"

namespace dtaforge::formula {

using Kind = Expr::Kind;

Expr Expr::number(double v) {
  Expr e;
  e.kind = Kind::kNum;
  e.num = v == 0.0 ? 0.0 : v;
  return e;
}

Expr Expr::var(std::string name) {
  Expr e;
  e.kind = Kind::kVar;
  e.name = std::move(name);
  return e;
}

Expr Expr::node(Kind k, std::vector<Expr> kids) {
  Expr e;
  e.kind = k;
  e.kids = std::move(kids);
  return e;
}

Expr Expr::call(std::string fn, Expr arg) {
  Expr e;
  e.kind = Kind::kCall;
  e.name = std::move(fn);
  e.kids.push_back(std::move(arg));
  return e;
}

namespace {

bool is_function(std::string_view name) {
  return name == "log" || name == "ln" || name == "log10" || name == "log2" || name == "exp" ||
         name == "sqrt";
}

std::string canonical_function(std::string_view name) {
  return name == "ln" ? "log" : std::string(name);
}

Expr negate(Expr e) { return Expr::node(Kind::kMul, {Expr::number(-1.0), std::move(e)}); }

// ---- tokenizer -------------------------------------------------------------

struct Token {
  enum class Type { kNum, kIdent, kSym, kEnd };
  Type type = Type::kEnd;
  std::string text;
  double value = 0.0;
  std::size_t pos = 0;
};

class Lexer {
 public:
  Lexer(std::string_view s, bool prefix) : s_(s), prefix_(prefix) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
      Token t;
      t.pos = i_;
      if (i_ >= s_.size()) {
        out.push_back(t);
        return out;
      }
      char c = s_[i_];
      bool signed_num = prefix_ && c == '-' && i_ + 1 < s_.size() &&
                        (std::isdigit(static_cast<unsigned char>(s_[i_ + 1])) || s_[i_ + 1] == '.');
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || signed_num) {
        out.push_back(number());
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = i_;
        while (i_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_'))
          ++i_;
        t.type = Token::Type::kIdent;
        t.text = std::string(s_.substr(start, i_ - start));
        out.push_back(t);
      } else if (c == '*' && i_ + 1 < s_.size() && s_[i_ + 1] == '*') {
        t.type = Token::Type::kSym;
        t.text = "^";
        i_ += 2;
        out.push_back(t);
      } else if (std::string_view("+-*/^(),").find(c) != std::string_view::npos) {
        t.type = Token::Type::kSym;
        t.text = std::string(1, c);
        ++i_;
        out.push_back(t);
      } else {
        fail(ErrorCode::kParse, "formula: unexpected character '" + std::string(1, c) +
                                    "' at offset " + std::to_string(i_));
      }
    }
  }

 private:
  Token number() {
    Token t;
    t.pos = i_;
    std::size_t start = i_;
    if (s_[i_] == '-') ++i_;
    while (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.'))
      ++i_;
    if (i_ < s_.size() && (s_[i_] == 'e' || s_[i_] == 'E')) {
      std::size_t j = i_ + 1;
      if (j < s_.size() && (s_[j] == '+' || s_[j] == '-')) ++j;
      if (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) {
        i_ = j;
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
      }
    }
    t.text = std::string(s_.substr(start, i_ - start));
    auto v = parse_double(t.text);
    if (!v) fail(ErrorCode::kParse, "formula: bad number '" + t.text + "'");
    t.type = Token::Type::kNum;
    t.value = *v;
    return t;
  }

  std::string_view s_;
  bool prefix_;
  std::size_t i_ = 0;
};

// ---- parsers ---------------------------------------------------------------

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Expr infix() {
    Expr e = sum();
    expect_end();
    return e;
  }

  Expr prefix() {
    Expr e = sexpr();
    expect_end();
    return e;
  }

 private:
  const Token& peek() const { return toks_[i_]; }
  Token take() { return toks_[i_++]; }
  bool at_sym(std::string_view s) const {
    return peek().type == Token::Type::kSym && peek().text == s;
  }
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::kParse, "formula: " + what + " at offset " + std::to_string(peek().pos));
  }
  void expect_sym(std::string_view s) {
    if (!at_sym(s)) error("expected '" + std::string(s) + "'");
    ++i_;
  }
  void expect_end() const {
    if (peek().type != Token::Type::kEnd) error("unexpected trailing input '" + peek().text + "'");
  }

  Expr sum() {
    std::vector<Expr> terms;
    terms.push_back(product());
    while (at_sym("+") || at_sym("-")) {
      bool minus = take().text == "-";
      Expr t = product();
      terms.push_back(minus ? negate(std::move(t)) : std::move(t));
    }
    return terms.size() == 1 ? std::move(terms[0]) : Expr::node(Kind::kAdd, std::move(terms));
  }

  Expr product() {
    Expr lhs = unary();
    while (at_sym("*") || at_sym("/")) {
      bool div = take().text == "/";
      Expr rhs = unary();
      lhs = div ? Expr::node(Kind::kDiv, {std::move(lhs), std::move(rhs)})
                : Expr::node(Kind::kMul, {std::move(lhs), std::move(rhs)});
    }
    return lhs;
  }

  Expr unary() {
    if (at_sym("-")) {
      ++i_;
      return negate(unary());
    }
    if (at_sym("+")) {
      ++i_;
      return unary();
    }
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (at_sym("^")) {
      ++i_;
      return Expr::node(Kind::kPow, {std::move(base), unary()});
    }
    return base;
  }

  Expr primary() {
    const Token& t = peek();
    if (t.type == Token::Type::kNum) return Expr::number(take().value);
    if (t.type == Token::Type::kIdent) {
      std::string name = take().text;
      if (at_sym("(")) {
        if (!is_function(name)) error("unknown function '" + name + "'");
        ++i_;
        Expr arg = sum();
        expect_sym(")");
        return Expr::call(canonical_function(name), std::move(arg));
      }
      if (is_function(name)) error("function '" + name + "' needs an argument");
      return Expr::var(std::move(name));
    }
    if (at_sym("(")) {
      ++i_;
      Expr e = sum();
      expect_sym(")");
      return e;
    }
    if (t.type == Token::Type::kEnd) error("unexpected end of formula");
    error("unexpected '" + t.text + "'");
  }

  Expr sexpr() {
    const Token& t = peek();
    if (t.type == Token::Type::kNum) return Expr::number(take().value);
    if (t.type == Token::Type::kIdent) {
      if (is_function(t.text)) error("function '" + t.text + "' outside a call");
      return Expr::var(take().text);
    }
    if (!at_sym("(")) error("expected '('");
    ++i_;
    Token op = take();
    std::vector<Expr> args;
    while (!at_sym(")")) {
      if (peek().type == Token::Type::kEnd) error("unterminated s-expression");
      args.push_back(sexpr());
    }
    ++i_;
    if (op.type == Token::Type::kIdent && is_function(op.text)) {
      if (args.size() != 1) error("function '" + op.text + "' takes one argument");
      return Expr::call(canonical_function(op.text), std::move(args[0]));
    }
    if (op.type != Token::Type::kSym) error("bad operator '" + op.text + "'");
    if (op.text == "+" || op.text == "*") {
      if (args.empty()) error("empty '" + op.text + "'");
      return Expr::node(op.text == "+" ? Kind::kAdd : Kind::kMul, std::move(args));
    }
    if (op.text == "/" || op.text == "^") {
      if (args.size() != 2) error("'" + op.text + "' takes two operands");
      return Expr::node(op.text == "/" ? Kind::kDiv : Kind::kPow, std::move(args));
    }
    error("bad operator '" + op.text + "'");
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

bool looks_prefix(std::string_view s) {
  auto t = trim(s);
  if (t.empty() || t.front() != '(') return false;
  std::size_t i = 1;
  while (i < t.size() && std::isspace(static_cast<unsigned char>(t[i]))) ++i;
  if (i >= t.size()) return false;
  if (std::string_view("+*/^").find(t[i]) != std::string_view::npos)
    return i + 1 < t.size() && std::isspace(static_cast<unsigned char>(t[i + 1]));
  std::size_t j = i;
  while (j < t.size() && (std::isalnum(static_cast<unsigned char>(t[j])) || t[j] == '_')) ++j;
  return j > i && j < t.size() && std::isspace(static_cast<unsigned char>(t[j])) &&
         is_function(t.substr(i, j - i));
}

// ---- evaluation helpers ----------------------------------------------------

std::optional<double> apply_function(const std::string& fn, double x) {
  double r;
  if (fn == "log") {
    if (x <= 0) return std::nullopt;
    r = std::log(x);
  } else if (fn == "log10") {
    if (x <= 0) return std::nullopt;
    r = std::log10(x);
  } else if (fn == "log2") {
    if (x <= 0) return std::nullopt;
    r = std::log2(x);
  } else if (fn == "exp") {
    r = std::exp(x);
  } else if (fn == "sqrt") {
    if (x < 0) return std::nullopt;
    r = std::sqrt(x);
  } else {
    return std::nullopt;
  }
  if (!std::isfinite(r)) return std::nullopt;
  return r;
}

bool is_num(const Expr& e, double v) { return e.kind == Kind::kNum && e.num == v; }

void sort_by_prefix(std::vector<Expr>& kids) {
  std::vector<std::pair<std::string, Expr>> keyed;
  keyed.reserve(kids.size());
  for (auto& k : kids) keyed.emplace_back(to_prefix(k), std::move(k));
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  kids.clear();
  for (auto& [_, k] : keyed) kids.push_back(std::move(k));
}

Expr canonical_nary(Kind kind, std::vector<Expr> kids) {
  std::vector<Expr> flat;
  std::vector<double> nums;
  for (auto& k : kids) {
    if (k.kind == kind) {
      for (auto& g : k.kids) {
        if (g.kind == Kind::kNum)
          nums.push_back(g.num);
        else
          flat.push_back(std::move(g));
      }
    } else if (k.kind == Kind::kNum) {
      nums.push_back(k.num);
    } else {
      flat.push_back(std::move(k));
    }
  }
  // Folding sorted values keeps the rounding independent of operand order.
  std::sort(nums.begin(), nums.end());
  const bool add = kind == Kind::kAdd;
  double acc = add ? 0.0 : 1.0;
  for (double v : nums) acc = add ? acc + v : acc * v;
  if (!nums.empty() && !std::isfinite(acc)) {
    for (double v : nums) flat.push_back(Expr::number(v));
  } else if (!add && acc == 0.0 && !nums.empty()) {
    return Expr::number(0.0);
  } else if (acc != (add ? 0.0 : 1.0) || flat.empty()) {
    flat.push_back(Expr::number(acc));
  }
  if (flat.size() == 1) return std::move(flat[0]);
  sort_by_prefix(flat);
  return Expr::node(kind, std::move(flat));
}

bool is_unit_scale(double v) {
  if (v <= 0) return false;
  double k = std::round(std::log10(v) / 3.0);
  if (k == 0 || std::abs(k) > 4) return false;
  return std::abs(v / std::pow(10.0, 3 * k) - 1.0) < 1e-9;
}

bool is_db_offset(double v) {
  double a = std::abs(v);
  return a == 30.0 || a == 60.0 || a == 90.0;
}

void collect_vars(const Expr& e, std::vector<std::string>& out, std::set<std::string>& seen) {
  if (e.kind == Kind::kVar) {
    if (seen.insert(e.name).second) out.push_back(e.name);
    return;
  }
  for (const auto& k : e.kids) collect_vars(k, out, seen);
}

}  // namespace

Expr parse(std::string_view text) {
  if (trim(text).empty()) fail(ErrorCode::kParse, "formula: empty input");
  bool prefix = looks_prefix(text);
  Parser p(Lexer(text, prefix).run());
  return prefix ? p.prefix() : p.infix();
}

Expr canonicalize(const Expr& e) {
  switch (e.kind) {
    case Kind::kNum:
      return Expr::number(e.num);
    case Kind::kVar:
      return e;
    case Kind::kCall: {
      Expr arg = canonicalize(e.kids.at(0));
      std::string fn = canonical_function(e.name);
      if (arg.kind == Kind::kNum) {
        if (auto v = apply_function(fn, arg.num)) return Expr::number(*v);
      }
      return Expr::call(std::move(fn), std::move(arg));
    }
    case Kind::kDiv: {
      Expr a = canonicalize(e.kids.at(0));
      Expr b = canonicalize(e.kids.at(1));
      if (is_num(b, 1.0)) return a;
      if (a.kind == Kind::kNum && b.kind == Kind::kNum && b.num != 0.0) {
        double v = a.num / b.num;
        if (std::isfinite(v)) return Expr::number(v);
      }
      return Expr::node(Kind::kDiv, {std::move(a), std::move(b)});
    }
    case Kind::kPow: {
      Expr a = canonicalize(e.kids.at(0));
      Expr b = canonicalize(e.kids.at(1));
      if (is_num(b, 1.0)) return a;
      if (is_num(b, 0.0)) return Expr::number(1.0);
      if (a.kind == Kind::kNum && b.kind == Kind::kNum) {
        double v = std::pow(a.num, b.num);
        if (std::isfinite(v)) return Expr::number(v);
      }
      return Expr::node(Kind::kPow, {std::move(a), std::move(b)});
    }
    case Kind::kAdd:
    case Kind::kMul: {
      std::vector<Expr> kids;
      kids.reserve(e.kids.size());
      for (const auto& k : e.kids) kids.push_back(canonicalize(k));
      return canonical_nary(e.kind, std::move(kids));
    }
  }
  return e;
}

std::string to_prefix(const Expr& e) {
  switch (e.kind) {
    case Kind::kNum:
      return format_double(e.num);
    case Kind::kVar:
      return e.name;
    default:
      break;
  }
  std::string op;
  switch (e.kind) {
    case Kind::kAdd: op = "+"; break;
    case Kind::kMul: op = "*"; break;
    case Kind::kDiv: op = "/"; break;
    case Kind::kPow: op = "^"; break;
    default: op = e.name; break;
  }
  std::string out = "(" + op;
  for (const auto& k : e.kids) out += " " + to_prefix(k);
  out += ")";
  return out;
}

std::string canonical_string(std::string_view text) { return to_prefix(canonicalize(parse(text))); }

double evaluate(const Expr& e, const std::map<std::string, double>& vars) {
  auto domain = [](const std::string& what) -> double { fail(ErrorCode::kRange, what); };
  double r = 0.0;
  switch (e.kind) {
    case Kind::kNum:
      return e.num;
    case Kind::kVar: {
      auto it = vars.find(e.name);
      if (it == vars.end()) fail(ErrorCode::kMissingKey, "formula: unbound variable '" + e.name + "'");
      return it->second;
    }
    case Kind::kAdd:
      for (const auto& k : e.kids) r += evaluate(k, vars);
      break;
    case Kind::kMul:
      r = 1.0;
      for (const auto& k : e.kids) r *= evaluate(k, vars);
      break;
    case Kind::kDiv: {
      double b = evaluate(e.kids.at(1), vars);
      if (b == 0.0) return domain("formula: division by zero");
      r = evaluate(e.kids.at(0), vars) / b;
      break;
    }
    case Kind::kPow:
      r = std::pow(evaluate(e.kids.at(0), vars), evaluate(e.kids.at(1), vars));
      break;
    case Kind::kCall: {
      double x = evaluate(e.kids.at(0), vars);
      auto v = apply_function(e.name, x);
      if (!v) return domain("formula: " + e.name + "(" + format_double(x) + ") outside its domain");
      return *v;
    }
  }
  if (!std::isfinite(r)) return domain("formula: non-finite intermediate value");
  return r;
}

std::set<std::string> variables(const Expr& e) {
  auto ordered = variables_in_order(e);
  return {ordered.begin(), ordered.end()};
}

std::vector<std::string> variables_in_order(const Expr& e) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  collect_vars(e, out, seen);
  return out;
}

Expr rename_variables(const Expr& e, const std::map<std::string, std::string>& names) {
  if (e.kind == Kind::kVar) {
    auto it = names.find(e.name);
    return it == names.end() ? e : Expr::var(it->second);
  }
  Expr out = e;
  for (auto& k : out.kids) k = rename_variables(k, names);
  return out;
}

Expr strip_unit_conversions(const Expr& e) {
  if (e.kind == Kind::kNum || e.kind == Kind::kVar) return e;
  std::vector<Expr> kids;
  for (const auto& k : e.kids) kids.push_back(strip_unit_conversions(k));

  switch (e.kind) {
    case Kind::kMul: {
      std::vector<Expr> keep;
      for (auto& k : kids)
        if (!(k.kind == Kind::kNum && is_unit_scale(k.num))) keep.push_back(std::move(k));
      if (keep.size() == 2) {
        for (int i = 0; i < 2; ++i) {
          const Expr& c = keep[i];
          if (is_num(keep[1 - i], 10.0) && c.kind == Kind::kCall && c.name == "log10")
            return c.kids[0];
        }
      }
      if (keep.empty()) return Expr::number(1.0);
      return canonicalize(Expr::node(Kind::kMul, std::move(keep)));
    }
    case Kind::kDiv:
      if (kids[1].kind == Kind::kNum && is_unit_scale(kids[1].num)) return kids[0];
      return canonicalize(Expr::node(Kind::kDiv, std::move(kids)));
    case Kind::kAdd: {
      std::vector<Expr> keep;
      for (auto& k : kids)
        if (!(k.kind == Kind::kNum && is_db_offset(k.num))) keep.push_back(std::move(k));
      if (keep.empty()) return Expr::number(0.0);
      return canonicalize(Expr::node(Kind::kAdd, std::move(keep)));
    }
    case Kind::kPow: {
      const Expr& x = kids[1];
      if (is_num(kids[0], 10.0)) {
        if (x.kind == Kind::kDiv && is_num(x.kids[1], 10.0)) return x.kids[0];
        if (x.kind == Kind::kMul && x.kids.size() == 2) {
          for (int i = 0; i < 2; ++i)
            if (is_num(x.kids[i], 0.1)) return x.kids[1 - i];
        }
      }
      return canonicalize(Expr::node(Kind::kPow, std::move(kids)));
    }
    case Kind::kCall:
      // log10(x^10) is the same dB conversion written differently.
      if (e.name == "log10" && kids[0].kind == Kind::kPow && is_num(kids[0].kids[1], 10.0))
        return kids[0].kids[0];
      return canonicalize(Expr::call(e.name, std::move(kids[0])));
    default:
      return e;
  }
}

EquivalenceResult numeric_equivalence(const Expr& f1, const Expr& f2,
                                      const EquivalenceOptions& opts) {
  auto v1 = variables(f1);
  if (v1 != variables(f2))
    fail(ErrorCode::kPrecondition, "numeric_equivalence: formulas use different variables");
  if (opts.samples_per_variable < 1)
    fail(ErrorCode::kPrecondition, "numeric_equivalence: samples_per_variable must be >= 1");

  struct Dist {
    std::string name;
    std::uniform_real_distribution<double> d;
  };
  std::vector<Dist> dists;
  for (const auto& v : v1) {
    auto it = opts.ranges.find(v);
    Range r = it == opts.ranges.end() ? opts.default_range : it->second;
    if (!(r.lo < r.hi)) fail(ErrorCode::kPrecondition, "numeric_equivalence: empty range for " + v);
    dists.push_back({v, std::uniform_real_distribution<double>(r.lo, r.hi)});
  }

  EquivalenceResult res;
  const int needed = opts.samples_per_variable * std::max<int>(1, static_cast<int>(v1.size()));
  const int budget = needed * opts.max_redraws_per_sample;
  std::mt19937_64 rng(opts.seed);
  std::map<std::string, double> point;
  while (res.samples < needed) {
    for (auto& d : dists) point[d.name] = d.d(rng);
    double a, b;
    try {
      a = evaluate(f1, point);
      b = evaluate(f2, point);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kRange) throw;
      if (++res.rejected > budget) {
        res.equivalent = false;
        return res;
      }
      continue;
    }
    double err = std::abs(a - b) / std::max(std::abs(a), opts.floor);
    res.max_rel_err = std::max(res.max_rel_err, err);
    ++res.samples;
  }
  res.equivalent = res.max_rel_err <= opts.rel_tol;
  return res;
}

}  // namespace dtaforge::formula
