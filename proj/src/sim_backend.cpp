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

#include "dtaforge/sim_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <regex>
#include <set>

#include "dtaforge/error.hpp"
#include "dtaforge/formula.hpp"
#include "dtaforge/prompt_forge.hpp"

namespace dtaforge::sim {
namespace {

struct ParamSpec {
  const char* name;
  const char* alt;
  const char* unit;  // "" for a plain number
  double lo;
  double hi;
  int decimals;
  bool pow2 = false;  // value is 2^round(lo..hi)
};

struct KnowledgeSpec {
  const char* description;
  const char* relevance;
};

struct Kind {
  const char* topic;  // appears in the first knowledge point and nowhere else
  const char* output;
  const char* output_alt;
  const char* unit;
  const char* formula;  // in the primary parameter names
  std::vector<ParamSpec> params;
  const char* frame;  // {0}, {1}, ... are the "name = value unit" givens
  const char* frame_alt;
  std::vector<KnowledgeSpec> knowledge;
  const char* strategy;
  const char* decomposition;
  const char* tools;
};

const std::vector<Kind>& kinds() {
  static const std::vector<Kind> k = {
      {"free-space path loss", "FSPL_dB", "Lfs_dB", "dB",
       "20*log10(d_km) + 20*log10(f_MHz) + 32.44",
       {{"d_km", "R_km", "km", 1, 50, 1}, {"f_MHz", "fc_MHz", "MHz", 700, 6000, 0}},
       "A point-to-point microwave link has a path length of {0} and operates at a carrier "
       "frequency of {1}. Assuming free-space propagation, determine the free-space path loss "
       "in dB.",
       "A point-to-point microwave connection has a path range of {0} and works at a carrier "
       "frequency of {1}. Assuming free-space propagation, find the free-space path loss in dB.",
       {{"Free-space path loss for line-of-sight propagation",
         "the loss grows with the square of both distance and frequency"},
        {"Decibel arithmetic with logarithms",
         "products of distance and frequency become sums of logarithmic terms"},
        {"Unit-dependent constants in path-loss expressions",
         "the 32.44 dB constant assumes kilometres and megahertz"}},
       "Express the path loss in logarithmic form and evaluate each term",
       "Split the loss into a distance term, a frequency term and a constant",
       "20*log10 terms for distance and frequency plus the 32.44 dB constant"},
      {"Shannon capacity", "C_Mbps", "Cap_Mbps", "Mbps", "B_MHz * log2(1 + 10^(SNR_dB/10))",
       {{"B_MHz", "W_MHz", "MHz", 1, 100, 1}, {"SNR_dB", "gamma_dB", "dB", 0, 30, 1}},
       "An AWGN channel has a bandwidth of {0} and a received signal-to-noise ratio of {1}. "
       "Compute the Shannon capacity of the channel in Mbps.",
       "An AWGN medium has a bandwidth of {0} and a received signal-to-noise ratio of {1}. "
       "Calculate the Shannon capacity of the medium in Mbps.",
       {{"Shannon capacity of a band-limited AWGN channel",
         "it bounds the error-free information rate"},
        {"Conversion of a ratio from decibels to linear scale",
         "the capacity formula needs the linear signal-to-noise ratio"},
        {"Base-two logarithms for information rates", "capacity is measured in bits"}},
       "Convert the signal-to-noise ratio to linear scale, then apply the capacity bound",
       "First the dB-to-linear conversion, then the logarithm, then the bandwidth product",
       "C = B*log2(1 + SNR) with SNR = 10^(SNR_dB/10)"},
      {"link budget", "P_rx", "Prx_dBm", "dBm", "P_tx + G_tx + G_rx - L_path",
       {{"P_tx", "Pt", "dBm", 10, 46, 0},
        {"G_tx", "Gt", "dBi", 0, 20, 1},
        {"G_rx", "Gr", "dBi", 0, 20, 1},
        {"L_path", "Lp", "dB", 80, 140, 1}},
       "A transmitter radiates {0} through an antenna with gain {1}. The receiving antenna has "
       "gain {2} and the total propagation loss is {3}. Determine the received power in dBm "
       "using a link budget.",
       "A transmitter emits {0} through an antenna with gain {1}. The receiving antenna has "
       "gain {2} and the overall propagation loss is {3}. Find the received power in dBm "
       "using a link budget.",
       {{"Link budget accounting of gains and losses",
         "received power is the transmit power plus gains minus losses"},
        {"Antenna gain expressed in dBi", "gains add directly in the logarithmic domain"},
        {"Power levels in dBm", "absolute power is referenced to one milliwatt"}},
       "Add every gain and subtract every loss in decibels",
       "Treat transmit power, each antenna and the path as separate budget entries",
       "P_rx = P_tx + G_tx + G_rx - L_path in dB units"},
      {"milliwatt conversion", "P_mW", "Pout_mW", "mW", "10^(P_dBm/10)",
       {{"P_dBm", "Pin_dBm", "dBm", -10, 30, 1}},
       "A power meter reads {0} at the output of an amplifier. Express this power level in "
       "milliwatts using the dBm to milliwatt conversion.",
       "A power meter shows {0} at the output of an amplifier. Express this power level in "
       "milliwatts using the dBm to milliwatt conversion.",
       {{"dBm to milliwatt conversion", "dBm is ten times the base-ten logarithm of milliwatts"},
        {"Inverting a logarithmic scale", "the linear value is a power of ten"}},
       "Invert the decibel definition", "Divide by ten, then raise ten to that power",
       "P_mW = 10^(P_dBm/10)"},
      {"thermal noise floor", "N_dBm", "Nfloor_dBm", "dBm", "-174 + 10*log10(B_Hz) + NF_dB",
       {{"B_Hz", "BW_Hz", "Hz", 10000, 20000000, 0}, {"NF_dB", "F_dB", "dB", 2, 10, 1}},
       "A receiver has a noise bandwidth of {0} and a noise figure of {1}. At the standard "
       "reference temperature, compute the thermal noise floor at the receiver input in dBm.",
       "A receiver has a noise bandwidth of {0} and a noise figure of {1}. At the standard "
       "reference temperature, calculate the thermal noise floor at the receiver input in dBm.",
       {{"Thermal noise floor of a receiver", "it sets the weakest detectable signal"},
        {"Noise spectral density of -174 dBm/Hz at room temperature",
         "it is the per-hertz reference level"},
        {"Noise figure as added receiver noise", "it raises the floor in decibels"}},
       "Scale the reference noise density by the bandwidth and add the noise figure",
       "Density term, bandwidth term, noise-figure term",
       "N = -174 + 10*log10(B) + NF"},
      {"propagation delay", "t_ms", "tau_ms", "ms", "dist_km / 299.792458",
       {{"dist_km", "s_km", "km", 10, 40000, 0}},
       "A radio signal travels a distance of {0} at the speed of light in vacuum. Determine "
       "the one-way propagation delay in milliseconds.",
       "A radio signal covers a distance of {0} at the speed of light in vacuum. Find the "
       "one-way propagation delay in milliseconds.",
       {{"One-way propagation delay of electromagnetic waves",
         "delay is distance divided by the speed of light"},
        {"Speed of light as 299.792458 km/ms", "it keeps the units in kilometres and milliseconds"}},
       "Divide the distance by the propagation speed", "Unit choice first, then the division",
       "t = d / c with c = 299.792458 km/ms"},
      {"spectral efficiency", "eta", "SE", "bps/Hz", "R_Mbps / Bc_MHz",
       {{"R_Mbps", "Rb_Mbps", "Mbps", 1, 1000, 1}, {"Bc_MHz", "Bch_MHz", "MHz", 1, 100, 1}},
       "A wireless system delivers a data rate of {0} over a channel bandwidth of {1}. "
       "Compute the spectral efficiency in bps/Hz.",
       "A wireless system achieves a data rate of {0} over a medium bandwidth of {1}. "
       "Calculate the spectral efficiency in bps/Hz.",
       {{"Spectral efficiency of a wireless link", "it measures bits per second per hertz"},
        {"Consistent rate and bandwidth units", "Mbps over MHz gives bps/Hz directly"}},
       "Divide the data rate by the occupied bandwidth", "Check units, then divide",
       "eta = R / B"},
      {"energy per bit to noise density", "EbN0_dB", "EbNo_dB", "dB",
       "SNRr_dB + 10*log10(Bn_MHz / Rd_Mbps)",
       {{"SNRr_dB", "rho_dB", "dB", 0, 25, 1},
        {"Bn_MHz", "Bw_MHz", "MHz", 1, 50, 1},
        {"Rd_Mbps", "Rate_Mbps", "Mbps", 1, 100, 1}},
       "A digital receiver measures a signal-to-noise ratio of {0} in a noise bandwidth of "
       "{1} while the bit rate is {2}. Determine Eb/N0 in dB.",
       "A digital receiver observes a signal-to-noise ratio of {0} in a noise bandwidth of "
       "{1} while the bit rate is {2}. Find Eb/N0 in dB.",
       {{"Energy per bit to noise density ratio", "it normalizes SNR by bit rate and bandwidth"},
        {"Relation between SNR and Eb/N0", "Eb/N0 = SNR * B / R"}},
       "Convert SNR to Eb/N0 through the bandwidth-to-rate ratio",
       "Ratio term in dB, then add it to the SNR",
       "Eb/N0 = SNR + 10*log10(B/R) in dB"},
      {"carrier wavelength", "lambda_m", "wl_m", "m", "299.792458 / fw_MHz",
       {{"fw_MHz", "nu_MHz", "MHz", 100, 6000, 0}},
       "A base station transmits on a carrier frequency of {0}. Compute the carrier "
       "wavelength in metres.",
       "A base station sends on a carrier frequency of {0}. Calculate the carrier wavelength "
       "in metres.",
       {{"Carrier wavelength from frequency", "wavelength is the speed of light over frequency"},
        {"Speed of light as 299.792458 m per microsecond",
         "with MHz this gives metres directly"}},
       "Divide the speed of light by the frequency", "Pick units, then divide",
       "lambda = c / f"},
      {"QAM bit rate", "Rb_qam", "Rbits_qam", "Mbps", "Rs_MBd * log2(M)",
       {{"Rs_MBd", "Sym_MBd", "MBd", 1, 100, 1}, {"M", "Mord", "", 2, 8, 0, true}},
       "A modem uses QAM with constellation size {1} at a symbol rate of {0}. Compute the "
       "gross QAM bit rate in Mbps.",
       "A modem employs QAM with constellation size {1} at a symbol rate of {0}. Calculate the "
       "gross QAM bit rate in Mbps.",
       {{"QAM bit rate from symbol rate and constellation size",
         "each symbol carries log2(M) bits"},
        {"Symbol rate in baud", "it counts symbols per second"}},
       "Multiply the symbol rate by the bits per symbol", "Bits per symbol first, then rate",
       "R = Rs * log2(M)"},
      {"Erlang traffic intensity", "A_erl", "Traffic_erl", "Erlang", "lambda_ph * h_min / 60",
       {{"lambda_ph", "calls_ph", "", 50, 2000, 0}, {"h_min", "hold_min", "min", 1, 10, 1}},
       "A cell receives an average of {0} calls per hour, and each call lasts {1} on average. "
       "Compute the offered Erlang traffic intensity.",
       "A cell handles an average of {0} calls per hour, and each call lasts {1} on average. "
       "Calculate the offered Erlang traffic intensity.",
       {{"Erlang traffic intensity of a cell", "offered load is arrival rate times holding time"},
        {"Consistent time units for rate and holding time",
         "minutes must be converted to hours"}},
       "Multiply the arrival rate by the mean holding time", "Convert units, then multiply",
       "A = lambda * h / 60"},
  };
  return k;
}

// Alternate wording folded onto the primary wording by the embedder.
const std::map<std::string, std::string>& synonyms() {
  static const std::map<std::string, std::string> m = [] {
    std::map<std::string, std::string> s = {
        {"connection", "link"}, {"range", "length"},     {"works", "operates"},
        {"find", "determine"},  {"calculate", "compute"}, {"medium", "channel"},
        {"emits", "radiates"},  {"overall", "total"},     {"shows", "reads"},
        {"covers", "travels"},  {"achieves", "delivers"}, {"observes", "measures"},
        {"sends", "transmits"}, {"employs", "uses"},      {"handles", "receives"}};
    for (const auto& k : kinds()) {
      s[to_lower(k.output_alt)] = to_lower(k.output);
      for (const auto& p : k.params) s[to_lower(p.alt)] = to_lower(p.name);
    }
    return s;
  }();
  return m;
}

double u01(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

std::uint64_t hash_of(std::initializer_list<std::string_view> parts) {
  std::string joined;
  for (auto p : parts) {
    joined.append(p);
    joined.push_back('\x1f');
  }
  return mix64(fnv1a64(joined));
}

std::string format_value(double v, int decimals) {
  double scale = std::pow(10.0, decimals);
  return format_double(std::round(v * scale) / scale);
}

std::string given(const std::string& name, const std::string& value, const std::string& unit) {
  return name + " = " + value + (unit.empty() ? "" : " " + unit);
}

std::string rename_in(std::string text, const Kind& k, bool alt) {
  if (!alt) return text;
  for (const auto& p : k.params)
    text = std::regex_replace(text, std::regex(std::string("\\b") + p.name + "\\b"), p.alt);
  return text;
}

std::string between(std::string_view text, std::string_view start, std::string_view end = {}) {
  auto b = text.find(start);
  if (b == std::string_view::npos) return {};
  b += start.size();
  auto e = end.empty() ? std::string_view::npos : text.find(end, b);
  return std::string(trim(text.substr(b, e == std::string_view::npos ? text.npos : e - b)));
}

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in = false;
  for (char c : s) {
    bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!ws && !in) ++n;
    in = !ws;
  }
  return n;
}

std::vector<std::string> words_of(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && (cur.back() == '.' || cur.back() == '-')) cur.pop_back();
    if (!cur.empty()) out.push_back(to_lower(cur));
    cur.clear();
  };
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '_' || c == '.' || c == '-' || u >= 0x80)
      cur.push_back(c);
    else
      flush();
  }
  flush();
  return out;
}

bool is_number(const std::string& w) { return parse_double(w).has_value(); }

int verbosity(const std::string& model) { return static_cast<int>(fnv1a64(model) % 3); }

double flaw_rate(const std::string& model) {
  return 0.04 + 0.08 * u01(mix64(fnv1a64(model) ^ 0x51ed27a1ULL));
}

// Student models named like an aligned checkpoint write in the structured
// style the alignment targets and get a small accuracy bump, so the toy run
// has a visible discourse shift.
bool aligned_student(const std::string& model) { return model.find("dta") != std::string::npos; }

double student_skill(const std::string& model, bool thinking) {
  double s = 0.45 + 0.35 * u01(mix64(fnv1a64(model) ^ 0x5c1119ULL));
  if (aligned_student(model)) s += 0.08;
  return std::min(0.97, s + (thinking ? 0.12 : 0.0));
}

bool answer_matches(std::optional<double> stated, const std::optional<Problem>& p) {
  return p && stated && within_rel_tol(*stated, p->answer, 2e-3);
}

std::string first_sentence(const std::string& s) {
  auto dot = s.find(". ");
  return dot == std::string::npos ? s : s.substr(0, dot + 1);
}

std::string givens_list(const Problem& p) {
  std::vector<std::string> g;
  for (const auto& [name, raw] : p.params) g.push_back(name + " = " + raw);
  return join(g, ", ");
}

gateway::ChatResponse reply(std::string text, const gateway::ChatRequest& req) {
  gateway::ChatResponse r;
  for (const auto& m : req.messages) r.prompt_tokens += static_cast<std::int64_t>(word_count(m.content));
  r.output_tokens = static_cast<std::int64_t>(word_count(text) * 4 / 3 + 1);
  r.text = std::move(text);
  return r;
}

// ---- role handlers ---------------------------------------------------------

std::string detail_reply(const std::string& prompt, const std::string& model) {
  auto q = between(prompt, "**The Full Question**", "**The Correct Answer**");
  auto a = between(prompt, "**The Correct Answer**");
  auto p = recognize(q);
  if (!p) return "Step-by-step analysis:\n1. Restate the question.\n2. Report the stated result.\n\nFinal Answer: " + a;
  if (auto given_answer = prompt::extract_final_answer(a)) p->answer_text = format_answer(*given_answer);
  return "Detailed solution:\n" + p->solution(verbosity(model)) +
         "\n\nFinal Answer: " + p->answer_text;
}

std::string extract_reply(const std::string& prompt, const std::string& model) {
  auto q = between(prompt, "**The Full Question**", "**The Correct Answer**");
  auto p = recognize(q);
  prompt::KnowledgeList kl;
  if (!p) {
    kl.points.push_back({"Quantitative reasoning in telecommunications", "the task is a calculation"});
    kl.skills = {"Identify the relation and substitute", "Givens, relation, result", "Arithmetic"};
    return prompt::format_knowledge(kl);
  }
  const Kind& k = kinds()[p->kind];
  for (std::size_t j = 0; j < k.knowledge.size(); ++j) {
    if (j == 0 || u01(hash_of({model, k.topic, std::to_string(j)})) < 0.7)
      kl.points.push_back({k.knowledge[j].description, k.knowledge[j].relevance});
  }
  kl.skills = {k.strategy, k.decomposition, k.tools};
  return prompt::format_knowledge(kl);
}

std::string merge_reply(const std::string& prompt) {
  auto lists = between(prompt, "**Extracted Lists**");
  prompt::KnowledgeList merged;
  try {
    merged = prompt::parse_knowledge(lists);
  } catch (const Error&) {
    return lists;
  }
  std::vector<prompt::KnowledgePoint> unique;
  std::set<std::string> seen;
  for (auto& kp : merged.points) {
    std::string d(trim(kp.description));
    while (!d.empty() && d.back() == '.') d.pop_back();
    if (seen.insert(to_lower(d)).second) unique.push_back({d, kp.relevance});
  }
  merged.points = std::move(unique);
  return prompt::format_knowledge(merged);
}

std::string generate_reply(const std::string& prompt, const std::string& model,
                           std::int64_t seed) {
  auto kp = between(prompt, "**The Knowledge Point**");
  std::uint64_t h = mix64(fnv1a64(model) ^ mix64(static_cast<std::uint64_t>(seed)));
  std::size_t kind = h % kinds().size();
  for (std::size_t k = 0; k < kinds().size(); ++k) {
    if (find_ci(kp, kinds()[k].topic) != std::string::npos) {
      kind = k;
      break;
    }
  }
  double mode = u01(mix64(h ^ 0xa5a5a5a5ULL));
  static const std::vector<Problem> bench = toy_benchmark();
  std::vector<const Problem*> same_kind;
  for (const auto& b : bench)
    if (b.kind == kind) same_kind.push_back(&b);

  Problem p;
  std::string prefix;
  if (mode < 0.03 && !same_kind.empty()) {
    p = *same_kind[(h >> 17) % same_kind.size()];
    if ((h >> 9) & 1) p.question += " Show the calculation steps.";
  } else if (mode < 0.09 && !same_kind.empty()) {
    const Problem& b = *same_kind[(h >> 17) % same_kind.size()];
    p = with_values(kind, b.values, true);
  } else {
    static const char* kScenes[] = {"", "Consider a network planning exercise. ",
                                    "During a field trial, the following is measured. ",
                                    "In a rural deployment study, an engineer checks a design. "};
    prefix = kScenes[(h >> 5) % 4];
    p = make_problem(kind, mix64(h ^ 0x9e37ULL), ((h >> 3) & 3) == 0);
  }
  if (u01(mix64(h ^ 0x0f1a3ULL)) < flaw_rate(model)) {
    p.answer = p.answer * (1.08 + 0.2 * u01(mix64(h ^ 0x77ULL)));
    p.answer_text = format_answer(p.answer);
  }
  std::string out = "- Problem Statement: " + prefix + p.question + "\n- Solution Steps:\n" +
                    p.solution(verbosity(model));
  if (mode >= 0.09 && mode < 0.12) return out;  // forgot the answer line
  return out + "\n- Final Answer: " + p.answer_text;
}

std::string peer_reply(const std::string& prompt, const std::string& model) {
  auto q = between(prompt, "**Input Question**", "**Input Answer**");
  auto a = between(prompt, "**Input Answer**");
  std::uint64_t h = hash_of({model, q, a});
  if (u01(h) < 0.02) return "The answer looks plausible, but I could not finish the check.";
  auto p = recognize(q);
  bool ok = answer_matches(prompt::extract_final_answer(a), p);
  double v = u01(mix64(h));
  double score;
  if (ok)
    score = u01(mix64(h ^ 3)) < 0.03 ? 0.5 + 0.2 * v : 0.8 + 0.2 * v;
  else
    score = p ? 0.1 + 0.35 * v : 0.3 * v;
  return std::string("Recomputed the result from the stated givens and relation. ") +
         (ok ? "The final value is consistent with the recomputation."
             : "The final value does not match the recomputation.") +
         "\n\n" + prompt::format_boxed_score(score);
}

std::string style_reply(const std::string& prompt) {
  auto ex = between(prompt, "**EXAMPLES BLOCK**");
  std::string out = "## Language, Tone, and Level of Detail: Requirements\n";
  out += "- Use a neutral, objective and formal register.\n";
  out += "- State each computation in a single declarative sentence.\n";
  if (ex.find(" = ") != std::string::npos) out += "- Attach units to every given and result.\n";
  out += "- Avoid speculation and unsupported claims.\n";
  out += "\n## Answer Structure and Organization: Requirements\n";
  if (ex.find("**Summary:**") != std::string::npos)
    out += "- Open with a one-sentence **Summary:** line.\n";
  if (ex.find("**Steps**") != std::string::npos)
    out += "- Present the calculation as numbered steps under a **Steps** heading.\n";
  out += "- Close with a **Final Answer:** line holding a single number.\n";
  return out;
}

std::string align_reply(const std::string& prompt, const std::string& model) {
  auto q = between(prompt, "**The Full Question**", "**The Correct Answer**");
  auto a = between(prompt, "**The Correct Answer**");
  auto rules = between(prompt, "**Rules**", "**The Full Question**");
  auto p = recognize(q);
  if (!p) return "**Summary:** The given solution restated.\n\n" + a;
  std::uint64_t h = hash_of({model, q, a});
  double r = u01(h);
  double value = prompt::extract_final_answer(a).value_or(p->answer);
  if (r < 0.03) value *= 1.07;
  const Kind& k = kinds()[p->kind];
  std::string unit = p->unit.empty() ? "" : " " + p->unit;
  std::string out;
  if (rules.find("Summary") != std::string::npos)
    out += "**Summary:** The " + std::string(k.topic) + " follows directly from the givens.\n\n";
  if (rules.find("Steps") != std::string::npos) out += "**Steps**\n";
  out += "1. Given: " + givens_list(*p) + ".\n";
  out += "2. Apply " + p->output_name + " = " + p->formula + ".\n";
  out += "3. Evaluate: " + p->output_name + " = " + format_answer(value) + unit + ".\n";
  int verb = verbosity(model) + static_cast<int>((h >> 8) & 1);
  if (verb >= 1) out += "4. The question states: " + first_sentence(q) + "\n";
  if (verb >= 2) out += "5. " + std::string(k.strategy) + ", as the question requires.\n";
  if (verb >= 3) out += "6. Units check: the result is in" + (unit.empty() ? std::string(" plain numbers") : unit) + ".\n";
  if (r >= 0.03 && r < 0.05) return out;
  return out + "\n**Final Answer:** " + format_answer(value);
}

std::string reward_reply(const std::string& prompt, const std::string& model, bool strict) {
  auto q = between(prompt, "- **Question**:", "- **Answer**:");
  auto a = between(prompt, "- **Answer**:", "**Rubric");
  std::uint64_t h = hash_of({model, q, a});
  auto p = recognize(q);
  bool ok = answer_matches(prompt::extract_final_answer(a), p);
  auto noise = [&](int i) { return static_cast<int>(mix64(h ^ static_cast<std::uint64_t>(i)) % 3) - 1; };
  int steps = 0;
  for (const auto& l : split_lines(a)) {
    auto t = trim(l);
    if (!t.empty() && std::isdigit(static_cast<unsigned char>(t.front()))) ++steps;
  }
  auto clamp10 = [](int v) { return std::clamp(v, 0, 10); };
  int correctness = ok ? 9 + static_cast<int>(h & 1) : 3;
  int completeness = clamp10(5 + steps + noise(1));
  int clarity = clamp10(6 + (a.find("**Summary:**") != std::string::npos) +
                        (a.find("**Steps**") != std::string::npos) +
                        (a.find("Final Answer") != std::string::npos) + noise(2));
  int conciseness = clamp10(10 - static_cast<int>(word_count(a) / 25) + noise(3));
  Json j = {
      {"correctness", {{"score", correctness}, {"explanation", ok ? "Result matches a recomputation." : "Result does not match a recomputation."}}},
      {"completeness", {{"score", completeness}, {"explanation", "Coverage of the requested quantity."}}},
      {"clarity", {{"score", clarity}, {"explanation", "Organization of the steps."}}},
      {"conciseness", {{"score", conciseness}, {"explanation", "Length relative to content."}}}};
  double r = u01(mix64(h ^ 0x2eULL));
  if (!strict && r < 0.04) {
    std::string s = j.dump();
    return "Assessment follows. " + s.substr(0, s.size() / 2);
  }
  if (r < 0.10) return "```json\n" + j.dump(2) + "\n```";
  return j.dump(2);
}

std::string pairwise_reply(const std::string& prompt, const std::string& model) {
  auto q = between(prompt, "- Question:\n", "- Answer A:\n");
  auto a = between(prompt, "- Answer A:\n", "- Answer B:\n");
  auto b = between(prompt, "- Answer B:\n", "Now, begin your evaluation");
  auto p = recognize(q);
  auto quality = [&](const std::string& ans) {
    double s = answer_matches(prompt::extract_final_answer(ans), p) ? 7.0 : 3.0;
    s += std::min(2.0, static_cast<double>(split_lines(ans).size()) / 4.0);
    s += 0.5 * static_cast<double>(hash_of({model, ans}) & 1);
    return std::min(10.0, s);
  };
  // Slot A gets a small systematic bonus, like real judges do.
  double sa = std::min(10.0, quality(a) + 0.5), sb = quality(b);
  Json j = {{"evaluation",
             {{"answer_a", {{"score", sa}, {"justification", "Scored on correctness and detail."}}},
              {"answer_b", {{"score", sb}, {"justification", "Scored on correctness and detail."}}},
              {"summary", sa > sb ? "Answer A is stronger." : sa < sb ? "Answer B is stronger." : "The answers are comparable."}}}};
  return j.dump(2);
}

std::string entailment_reply(const std::string& prompt, const std::string& model) {
  auto a = between(prompt, "**Item A**", "**Item B**");
  auto b = between(prompt, "**Item B**");
  if (u01(hash_of({model, a, b})) < 0.004) return "Unable to decide from the given items.";
  auto pa = recognize(a), pb = recognize(b);
  double score = 0.02;
  if (pa && pb && pa->kind == pb->kind) {
    bool same = pa->values.size() == pb->values.size();
    for (std::size_t i = 0; same && i < pa->values.size(); ++i)
      same = within_rel_tol(pa->values[i], pb->values[i], 1e-9, 1e-12);
    score = same ? 0.95 : 0.10;
  }
  return std::string(score > 0.5 ? "Both items ask for the same quantity from the same givens."
                                 : "The items differ in their givens or in what is asked.") +
         "\n\n" + prompt::format_boxed_score(score);
}

std::string student_reply(const std::string& prompt, const std::string& model,
                          const gateway::ChatRequest& req) {
  auto p = recognize(prompt);
  if (!p) return "**Summary:** The question cannot be mapped to a known calculation.\n\n**Final Answer:** 0";
  bool sampled = req.temperature > 0.0;
  std::string seed = sampled && req.seed ? std::to_string(*req.seed) : std::string();
  std::uint64_t h = hash_of({model, prompt, req.enable_thinking ? "think" : "direct", seed});
  bool correct = u01(h) < student_skill(model, req.enable_thinking);
  double value = correct ? p->answer : p->answer * (1.0 + 0.05 * static_cast<double>(1 + (h >> 20) % 3));
  const Kind& k = kinds()[p->kind];
  std::string unit = p->unit.empty() ? "" : " " + p->unit;
  std::string out;
  if (req.enable_thinking)
    out += "<think>\nRecall the relation for the " + std::string(k.topic) +
           ", then substitute the givens one at a time and check the units.\n</think>\n\n";
  out += "**Summary:** The " + std::string(k.topic) + " follows from the givens.\n\n**Steps**\n";
  if (aligned_student(model)) {
    out += "1. First, identify the given quantities: " + givens_list(*p) + ".\n";
    out += "2. Next, recall the relation " + p->output_name + " = " + p->formula + ".\n";
    out += "3. Then substitute the values and compute " + p->output_name + " = " +
           format_answer(value) + unit + ".\n";
    out += "4. Finally, check the units; therefore the result follows.\n\n";
  } else {
    out += "1. Given: " + givens_list(*p) + ".\n";
    out += "2. Apply " + p->output_name + " = " + p->formula + ".\n";
    out += "3. Evaluate: " + p->output_name + " = " + format_answer(value) + unit + ".\n\n";
  }
  return out + "**Final Answer:** " + format_answer(value);
}

}  // namespace

// ---- problems --------------------------------------------------------------

std::size_t kind_count() { return kinds().size(); }

std::string format_answer(double v) {
  if (!std::isfinite(v)) return format_double(v);
  if (v == 0.0) return "0";
  int mag = static_cast<int>(std::floor(std::log10(std::fabs(v))));
  int decimals = std::clamp(5 - mag, 0, 9);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s;
}

std::string Problem::topic() const { return kinds().at(kind).topic; }

std::string Problem::solution(int verbosity) const {
  const Kind& k = kinds().at(kind);
  std::string u = unit.empty() ? "" : " " + unit;
  std::string out = "1. Identify the given quantities: " + givens_list(*this) + ".\n";
  out += "2. " + std::string(k.strategy) + ".\n";
  out += "Formula: " + output_name + " = " + formula + "\n";
  out += "3. Substitute the given values into the relation: " + output_name + " = " + answer_text + u + ".";
  if (verbosity >= 1)
    out += "\n4. Check the units: the result is expressed in" +
           (u.empty() ? std::string(" plain numbers") : u) + ", as the question asks.";
  if (verbosity >= 2) out += "\n5. " + std::string(k.decomposition) + ".";
  return out;
}

Json Problem::benchmark_json() const {
  Json params = Json::object();
  for (const auto& [k, v] : this->params) params[k] = v;
  return Json{{"id", id}, {"question", question}, {"answer", answer_text},
              {"formula", formula}, {"params", params}};
}

Json Problem::eval_json() const {
  return Json{{"id", id}, {"question", question}, {"gold_answer", answer}};
}

Json Problem::seed_json(bool detailed) const {
  std::string y = detailed ? solution(2) + "\n\nFinal Answer: " + answer_text
                           : answer_text + (unit.empty() ? "" : " " + unit);
  return Json{{"id", id}, {"x_seed", question}, {"y_seed", y},
              {"domain", "telecommunications mathematics"}, {"is_detailed", detailed}};
}

Problem with_values(std::size_t kind, const std::vector<double>& values, bool paraphrase) {
  const Kind& k = kinds().at(kind);
  if (values.size() != k.params.size())
    fail(ErrorCode::kPrecondition, "sim: wrong number of values for problem kind");
  Problem p;
  p.kind = kind;
  p.paraphrased = paraphrase;
  p.values = values;
  p.unit = k.unit;
  p.output_name = paraphrase ? k.output_alt : k.output;
  p.formula = rename_in(k.formula, k, paraphrase);
  std::string q = paraphrase ? k.frame_alt : k.frame;
  std::map<std::string, double> bind;
  for (std::size_t i = 0; i < k.params.size(); ++i) {
    const auto& ps = k.params[i];
    std::string name = paraphrase ? ps.alt : ps.name;
    std::string raw = format_value(values[i], ps.decimals);
    bind[ps.name] = values[i];
    p.params.emplace_back(name, raw + (*ps.unit ? std::string(" ") + ps.unit : ""));
    std::string slot = "{" + std::to_string(i) + "}";
    q.replace(q.find(slot), slot.size(), given(name, raw, ps.unit));
  }
  p.question = q;
  p.answer_text = format_answer(formula::evaluate(formula::parse(k.formula), bind));
  p.answer = *parse_double(p.answer_text);
  p.id = "sim-" + sha256_hex(p.question).substr(0, 12);
  return p;
}

Problem make_problem(std::size_t kind, std::uint64_t h, bool paraphrase) {
  const Kind& k = kinds().at(kind);
  std::vector<double> values;
  for (std::size_t i = 0; i < k.params.size(); ++i) {
    const auto& ps = k.params[i];
    double u = u01(mix64(h ^ (0x9e3779b97f4a7c15ULL * (i + 1))));
    double v = ps.lo + u * (ps.hi - ps.lo);
    if (ps.pow2) v = std::pow(2.0, std::round(v));
    double scale = std::pow(10.0, ps.decimals);
    values.push_back(std::round(v * scale) / scale);
  }
  return with_values(kind, values, paraphrase);
}

std::vector<Problem> toy_benchmark(std::size_t n) {
  std::vector<Problem> out;
  std::uint64_t base = fnv1a64("toy-benchmark");
  for (std::size_t i = 0; i < n; ++i) {
    auto p = make_problem(i % kind_count(), mix64(base ^ i));
    char id[32];
    std::snprintf(id, sizeof(id), "bench-%03zu", i + 1);
    p.id = id;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Problem> toy_seeds(std::size_t n) {
  std::vector<Problem> out;
  std::uint64_t base = fnv1a64("toy-seeds");
  for (std::size_t i = 0; i < n; ++i) {
    auto p = make_problem(i % kind_count(), mix64(base ^ i));
    char id[32];
    std::snprintf(id, sizeof(id), "seed-%03zu", i + 1);
    p.id = id;
    out.push_back(std::move(p));
  }
  return out;
}

std::optional<Problem> recognize(std::string_view question) {
  std::map<std::string, double> found;
  for (const auto& [name, raw] : decontam::extract_parameters(question)) {
    auto space = raw.find(' ');
    if (auto v = parse_double(raw.substr(0, space))) found.emplace(name, *v);
  }
  std::optional<Problem> best;
  std::size_t best_n = 0;
  for (std::size_t k = 0; k < kind_count(); ++k) {
    const Kind& kd = kinds()[k];
    for (bool alt : {false, true}) {
      std::vector<double> values;
      for (const auto& ps : kd.params) {
        auto it = found.find(alt ? ps.alt : ps.name);
        if (it == found.end()) break;
        values.push_back(it->second);
      }
      if (values.size() != kd.params.size() || values.size() <= best_n) continue;
      try {
        best = with_values(k, values, alt);
        best_n = values.size();
      } catch (const Error&) {
      }
    }
  }
  return best;
}

// ---- backend ---------------------------------------------------------------

gateway::ChatResponse SimBackend::chat(const gateway::ProviderProfile& profile,
                                       const gateway::ChatRequest& req) {
  req.validate();
  const std::string& prompt = req.messages.front().content;
  const std::string& model = profile.model_name;
  bool reask = req.messages.size() > 1;
  auto has = [&](std::string_view marker) { return prompt.find(marker) != std::string::npos; };
  std::string text;
  if (has("rewrite the answer into detailed solution"))
    text = detail_reply(prompt, model);
  else if (has("rewrite the solution in details"))
    text = align_reply(prompt, model);
  else if (has("Several analysts independently extracted"))
    text = merge_reply(prompt);
  else if (has("extract and summarize two key components"))
    text = extract_reply(prompt, model);
  else if (has("expert educational content creator"))
    text = generate_reply(prompt, model, req.seed.value_or(0));
  else if (has("evaluate whether the Answer correctly"))
    text = peer_reply(prompt, model);
  else if (has("You are a style inducer"))
    text = style_reply(prompt);
  else if (has("strictly by the rubric below"))
    text = reward_reply(prompt, model, reask);
  else if (has("critically assess two provided answers"))
    text = pairwise_reply(prompt, model);
  else if (has("Decide whether Item A entails Item B"))
    text = entailment_reply(prompt, model);
  else
    text = student_reply(prompt, model, req);
  return reply(std::move(text), req);
}

std::vector<double> SimBackend::embed(const gateway::ProviderProfile& profile,
                                      const std::string& text) {
  std::size_t dim = profile.embedding_dim > 0 ? static_cast<std::size_t>(profile.embedding_dim) : 256;
  std::vector<double> v(dim, 0.0);
  const auto& syn = synonyms();
  for (auto w : words_of(text)) {
    if (auto it = syn.find(w); it != syn.end()) w = it->second;
    std::uint64_t h = fnv1a64(w);
    double weight = is_number(w) ? 3.0 : 1.0;
    v[h % dim] += (mix64(h) & 1) ? weight : -weight;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) {
    v[0] = 1.0;
    return v;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<double> SimBackend::token_logprobs(const gateway::ProviderProfile& profile,
                                               const std::string& context,
                                               const std::string& target) {
  auto ctx = words_of(context);
  std::set<std::string> seen(ctx.begin(), ctx.end());
  std::vector<double> out;
  for (const auto& w : words_of(target)) {
    double lp = -(0.4 + 3.2 * u01(hash_of({profile.model_name, w})));
    if (seen.count(w)) lp *= 0.3;
    out.push_back(lp);
  }
  if (out.empty()) fail(ErrorCode::kProvider, "sim: empty target");
  return out;
}

void install(gateway::Gateway& gw) { gw.register_backend("sim", std::make_shared<SimBackend>()); }

}  // namespace dtaforge::sim
