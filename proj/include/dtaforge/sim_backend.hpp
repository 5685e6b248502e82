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

// Deterministic in-process provider for desk-scale runs and tests.
//
// The simulator knows a small family of telecom calculation problems. Every
// reply is a pure function of the profile's model name, the request and (for
// sampled calls) the request seed, so replay recordings are reproducible.
// The toy data set under data/toy is generated from the same problem family.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtaforge/decontam.hpp"
#include "dtaforge/gateway.hpp"

namespace dtaforge::sim {

struct Problem {
  std::string id;
  std::size_t kind = 0;
  bool paraphrased = false;
  std::vector<double> values;  // in parameter order
  std::string question;
  std::string output_name;
  std::string formula;  // right-hand side in the names used by `question`
  decontam::RawParams params;
  double answer = 0.0;
  std::string answer_text;
  std::string unit;

  // Numbered steps with a "Formula:" line, without the final-answer line.
  std::string solution(int verbosity = 0) const;
  std::string topic() const;

  Json benchmark_json() const;  // id, question, answer, formula, params
  Json eval_json() const;       // id, question, gold_answer
  Json seed_json(bool detailed) const;
};

std::size_t kind_count();

// Values are drawn from `h`. `paraphrase` switches to the alternate wording
// and variable names.
Problem make_problem(std::size_t kind, std::uint64_t h, bool paraphrase = false);
Problem with_values(std::size_t kind, const std::vector<double>& values, bool paraphrase);

// Fixed toy sets. The benchmark is the one generated problems may leak from.
std::vector<Problem> toy_benchmark(std::size_t n = 60);
std::vector<Problem> toy_seeds(std::size_t n = 50);

// Kind and givens recovered from "name = value unit" assignments.
std::optional<Problem> recognize(std::string_view question);

// Answer text with enough digits for a 1e-3 relative comparison.
std::string format_answer(double v);

class SimBackend final : public gateway::Backend {
 public:
  gateway::ChatResponse chat(const gateway::ProviderProfile& profile,
                             const gateway::ChatRequest& req) override;
  std::vector<double> embed(const gateway::ProviderProfile& profile,
                            const std::string& text) override;
  std::vector<double> token_logprobs(const gateway::ProviderProfile& profile,
                                     const std::string& context,
                                     const std::string& target) override;
};

// Registers SimBackend for kind "sim".
void install(gateway::Gateway& gw);

}  // namespace dtaforge::sim
