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

// Helpers shared by the unit tests: profiles and a gateway wired to callbacks.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dtaforge/gateway.hpp"

namespace testing_support {

using namespace dtaforge;

inline gateway::ProviderProfile profile(const std::string& id,
                                        gateway::Role role = gateway::Role::kTeacher) {
  gateway::ProviderProfile p;
  p.id = id;
  p.kind = "mock";
  p.model_name = "mock-" + id;
  p.role = role;
  p.max_concurrent = 8;
  p.supports_logprobs = true;
  return p;
}

// A gateway whose "mock" kind is served by the given callbacks, no cache.
inline std::unique_ptr<gateway::Gateway> mock_gateway(
    std::vector<gateway::ProviderProfile> profiles, gateway::CallbackBackend::ChatFn chat,
    gateway::CallbackBackend::EmbedFn embed = {}, gateway::CallbackBackend::LogprobFn lp = {}) {
  gateway::RetryPolicy fast;
  fast.base_delay = std::chrono::milliseconds(1);
  auto gw = std::make_unique<gateway::Gateway>(std::move(profiles), gateway::ReplayMode::kOff,
                                               std::nullopt, fast);
  gw->register_backend("mock", std::make_shared<gateway::CallbackBackend>(
                                   std::move(chat), std::move(embed), std::move(lp)));
  return gw;
}

inline gateway::ChatResponse reply(std::string text) {
  gateway::ChatResponse r;
  r.text = std::move(text);
  r.output_tokens = static_cast<std::int64_t>(r.text.size() / 4);
  return r;
}

inline std::string prompt_of(const gateway::ChatRequest& req) {
  return req.messages.empty() ? std::string() : req.messages.front().content;
}

}  // namespace testing_support
