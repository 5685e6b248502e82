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

#include <cstdlib>

#include "dtaforge/error.hpp"
#include "dtaforge/gateway.hpp"
#include "httplib.h"

namespace dtaforge::gateway {
namespace {

struct Endpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // e.g. /v1, without trailing slash
};

Endpoint split_endpoint(const ProviderProfile& profile) {
  const auto& url = profile.endpoint;
  auto scheme_end = url.find("://");
  if (url.empty() || scheme_end == std::string::npos)
    fail(ErrorCode::kConfig, "profile '" + profile.id + "': endpoint must be an absolute URL");
  auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = url.substr(0, path_start);
  ep.base_path = path_start == std::string::npos ? std::string() : url.substr(path_start);
  while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  return ep;
}

Json post_json(const ProviderProfile& profile, const std::string& route, const Json& body) {
  auto ep = split_endpoint(profile);
  httplib::Client client(ep.origin);
  auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(profile.request_timeout_s));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!profile.api_key_env.empty()) {
    if (const char* key = std::getenv(profile.api_key_env.c_str()); key && *key)
      headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  auto res = client.Post(ep.base_path + route, headers, body.dump(), "application/json");
  if (!res) {
    fail(ErrorCode::kTransport, "POST " + profile.endpoint + route + " failed: " +
                                    httplib::to_string(res.error()));
  }
  if (res->status >= 500)
    fail(ErrorCode::kTransport, "POST " + route + " returned HTTP " + std::to_string(res->status));
  if (res->status != 200)
    fail(ErrorCode::kProvider, "POST " + route + " returned HTTP " + std::to_string(res->status) +
                                   ": " + res->body.substr(0, 200));
  try {
    return Json::parse(res->body);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kProvider, std::string("provider returned invalid JSON: ") + e.what());
  }
}

}  // namespace

ChatResponse HttpBackend::chat(const ProviderProfile& profile, const ChatRequest& req) {
  return parse_chat_body(post_json(profile, "/chat/completions", build_chat_body(profile, req)));
}

std::vector<double> HttpBackend::embed(const ProviderProfile& profile, const std::string& text) {
  return parse_embedding_body(post_json(profile, "/embeddings", build_embedding_body(profile, text)));
}

std::vector<double> HttpBackend::token_logprobs(const ProviderProfile& profile,
                                                const std::string& context,
                                                const std::string& target) {
  auto body = post_json(profile, "/completions", build_logprob_body(profile, context, target));
  return parse_logprob_body(body, context.size());
}

}  // namespace dtaforge::gateway
