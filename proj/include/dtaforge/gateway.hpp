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

// Uniform access to chat, embedding and perplexity providers.
//
// Every model call in the pipeline goes through a Gateway. The gateway owns
// the per-profile admission cap, bounded retries, and the content-addressed
// replay cache; the actual transport lives behind the Backend interface so
// tests and desk-scale runs can substitute deterministic implementations.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dtaforge/util.hpp"

namespace dtaforge::gateway {

enum class Role { kTeacher, kStudent, kJudge, kStyleSummarizer, kEmbedder };

std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

struct ProviderProfile {
  std::string id;
  // Backend kind: "http" (OpenAI-compatible), "sim" (built-in deterministic
  // simulator), or any name registered with Gateway::register_backend.
  std::string kind = "http";
  std::string endpoint;  // e.g. http://127.0.0.1:8000/v1
  std::string model_name;
  Role role = Role::kTeacher;
  int max_concurrent = 4;
  double request_timeout_s = 120.0;
  std::string api_key_env;
  bool supports_logprobs = false;
  int embedding_dim = 0;  // 0 = undeclared

  Json to_json() const;
  static ProviderProfile from_json(const Json& j);
};

struct Message {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::vector<Message> messages;
  double temperature = 0.0;
  double top_p = 1.0;
  std::optional<int> top_k;
  int max_tokens = 2048;
  bool enable_thinking = false;
  std::optional<std::int64_t> seed;

  // Throws kPrecondition when a field is outside its stated range.
  void validate() const;
  Json to_json() const;

  static ChatRequest user(std::string prompt);
};

// Sampling settings for one kind of call; stamps out ChatRequests.
struct Sampling {
  double temperature = 0.0;
  double top_p = 1.0;
  std::optional<int> top_k;
  int max_tokens = 2048;
  bool enable_thinking = false;

  ChatRequest request(std::string prompt, std::optional<std::int64_t> seed = {}) const;
  Json to_json() const;
  static Sampling from_json(const Json& j, const Sampling& defaults);
};

enum class FinishReason { kStop, kLength, kError };

struct ChatResponse {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t output_tokens = 0;
  FinishReason finish_reason = FinishReason::kStop;

  Json to_json() const;
  static ChatResponse from_json(const Json& j);
  bool operator==(const ChatResponse&) const = default;
};

struct PerplexityResult {
  double perplexity = 1.0;
  std::size_t target_token_count = 0;
};

// exp(-mean log p) over the target tokens.
PerplexityResult perplexity_from_logprobs(const std::vector<double>& logprobs);

// ---- wire contract ---------------------------------------------------------

Json build_chat_body(const ProviderProfile& profile, const ChatRequest& req);
ChatResponse parse_chat_body(const Json& body);
Json build_embedding_body(const ProviderProfile& profile, const std::string& text);
std::vector<double> parse_embedding_body(const Json& body);
Json build_logprob_body(const ProviderProfile& profile, const std::string& context,
                        const std::string& target);
// Log-probabilities of the tokens whose text offset lies at or after
// `context_chars`; null entries (the unconditioned first token) are skipped.
std::vector<double> parse_logprob_body(const Json& body, std::size_t context_chars);

// ---- backends --------------------------------------------------------------

// Transport implementations raise kTransport for retryable failures
// (connection errors, HTTP 5xx) and kProvider for everything else.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse chat(const ProviderProfile& profile, const ChatRequest& req) = 0;
  virtual std::vector<double> embed(const ProviderProfile& profile,
                                    const std::string& text) = 0;
  virtual std::vector<double> token_logprobs(const ProviderProfile& profile,
                                             const std::string& context,
                                             const std::string& target) = 0;
};

class HttpBackend final : public Backend {
 public:
  ChatResponse chat(const ProviderProfile& profile, const ChatRequest& req) override;
  std::vector<double> embed(const ProviderProfile& profile,
                            const std::string& text) override;
  std::vector<double> token_logprobs(const ProviderProfile& profile,
                                     const std::string& context,
                                     const std::string& target) override;
};

// Backend assembled from callables; unset hooks raise kUnsupported.
class CallbackBackend final : public Backend {
 public:
  using ChatFn = std::function<ChatResponse(const ProviderProfile&, const ChatRequest&)>;
  using EmbedFn = std::function<std::vector<double>(const ProviderProfile&, const std::string&)>;
  using LogprobFn = std::function<std::vector<double>(
      const ProviderProfile&, const std::string&, const std::string&)>;

  CallbackBackend(ChatFn chat, EmbedFn embed = {}, LogprobFn logprobs = {})
      : chat_(std::move(chat)), embed_(std::move(embed)), logprobs_(std::move(logprobs)) {}

  ChatResponse chat(const ProviderProfile& profile, const ChatRequest& req) override;
  std::vector<double> embed(const ProviderProfile& profile,
                            const std::string& text) override;
  std::vector<double> token_logprobs(const ProviderProfile& profile,
                                     const std::string& context,
                                     const std::string& target) override;

 private:
  ChatFn chat_;
  EmbedFn embed_;
  LogprobFn logprobs_;
};

// ---- replay cache ----------------------------------------------------------

enum class ReplayMode {
  kOff,     // always call the backend, never touch the cache
  kRecord,  // read-through: serve hits, call and store on miss
  kStrict,  // serve hits, fail with kReplayMiss on miss
};

std::string_view to_string(ReplayMode mode);
ReplayMode replay_mode_from_string(std::string_view s);

// Content-addressed key -> response store. One JSON file per entry under
// <dir>/<first two hex chars>/<digest>.json, tagged with a format version.
class ReplayCache {
 public:
  static constexpr std::string_view kFormat = "dtaforge-replay/1";

  explicit ReplayCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::optional<Json> lookup(const std::string& digest) const;
  void store(const std::string& digest, const std::string& kind,
             const Json& request, const Json& response);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& digest) const;

  std::filesystem::path dir_;
  mutable std::mutex write_mu_;
};

// Digests are SHA-256 over a canonical JSON rendering of every field that can
// change the provider's answer.
std::string chat_digest(const ProviderProfile& profile, const ChatRequest& req);
std::string embed_digest(const ProviderProfile& profile, const std::string& text);
std::string logprob_digest(const ProviderProfile& profile, const std::string& context,
                           const std::string& target);

// ---- gateway ---------------------------------------------------------------

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{250};
  double multiplier = 2.0;
};

struct GatewayStats {
  std::uint64_t backend_calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t retries = 0;
};

class Gateway {
 public:
  Gateway(std::vector<ProviderProfile> profiles, ReplayMode mode,
          std::optional<std::filesystem::path> cache_dir, RetryPolicy retry = {});
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Backends are resolved per profile: an explicit per-profile override wins,
  // then a backend registered for the profile's kind. "http" is built in.
  void register_backend(const std::string& kind, std::shared_ptr<Backend> backend);
  void set_profile_backend(const std::string& profile_id, std::shared_ptr<Backend> backend);

  const ProviderProfile& profile(const std::string& id) const;
  bool has_profile(const std::string& id) const;
  const std::vector<ProviderProfile>& profiles() const { return profiles_; }
  ReplayMode mode() const { return mode_; }

  ChatResponse chat_complete(const std::string& profile_id, const ChatRequest& req);
  std::vector<double> embed(const std::string& profile_id, const std::string& text);
  PerplexityResult perplexity(const std::string& profile_id, const std::string& context,
                              const std::string& target);

  GatewayStats stats() const;

 private:
  struct Slot;

  Backend& backend_for(const ProviderProfile& profile);
  Slot& slot(const std::string& id);
  template <typename Fn>
  auto call_with_retry(const ProviderProfile& profile, Fn&& fn);
  std::optional<Json> cached(const std::string& digest);

  std::vector<ProviderProfile> profiles_;
  ReplayMode mode_;
  std::unique_ptr<ReplayCache> cache_;
  RetryPolicy retry_;
  std::map<std::string, std::shared_ptr<Backend>> kind_backends_;
  std::map<std::string, std::shared_ptr<Backend>> profile_backends_;
  std::map<std::string, std::unique_ptr<Slot>> slots_;
  mutable std::mutex backends_mu_;
  std::atomic<std::uint64_t> backend_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> retries_{0};
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace dtaforge::gateway
