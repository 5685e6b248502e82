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

#include "dtaforge/gateway.hpp"

#include <cmath>
#include <semaphore>
#include <thread>

#include "dtaforge/error.hpp"

namespace dtaforge::gateway {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kTeacher: return "teacher";
    case Role::kStudent: return "student";
    case Role::kJudge: return "judge";
    case Role::kStyleSummarizer: return "style_summarizer";
    case Role::kEmbedder: return "embedder";
  }
  return "teacher";
}

Role role_from_string(std::string_view s) {
  if (s == "teacher") return Role::kTeacher;
  if (s == "student") return Role::kStudent;
  if (s == "judge") return Role::kJudge;
  if (s == "style_summarizer") return Role::kStyleSummarizer;
  if (s == "embedder") return Role::kEmbedder;
  fail(ErrorCode::kConfig, "unknown provider role '" + std::string(s) + "'");
}

Json ProviderProfile::to_json() const {
  return Json{{"id", id},
              {"kind", kind},
              {"endpoint", endpoint},
              {"model_name", model_name},
              {"role", to_string(role)},
              {"max_concurrent", max_concurrent},
              {"request_timeout_s", request_timeout_s},
              {"api_key_env", api_key_env},
              {"supports_logprobs", supports_logprobs},
              {"embedding_dim", embedding_dim}};
}

ProviderProfile ProviderProfile::from_json(const Json& j) {
  ProviderProfile p;
  p.id = j.at("id").get<std::string>();
  p.kind = j.value("kind", std::string("http"));
  p.endpoint = j.value("endpoint", std::string());
  p.model_name = j.value("model_name", p.id);
  p.role = role_from_string(j.value("role", std::string("teacher")));
  p.max_concurrent = j.value("max_concurrent", 4);
  p.request_timeout_s = j.value("request_timeout_s", 120.0);
  p.api_key_env = j.value("api_key_env", std::string());
  p.supports_logprobs = j.value("supports_logprobs", false);
  p.embedding_dim = j.value("embedding_dim", 0);
  return p;
}

void ChatRequest::validate() const {
  if (messages.empty()) fail(ErrorCode::kPrecondition, "chat request has no messages");
  if (!(temperature >= 0.0)) fail(ErrorCode::kPrecondition, "temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0))
    fail(ErrorCode::kPrecondition, "top_p must lie in (0, 1]");
  if (top_k && *top_k < 1) fail(ErrorCode::kPrecondition, "top_k must be positive");
  if (max_tokens < 1) fail(ErrorCode::kPrecondition, "max_tokens must be positive");
}

Json ChatRequest::to_json() const {
  Json msgs = Json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  Json j{{"messages", msgs},
         {"temperature", temperature},
         {"top_p", top_p},
         {"max_tokens", max_tokens},
         {"enable_thinking", enable_thinking}};
  j["top_k"] = top_k ? Json(*top_k) : Json(nullptr);
  j["seed"] = seed ? Json(*seed) : Json(nullptr);
  return j;
}

ChatRequest ChatRequest::user(std::string prompt) {
  ChatRequest r;
  r.messages.push_back({"user", std::move(prompt)});
  return r;
}

ChatRequest Sampling::request(std::string prompt, std::optional<std::int64_t> seed) const {
  ChatRequest r = ChatRequest::user(std::move(prompt));
  r.temperature = temperature;
  r.top_p = top_p;
  r.top_k = top_k;
  r.max_tokens = max_tokens;
  r.enable_thinking = enable_thinking;
  r.seed = seed;
  return r;
}

Json Sampling::to_json() const {
  Json j{{"temperature", temperature},
         {"top_p", top_p},
         {"max_tokens", max_tokens},
         {"enable_thinking", enable_thinking}};
  j["top_k"] = top_k ? Json(*top_k) : Json(nullptr);
  return j;
}

Sampling Sampling::from_json(const Json& j, const Sampling& defaults) {
  Sampling s = defaults;
  s.temperature = j.value("temperature", s.temperature);
  s.top_p = j.value("top_p", s.top_p);
  s.max_tokens = j.value("max_tokens", s.max_tokens);
  s.enable_thinking = j.value("enable_thinking", s.enable_thinking);
  if (j.contains("top_k")) {
    if (j["top_k"].is_null()) s.top_k.reset();
    else s.top_k = j["top_k"].get<int>();
  }
  return s;
}

namespace {

std::string_view finish_to_string(FinishReason r) {
  switch (r) {
    case FinishReason::kStop: return "stop";
    case FinishReason::kLength: return "length";
    case FinishReason::kError: return "error";
  }
  return "stop";
}

FinishReason finish_from_string(std::string_view s) {
  if (s == "length") return FinishReason::kLength;
  if (s == "stop" || s.empty()) return FinishReason::kStop;
  return FinishReason::kError;
}

}  // namespace

Json ChatResponse::to_json() const {
  return Json{{"text", text},
              {"prompt_tokens", prompt_tokens},
              {"output_tokens", output_tokens},
              {"finish_reason", finish_to_string(finish_reason)}};
}

ChatResponse ChatResponse::from_json(const Json& j) {
  ChatResponse r;
  r.text = j.at("text").get<std::string>();
  r.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
  r.output_tokens = j.value("output_tokens", std::int64_t{0});
  r.finish_reason = finish_from_string(j.value("finish_reason", std::string("stop")));
  return r;
}

PerplexityResult perplexity_from_logprobs(const std::vector<double>& logprobs) {
  if (logprobs.empty()) fail(ErrorCode::kPrecondition, "perplexity over zero target tokens");
  double sum = 0.0;
  for (double lp : logprobs) {
    if (!std::isfinite(lp) || lp > 0.0)
      fail(ErrorCode::kProvider, "provider returned an invalid token log-probability");
    sum += lp;
  }
  double ppl = std::exp(-sum / static_cast<double>(logprobs.size()));
  if (!std::isfinite(ppl) || ppl <= 0.0)
    fail(ErrorCode::kProvider, "perplexity is not finite");
  return {ppl, logprobs.size()};
}

// ---- wire contract ---------------------------------------------------------

Json build_chat_body(const ProviderProfile& profile, const ChatRequest& req) {
  Json msgs = Json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  Json body{{"model", profile.model_name},
            {"messages", std::move(msgs)},
            {"temperature", req.temperature},
            {"top_p", req.top_p},
            {"max_tokens", req.max_tokens},
            {"stream", false},
            {"chat_template_kwargs", {{"enable_thinking", req.enable_thinking}}}};
  if (req.top_k) body["top_k"] = *req.top_k;
  if (req.seed) body["seed"] = *req.seed;
  return body;
}

ChatResponse parse_chat_body(const Json& body) {
  try {
    const auto& choice = body.at("choices").at(0);
    ChatResponse r;
    const auto& content = choice.at("message").at("content");
    r.text = content.is_null() ? std::string() : content.get<std::string>();
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
      r.finish_reason = finish_from_string(choice["finish_reason"].get<std::string>());
    if (body.contains("usage") && body["usage"].is_object()) {
      r.prompt_tokens = body["usage"].value("prompt_tokens", std::int64_t{0});
      r.output_tokens = body["usage"].value("completion_tokens", std::int64_t{0});
    }
    return r;
  } catch (const Json::exception& e) {
    fail(ErrorCode::kProvider, std::string("malformed chat completion payload: ") + e.what());
  }
}

Json build_embedding_body(const ProviderProfile& profile, const std::string& text) {
  return Json{{"model", profile.model_name}, {"input", text}};
}

std::vector<double> parse_embedding_body(const Json& body) {
  try {
    return body.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const Json::exception& e) {
    fail(ErrorCode::kProvider, std::string("malformed embedding payload: ") + e.what());
  }
}

Json build_logprob_body(const ProviderProfile& profile, const std::string& context,
                        const std::string& target) {
  return Json{{"model", profile.model_name},
              {"prompt", context + target},
              {"max_tokens", 0},
              {"echo", true},
              {"logprobs", 1},
              {"temperature", 0.0}};
}

std::vector<double> parse_logprob_body(const Json& body, std::size_t context_chars) {
  try {
    const auto& lp = body.at("choices").at(0).at("logprobs");
    const auto& values = lp.at("token_logprobs");
    const auto& offsets = lp.at("text_offset");
    if (values.size() != offsets.size())
      fail(ErrorCode::kProvider, "logprob payload has mismatched token arrays");
    std::vector<double> out;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (offsets[i].get<std::size_t>() < context_chars || values[i].is_null()) continue;
      out.push_back(values[i].get<double>());
    }
    return out;
  } catch (const Json::exception& e) {
    fail(ErrorCode::kProvider, std::string("malformed logprob payload: ") + e.what());
  }
}

// ---- callback backend ------------------------------------------------------

ChatResponse CallbackBackend::chat(const ProviderProfile& profile, const ChatRequest& req) {
  if (!chat_) fail(ErrorCode::kUnsupported, "backend has no chat support");
  return chat_(profile, req);
}

std::vector<double> CallbackBackend::embed(const ProviderProfile& profile,
                                           const std::string& text) {
  if (!embed_) fail(ErrorCode::kUnsupported, "backend has no embedding support");
  return embed_(profile, text);
}

std::vector<double> CallbackBackend::token_logprobs(const ProviderProfile& profile,
                                                    const std::string& context,
                                                    const std::string& target) {
  if (!logprobs_) fail(ErrorCode::kUnsupported, "backend has no log-probability support");
  return logprobs_(profile, context, target);
}

// ---- replay cache ----------------------------------------------------------

std::string_view to_string(ReplayMode mode) {
  switch (mode) {
    case ReplayMode::kOff: return "off";
    case ReplayMode::kRecord: return "record";
    case ReplayMode::kStrict: return "strict";
  }
  return "off";
}

ReplayMode replay_mode_from_string(std::string_view s) {
  if (s == "off") return ReplayMode::kOff;
  if (s == "record") return ReplayMode::kRecord;
  if (s == "strict") return ReplayMode::kStrict;
  fail(ErrorCode::kConfig, "unknown replay mode '" + std::string(s) + "'");
}

std::filesystem::path ReplayCache::path_for(const std::string& digest) const {
  return dir_ / digest.substr(0, 2) / (digest + ".json");
}

std::optional<Json> ReplayCache::lookup(const std::string& digest) const {
  auto p = path_for(digest);
  std::error_code ec;
  if (!std::filesystem::exists(p, ec)) return std::nullopt;
  Json entry = Json::parse(read_file(p));
  if (entry.value("format", std::string()) != kFormat)
    fail(ErrorCode::kIo, "replay entry " + p.string() + " has an unsupported format");
  return entry.at("response");
}

void ReplayCache::store(const std::string& digest, const std::string& kind,
                        const Json& request, const Json& response) {
  Json entry{{"format", kFormat},
             {"kind", kind},
             {"key", digest},
             {"request", request},
             {"response", response}};
  std::lock_guard lock(write_mu_);
  write_file_atomic(path_for(digest), entry.dump(1) + "\n");
}

std::string chat_digest(const ProviderProfile& profile, const ChatRequest& req) {
  Json key{{"op", "chat"}, {"model", profile.model_name}, {"request", req.to_json()}};
  return sha256_hex(key.dump());
}

std::string embed_digest(const ProviderProfile& profile, const std::string& text) {
  Json key{{"op", "embed"}, {"model", profile.model_name}, {"text", text}};
  return sha256_hex(key.dump());
}

std::string logprob_digest(const ProviderProfile& profile, const std::string& context,
                           const std::string& target) {
  Json key{{"op", "logprobs"},
           {"model", profile.model_name},
           {"context", context},
           {"target", target}};
  return sha256_hex(key.dump());
}

// ---- gateway ---------------------------------------------------------------

struct Gateway::Slot {
  explicit Slot(int cap) : admission(cap) {}
  std::counting_semaphore<1024> admission;
};

Gateway::Gateway(std::vector<ProviderProfile> profiles, ReplayMode mode,
                 std::optional<std::filesystem::path> cache_dir, RetryPolicy retry)
    : profiles_(std::move(profiles)), mode_(mode), retry_(retry) {
  for (const auto& p : profiles_) {
    if (p.max_concurrent < 1 || p.max_concurrent > 1024)
      fail(ErrorCode::kConfig, "profile '" + p.id + "': max_concurrent out of range");
    if (!slots_.emplace(p.id, std::make_unique<Slot>(p.max_concurrent)).second)
      fail(ErrorCode::kConfig, "duplicate provider profile id '" + p.id + "'");
  }
  if (mode_ != ReplayMode::kOff) {
    if (!cache_dir) fail(ErrorCode::kConfig, "replay mode requires a cache directory");
    cache_ = std::make_unique<ReplayCache>(*cache_dir);
  }
  kind_backends_["http"] = std::make_shared<HttpBackend>();
}

Gateway::~Gateway() = default;

void Gateway::register_backend(const std::string& kind, std::shared_ptr<Backend> backend) {
  std::lock_guard lock(backends_mu_);
  kind_backends_[kind] = std::move(backend);
}

void Gateway::set_profile_backend(const std::string& profile_id,
                                  std::shared_ptr<Backend> backend) {
  std::lock_guard lock(backends_mu_);
  profile_backends_[profile_id] = std::move(backend);
}

bool Gateway::has_profile(const std::string& id) const {
  for (const auto& p : profiles_)
    if (p.id == id) return true;
  return false;
}

const ProviderProfile& Gateway::profile(const std::string& id) const {
  for (const auto& p : profiles_)
    if (p.id == id) return p;
  fail(ErrorCode::kConfig, "unknown provider profile '" + id + "'");
}

Backend& Gateway::backend_for(const ProviderProfile& profile) {
  std::lock_guard lock(backends_mu_);
  if (auto it = profile_backends_.find(profile.id); it != profile_backends_.end())
    return *it->second;
  if (auto it = kind_backends_.find(profile.kind); it != kind_backends_.end())
    return *it->second;
  fail(ErrorCode::kConfig,
       "profile '" + profile.id + "': no backend for kind '" + profile.kind + "'");
}

Gateway::Slot& Gateway::slot(const std::string& id) { return *slots_.at(id); }

template <typename Fn>
auto Gateway::call_with_retry(const ProviderProfile& profile, Fn&& fn) {
  Backend& backend = backend_for(profile);
  auto delay = retry_.base_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      Slot& s = slot(profile.id);
      s.admission.acquire();
      struct Release {
        Slot& s;
        ~Release() { s.admission.release(); }
      } release{s};
      ++backend_calls_;
      return fn(backend);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransport || attempt >= retry_.max_attempts) throw;
    }
    ++retries_;
    std::this_thread::sleep_for(delay);
    delay = std::chrono::milliseconds(
        static_cast<std::int64_t>(static_cast<double>(delay.count()) * retry_.multiplier));
  }
}

std::optional<Json> Gateway::cached(const std::string& digest) {
  if (!cache_) return std::nullopt;
  auto hit = cache_->lookup(digest);
  if (hit) {
    ++cache_hits_;
    return hit;
  }
  if (mode_ == ReplayMode::kStrict)
    fail(ErrorCode::kReplayMiss, "strict replay: no cache entry for request " + digest);
  return std::nullopt;
}

ChatResponse Gateway::chat_complete(const std::string& profile_id, const ChatRequest& req) {
  req.validate();
  const auto& p = profile(profile_id);
  const auto digest = cache_ ? chat_digest(p, req) : std::string();
  if (auto hit = cached(digest)) return ChatResponse::from_json(*hit);
  auto resp = call_with_retry(p, [&](Backend& b) { return b.chat(p, req); });
  if (cache_) cache_->store(digest, "chat", Json{{"model", p.model_name}, {"request", req.to_json()}},
                            resp.to_json());
  return resp;
}

std::vector<double> Gateway::embed(const std::string& profile_id, const std::string& text) {
  if (text.empty()) fail(ErrorCode::kPrecondition, "embed: text must be non-empty");
  const auto& p = profile(profile_id);
  std::vector<double> vec;
  const auto digest = cache_ ? embed_digest(p, text) : std::string();
  if (auto hit = cached(digest)) {
    vec = hit->get<std::vector<double>>();
  } else {
    vec = call_with_retry(p, [&](Backend& b) { return b.embed(p, text); });
    if (cache_) cache_->store(digest, "embed", Json{{"model", p.model_name}, {"text", text}}, vec);
  }
  if (vec.empty()) fail(ErrorCode::kProvider, "embed: provider returned an empty vector");
  if (p.embedding_dim > 0 && vec.size() != static_cast<std::size_t>(p.embedding_dim))
    fail(ErrorCode::kProvider, "embed: dimension " + std::to_string(vec.size()) +
                                   " does not match declared " +
                                   std::to_string(p.embedding_dim));
  return vec;
}

PerplexityResult Gateway::perplexity(const std::string& profile_id, const std::string& context,
                                     const std::string& target) {
  if (target.empty()) fail(ErrorCode::kPrecondition, "perplexity: target must be non-empty");
  const auto& p = profile(profile_id);
  if (!p.supports_logprobs)
    fail(ErrorCode::kUnsupported,
         "profile '" + p.id + "' does not expose token log-probabilities");
  std::vector<double> lps;
  const auto digest = cache_ ? logprob_digest(p, context, target) : std::string();
  if (auto hit = cached(digest)) {
    lps = hit->get<std::vector<double>>();
  } else {
    lps = call_with_retry(p, [&](Backend& b) { return b.token_logprobs(p, context, target); });
    if (cache_)
      cache_->store(digest, "logprobs",
                    Json{{"model", p.model_name}, {"context", context}, {"target", target}},
                    lps);
  }
  if (lps.empty()) fail(ErrorCode::kProvider, "perplexity: zero scored target tokens");
  return perplexity_from_logprobs(lps);
}

GatewayStats Gateway::stats() const {
  return {backend_calls_.load(), cache_hits_.load(), retries_.load()};
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    fail(ErrorCode::kPrecondition, "cosine: vectors must have equal, non-zero length");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace dtaforge::gateway
