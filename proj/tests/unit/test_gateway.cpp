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

#include <atomic>
#include <cmath>
#include <thread>

#include "doctest.h"
#include "dtaforge/error.hpp"
#include "dtaforge/gateway.hpp"
#include "httplib.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace dtaforge;
using namespace dtaforge::gateway;
using testing_support::mock_gateway;
using testing_support::profile;
using testing_support::reply;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kStage;
}

}  // namespace

TEST_SUITE("gateway") {
  TEST_CASE("request validation") {
    ChatRequest r = ChatRequest::user("hi");
    CHECK_NOTHROW(r.validate());
    r.top_p = 0.0;
    CHECK(code_of([&] { r.validate(); }) == ErrorCode::kPrecondition);
    r = ChatRequest::user("hi");
    r.max_tokens = 0;
    CHECK(code_of([&] { r.validate(); }) == ErrorCode::kPrecondition);
    CHECK(code_of([] { ChatRequest{}.validate(); }) == ErrorCode::kPrecondition);
  }

  TEST_CASE("perplexity is exp of the mean negative log-probability") {
    auto r = perplexity_from_logprobs({std::log(0.5), std::log(0.25)});
    CHECK(r.perplexity == doctest::Approx(std::exp(-(std::log(0.5) + std::log(0.25)) / 2)));
    CHECK(r.target_token_count == 2);
    CHECK(code_of([] { perplexity_from_logprobs({}); }) == ErrorCode::kPrecondition);
    CHECK(code_of([] { perplexity_from_logprobs({0.3}); }) == ErrorCode::kProvider);
  }

  TEST_CASE("chat body carries the thinking switch and sampling") {
    auto p = profile("t");
    Sampling s{0.7, 0.9, 20, 512, true};
    auto body = build_chat_body(p, s.request("question", 42));
    CHECK(body["model"] == "mock-t");
    CHECK(body["chat_template_kwargs"]["enable_thinking"] == true);
    CHECK(body["top_k"] == 20);
    CHECK(body["seed"] == 42);
    CHECK(body["messages"][0]["content"] == "question");
  }

  TEST_CASE("malformed payloads are provider errors") {
    CHECK(code_of([] { parse_chat_body(Json::object()); }) == ErrorCode::kProvider);
    CHECK(code_of([] { parse_embedding_body(Json{{"data", Json::array()}}); }) ==
          ErrorCode::kProvider);
    Json lp{{"choices", {{{"logprobs", {{"token_logprobs", {nullptr, -1.0, -2.0}},
                                        {"text_offset", {0, 3, 6}}}}}}}};
    CHECK(parse_logprob_body(lp, 3) == std::vector<double>{-1.0, -2.0});
  }

  TEST_CASE("transport errors are retried, provider errors are not") {
    std::atomic<int> calls{0};
    auto gw = mock_gateway({profile("t")}, [&](const ProviderProfile&, const ChatRequest&) {
      if (++calls < 3) fail(ErrorCode::kTransport, "flaky");
      return reply("ok");
    });
    CHECK(gw->chat_complete("t", ChatRequest::user("x")).text == "ok");
    CHECK(calls == 3);
    CHECK(gw->stats().retries == 2);

    calls = 0;
    auto gw2 = mock_gateway({profile("t")}, [&](const ProviderProfile&, const ChatRequest&) -> ChatResponse {
      ++calls;
      fail(ErrorCode::kProvider, "bad request");
    });
    CHECK(code_of([&] { gw2->chat_complete("t", ChatRequest::user("x")); }) == ErrorCode::kProvider);
    CHECK(calls == 1);
  }

  TEST_CASE("unknown profile is a precondition failure") {
    auto gw = mock_gateway({profile("t")}, [](const ProviderProfile&, const ChatRequest&) {
      return reply("ok");
    });
    CHECK_THROWS_AS(gw->chat_complete("nope", ChatRequest::user("x")), Error);
  }

  TEST_CASE("per-profile concurrency cap holds") {
    auto p = profile("t");
    p.max_concurrent = 2;
    std::atomic<int> inflight{0}, peak{0};
    auto gw = mock_gateway({p}, [&](const ProviderProfile&, const ChatRequest&) {
      int now = ++inflight;
      int prev = peak.load();
      while (now > prev && !peak.compare_exchange_weak(prev, now)) {}
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
      --inflight;
      return reply("ok");
    });
    parallel_for(40, 8, [&](std::size_t i) {
      gw->chat_complete("t", ChatRequest::user("q" + std::to_string(i)));
    });
    CHECK(peak.load() <= 2);
    CHECK(peak.load() >= 1);
  }

  TEST_CASE("replay: record then strict serves identical bytes without the backend") {
    oracle::TempDir tmp("replay");
    std::atomic<int> calls{0};
    auto chat = [&](const ProviderProfile&, const ChatRequest& req) {
      ++calls;
      return reply("echo:" + req.messages[0].content);
    };
    auto embed = [&](const ProviderProfile&, const std::string& t) {
      ++calls;
      return std::vector<double>{static_cast<double>(t.size()), 1.0};
    };
    std::vector<ChatResponse> first;
    {
      Gateway gw({profile("t")}, ReplayMode::kRecord, tmp.path);
      gw.register_backend("mock", std::make_shared<CallbackBackend>(chat, embed));
      for (int i = 0; i < 5; ++i) first.push_back(gw.chat_complete("t", ChatRequest::user(std::to_string(i))));
      gw.embed("t", "abc");
      // A repeated request is a cache hit even while recording.
      gw.chat_complete("t", ChatRequest::user("0"));
      CHECK(gw.stats().cache_hits == 1);
    }
    CHECK(calls == 6);
    Gateway strict({profile("t")}, ReplayMode::kStrict, tmp.path);
    strict.register_backend("mock", std::make_shared<CallbackBackend>(chat, embed));
    for (int i = 0; i < 5; ++i) CHECK(strict.chat_complete("t", ChatRequest::user(std::to_string(i))) == first[i]);
    CHECK(strict.embed("t", "abc") == std::vector<double>{3.0, 1.0});
    CHECK(calls == 6);
    CHECK(code_of([&] { strict.chat_complete("t", ChatRequest::user("new")); }) == ErrorCode::kReplayMiss);
    // Changing any sampling field changes the key.
    auto r = ChatRequest::user("0");
    r.temperature = 0.1;
    CHECK(code_of([&] { strict.chat_complete("t", r); }) == ErrorCode::kReplayMiss);
  }

  TEST_CASE("digests depend on model name and request fields") {
    auto a = profile("a"), b = profile("a");
    b.model_name = "other";
    auto r = ChatRequest::user("q");
    CHECK(chat_digest(a, r) == chat_digest(a, r));
    CHECK(chat_digest(a, r) != chat_digest(b, r));
    auto r2 = r;
    r2.enable_thinking = true;
    CHECK(chat_digest(a, r) != chat_digest(a, r2));
    CHECK(embed_digest(a, "x") != embed_digest(a, "y"));
  }

  TEST_CASE("cosine") {
    CHECK(cosine({1, 0}, {0, 1}) == doctest::Approx(0.0));
    CHECK(cosine({1, 2}, {2, 4}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(cosine({1, 2}, {1, 2, 3}), Error);
  }

  TEST_CASE("http backend against an in-process OpenAI-compatible server") {
    httplib::Server server;
    std::atomic<int> chat_hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
      auto body = Json::parse(req.body);
      if (++chat_hits == 1) {
        res.status = 503;
        return;
      }
      Json out{{"choices", {{{"message", {{"role", "assistant"},
                                          {"content", "got " + body["messages"][0]["content"].get<std::string>()}}},
                             {"finish_reason", "stop"}}}},
               {"usage", {{"prompt_tokens", 5}, {"completion_tokens", 2}}}};
      res.set_content(out.dump(), "application/json");
    });
    server.Post("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"data":[{"embedding":[0.6,0.8]}]})", "application/json");
    });
    server.Post("/v1/completions", [](const httplib::Request& req, httplib::Response& res) {
      auto body = Json::parse(req.body);
      CHECK(body["echo"] == true);
      // "ctx" + "ab": tokens at offsets 0, 3, 4.
      res.set_content(R"({"choices":[{"logprobs":{"token_logprobs":[null,-0.5,-1.5],"text_offset":[0,3,4]}}]})",
                      "application/json");
    });
    server.Post("/bad/chat/completions", [](const httplib::Request&, httplib::Response& res) {
      res.status = 400;
      res.set_content("nope", "text/plain");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto p = profile("h");
    p.kind = "http";
    p.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
    p.request_timeout_s = 5;
    auto bad = p;
    bad.id = "bad";
    bad.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/bad";
    RetryPolicy fast;
    fast.base_delay = std::chrono::milliseconds(1);
    Gateway gw({p, bad}, ReplayMode::kOff, std::nullopt, fast);
    auto r = gw.chat_complete("h", ChatRequest::user("hello"));
    CHECK(r.text == "got hello");
    CHECK(r.output_tokens == 2);
    CHECK(gw.stats().retries == 1);
    CHECK(gw.embed("h", "x") == std::vector<double>{0.6, 0.8});
    auto ppl = gw.perplexity("h", "ctx", "ab");
    CHECK(ppl.target_token_count == 2);
    CHECK(ppl.perplexity == doctest::Approx(std::exp(1.0)));
    CHECK(code_of([&] { gw.chat_complete("bad", ChatRequest::user("x")); }) == ErrorCode::kProvider);

    server.stop();
    th.join();
  }
}
