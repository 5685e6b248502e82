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

// Exercises the shared library through its C interface only.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "doctest.h"
#include "dtaforge/dtaforge.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  dta_string_free(s);
  return out;
}

struct Config {
  dta_config* p = nullptr;
  ~Config() { dta_config_free(p); }
};

struct Run {
  dta_run* p = nullptr;
  ~Run() { dta_run_close(p); }
};

fs::path scratch(const char* tag) {
  std::random_device rd;
  auto p = fs::temp_directory_path() / (std::string("dtaforge-capi-") + tag + std::to_string(rd()));
  fs::create_directories(p);
  return p;
}

const fs::path kToy = fs::path(DTAFORGE_SOURCE_DIR) / "configs" / "toy.json";

}  // namespace

TEST_CASE("status strings and version") {
  CHECK(std::string(dta_version()).size() > 0);
  CHECK(std::string(dta_status_string(DTA_OK)) == "ok");
  CHECK(std::string(dta_status_string(DTA_ERR_REPLAY_MISS)).find("replay") != std::string::npos);
}

TEST_CASE("bad arguments and bad configs report errors") {
  Config c;
  CHECK(dta_config_from_json(nullptr, nullptr, &c.p) == DTA_ERR_INVALID_ARGUMENT);
  CHECK(dta_config_from_json("{not json", nullptr, &c.p) == DTA_ERR_PARSE);
  CHECK(std::string(dta_last_error()).size() > 0);
  CHECK(dta_config_from_json(R"({"bogus": 1})", nullptr, &c.p) == DTA_ERR_CONFIG);
  CHECK(std::string(dta_last_error()).find("bogus") != std::string::npos);
  CHECK(dta_config_load("/nonexistent/cfg.json", &c.p) != DTA_OK);
  CHECK(c.p == nullptr);
}

TEST_CASE("validate, digest and setters") {
  Config c;
  REQUIRE(dta_config_load(kToy.c_str(), &c.p) == DTA_OK);
  int ok = 0;
  char* rep = nullptr;
  REQUIRE(dta_config_validate(c.p, &ok, &rep) == DTA_OK);
  CHECK(ok == 1);
  CHECK(take(rep).find("\"violations\"") != std::string::npos);

  char* d = nullptr;
  REQUIRE(dta_config_digest(c.p, &d) == DTA_OK);
  auto digest = take(d);
  CHECK(digest.size() == 64);
  CHECK(dta_config_set_workers(c.p, 2) == DTA_OK);
  CHECK(dta_config_set_replay_mode(c.p, "off") == DTA_OK);
  REQUIRE(dta_config_digest(c.p, &d) == DTA_OK);
  CHECK(take(d) == digest);
  CHECK(dta_config_set_seed(c.p, 5) == DTA_OK);
  REQUIRE(dta_config_digest(c.p, &d) == DTA_OK);
  CHECK(take(d) != digest);
  CHECK(dta_config_set_replay_mode(c.p, "sometimes") != DTA_OK);
  CHECK(dta_config_set_workers(c.p, 0) != DTA_OK);

  char* js = nullptr;
  REQUIRE(dta_config_to_json(c.p, &js) == DTA_OK);
  Config again;
  CHECK(dta_config_from_json(take(js).c_str(), nullptr, &again.p) == DTA_OK);
}

TEST_CASE("formula helpers") {
  char* out = nullptr;
  REQUIRE(dta_formula_canonical("b*a + 0", &out) == DTA_OK);
  auto a = take(out);
  REQUIRE(dta_formula_canonical("a*b", &out) == DTA_OK);
  CHECK(take(out) == a);
  CHECK(dta_formula_canonical("(a+", &out) == DTA_ERR_PARSE);
  int eq = 0;
  REQUIRE(dta_formula_equivalent("10*log10(x)", "log10(x^10)", 1, 1e-9, &eq) == DTA_OK);
  CHECK(eq == 1);
  REQUIRE(dta_formula_equivalent("x+1", "x+2", 1, 1e-9, &eq) == DTA_OK);
  CHECK(eq == 0);
}

TEST_CASE("run, report and compare through the handle API") {
  auto dir = scratch("run");
  Config c;
  REQUIRE(dta_config_load(kToy.c_str(), &c.p) == DTA_OK);
  REQUIRE(dta_config_set_replay_mode(c.p, "off") == DTA_OK);
  Run r;
  REQUIRE(dta_run_open(c.p, (dir / "a").c_str(), &r.p) == DTA_OK);
  int code = -1;
  char* summary = nullptr;
  REQUIRE(dta_run_execute(r.p, "init,phase1", &code, &summary) == DTA_OK);
  auto s = take(summary);
  INFO(s);
  CHECK(code == 0);
  CHECK(s.find("final_hash") != std::string::npos);
  CHECK(dta_run_execute(r.p, "phase9", &code, nullptr) != DTA_OK);

  char* rep = nullptr;
  REQUIRE(dta_report((dir / "a").c_str(), &rep) == DTA_OK);
  CHECK(take(rep).find("Generated") != std::string::npos);
  CHECK(dta_report((dir / "empty").c_str(), &rep) == DTA_ERR_IO);

  int equal = 0;
  REQUIRE(dta_compare_runs((dir / "a").c_str(), (dir / "a").c_str(), &equal, nullptr) == DTA_OK);
  CHECK(equal == 1);
  fs::remove_all(dir);
}
