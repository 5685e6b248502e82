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

#include "dtaforge/manifest.hpp"

namespace dtaforge {

std::uint64_t TeacherCounts::total_dropped() const {
  std::uint64_t n = 0;
  for (const auto& [_, c] : dropped) n += c;
  return n;
}

TeacherCounts& StageManifest::teacher(const std::string& id) { return per_teacher[id]; }

void StageManifest::add_input(const std::string& t, std::uint64_t n) { teacher(t).input += n; }
void StageManifest::add_kept(const std::string& t, std::uint64_t n) { teacher(t).kept += n; }
void StageManifest::add_drop(const std::string& t, const std::string& why, std::uint64_t n) {
  teacher(t).dropped[why] += n;
}

std::uint64_t StageManifest::total_input() const {
  std::uint64_t n = 0;
  for (const auto& [_, c] : per_teacher) n += c.input;
  return n;
}

std::uint64_t StageManifest::total_kept() const {
  std::uint64_t n = 0;
  for (const auto& [_, c] : per_teacher) n += c.kept;
  return n;
}

std::uint64_t StageManifest::dropped_by(const std::string& t, const std::string& why) const {
  auto it = per_teacher.find(t);
  if (it == per_teacher.end()) return 0;
  auto d = it->second.dropped.find(why);
  return d == it->second.dropped.end() ? 0 : d->second;
}

bool StageManifest::conserved() const {
  for (const auto& [_, c] : per_teacher)
    if (!c.conserved()) return false;
  return true;
}

Json StageManifest::to_json() const {
  Json teachers = Json::object();
  for (const auto& [id, c] : per_teacher) {
    teachers[id] = Json{{"input", c.input}, {"kept", c.kept}, {"dropped", c.dropped}};
  }
  return Json{{"stage", stage},
              {"teacher_order", teacher_order},
              {"per_teacher", teachers},
              {"input_hash", input_hash},
              {"output_hash", output_hash},
              {"config_digest", config_digest},
              {"wall_time_s", wall_time_s},
              {"extra", extra}};
}

StageManifest StageManifest::from_json(const Json& j) {
  StageManifest m;
  m.stage = j.at("stage").get<std::string>();
  m.teacher_order = j.value("teacher_order", std::vector<std::string>{});
  for (const auto& [id, c] : j.at("per_teacher").items()) {
    TeacherCounts tc;
    tc.input = c.value("input", std::uint64_t{0});
    tc.kept = c.value("kept", std::uint64_t{0});
    tc.dropped = c.value("dropped", std::map<std::string, std::uint64_t>{});
    m.per_teacher[id] = std::move(tc);
  }
  m.input_hash = j.value("input_hash", std::string());
  m.output_hash = j.value("output_hash", std::string());
  m.config_digest = j.value("config_digest", std::string());
  m.wall_time_s = j.value("wall_time_s", 0.0);
  m.extra = j.value("extra", Json::object());
  return m;
}

void ManifestCounter::input(const std::string& t, std::uint64_t n) {
  std::lock_guard lock(mu_);
  acc_.add_input(t, n);
}

void ManifestCounter::kept(const std::string& t, std::uint64_t n) {
  std::lock_guard lock(mu_);
  acc_.add_kept(t, n);
}

void ManifestCounter::drop(const std::string& t, const std::string& why, std::uint64_t n) {
  std::lock_guard lock(mu_);
  acc_.add_drop(t, why, n);
}

void ManifestCounter::merge_into(StageManifest& m) const {
  std::lock_guard lock(mu_);
  for (const auto& [id, c] : acc_.per_teacher) {
    auto& dst = m.teacher(id);
    dst.input += c.input;
    dst.kept += c.kept;
    for (const auto& [why, n] : c.dropped) dst.dropped[why] += n;
  }
}

}  // namespace dtaforge
