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

#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "dtaforge/util.hpp"

namespace dtaforge {

// Drop reasons shared by the stages and the funnel report.
namespace reason {
inline constexpr const char* kUnparseable = "unparseable";
inline constexpr const char* kPeerReview = "peer-review";
inline constexpr const char* kReviewUnavailable = "review-unavailable";
inline constexpr const char* kMinHash = "minhash";
inline constexpr const char* kSemantic = "semantic";
inline constexpr const char* kQuarantined = "quarantined";
inline constexpr const char* kNoCandidate = "no-candidate";
inline constexpr const char* kAnswerDrift = "answer-drift";
inline constexpr const char* kNoFinalAnswer = "no-final-answer";
}  // namespace reason

struct TeacherCounts {
  std::uint64_t input = 0;
  std::uint64_t kept = 0;
  std::map<std::string, std::uint64_t> dropped;

  std::uint64_t total_dropped() const;
  bool conserved() const { return input == kept + total_dropped(); }
};

// Per-stage bookkeeping. Counts are keyed by the teacher that generated the
// item, so the funnel can be read per teacher.
struct StageManifest {
  std::string stage;
  std::vector<std::string> teacher_order;
  std::map<std::string, TeacherCounts> per_teacher;
  std::string input_hash;
  std::string output_hash;
  std::string config_digest;
  double wall_time_s = 0.0;
  Json extra = Json::object();

  TeacherCounts& teacher(const std::string& id);
  void add_input(const std::string& teacher, std::uint64_t n = 1);
  void add_kept(const std::string& teacher, std::uint64_t n = 1);
  void add_drop(const std::string& teacher, const std::string& why, std::uint64_t n = 1);

  std::uint64_t total_input() const;
  std::uint64_t total_kept() const;
  std::uint64_t dropped_by(const std::string& teacher, const std::string& why) const;
  // Every teacher satisfies input == kept + dropped.
  bool conserved() const;

  Json to_json() const;
  static StageManifest from_json(const Json& j);
};

// Thread-safe accumulator used while a stage's work items run concurrently.
class ManifestCounter {
 public:
  void input(const std::string& teacher, std::uint64_t n = 1);
  void kept(const std::string& teacher, std::uint64_t n = 1);
  void drop(const std::string& teacher, const std::string& why, std::uint64_t n = 1);
  void merge_into(StageManifest& m) const;

 private:
  mutable std::mutex mu_;
  StageManifest acc_;
};

}  // namespace dtaforge
