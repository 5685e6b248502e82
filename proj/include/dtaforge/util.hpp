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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace dtaforge {

using Json = nlohmann::json;

// ---- hashing ---------------------------------------------------------------

std::string sha256_hex(std::string_view data);

std::uint64_t fnv1a64(std::string_view data);

// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic sub-seed for a named stochastic choice under the run seed.
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view purpose);

// ---- text ------------------------------------------------------------------

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::size_t find_ci(std::string_view haystack, std::string_view needle,
                    std::size_t from = 0);

// ---- numbers ---------------------------------------------------------------

// Shortest representation that round-trips through parse_double.
std::string format_double(double v);

// Parses the whole of `s` (after trimming) as a double; no trailing junk.
std::optional<double> parse_double(std::string_view s);

// |a - b| <= rel_tol * max(|b|, floor)
bool within_rel_tol(double a, double b, double rel_tol, double floor = 1e-9);

// ---- files -----------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);

// Writes through a temporary sibling and renames, so readers never observe a
// half-written file.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

std::vector<Json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<Json>& rows);

// ---- parallelism -----------------------------------------------------------

// Runs body(i) for i in [0, n) on up to `workers` threads. Exceptions are
// captured and the one from the lowest index is rethrown after all threads
// join, so failure reporting does not depend on scheduling.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace dtaforge
