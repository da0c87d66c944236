// Copyright 2026 The Salience Audit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// @file fixture.hpp
/// @brief Deterministic demo dataset scored by the mock provider.

#pragma once

#include <cstdint>

#include "salaudit/salience_io.hpp"

namespace salaudit {

struct FixtureOptions {
  std::size_t samples = 60;
  /// Images are side x side RGB; keep it a multiple of 7 so the mock
  /// provider's blocks tile it exactly.
  std::size_t side = 56;
  std::uint64_t seed = 7;
};

/// Writes images/, salience/r1 and salience/r2 (r2 scores lightly jittered
/// copies of the images), manifest.json and config.json into `dir`.
/// Synthetic samples carry a brighter centre, so the mock score separates
/// the classes. Returns the manifest path.
fs::path make_fixture(const fs::path& dir, const FixtureOptions& options = {});

}  // namespace salaudit
