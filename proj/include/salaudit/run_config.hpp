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

/// @file run_config.hpp
/// @brief Run configuration and the end-to-end audit driver.
///
/// Exit codes:
///
///   0  every requested measure completed with no provider or input gaps
///   1  internal or I/O error
///   2  configuration or manifest invalid; nothing written
///   3  a provider job failed (nonzero exit, timeout, invalid outputs)
///   4  partial completion: some samples were dropped for failed provider
///      rows or missing inputs

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "salaudit/measures.hpp"

namespace salaudit {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitProvider = 3,
  kExitPartial = 4,
};

inline constexpr const char* kBuiltinMock = "builtin:mock";
inline constexpr const char* kProviderEnvVar = "AUDIT_PROVIDER";

struct RunConfig {
  fs::path manifest_path;
  std::string model_id = "model";
  std::optional<std::string> provider;
  double provider_timeout_s = 1800.0;
  std::vector<Measure> measures{std::begin(kAllMeasures), std::end(kAllMeasures)};
  /// Run analysed by the single-run measures; defaults to the manifest's
  /// first run.
  std::optional<std::string> run_id;
  /// Defaults to every run in the manifest.
  std::vector<std::string> stability_runs;
  EntropyConfig entropy;
  NoiseConfig noise;
  double shift_fraction = 0.2;
  ResilienceConfig resilience;
  FocusConfig focus;
  SsimConfig ssim;
  fs::path output_dir = "audit-out";
  std::uint64_t seed = 0;
  /// 0 means one per hardware thread.
  unsigned jobs = 0;
  bool keep_work = false;
};

/// Parses a config document; relative paths resolve against `base_dir`.
/// Every problem found is reported in one ConfigError.
RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir);
RunConfig load_run_config(const fs::path& path);

/// Command-line overrides applied on top of a loaded config.
struct RunOverrides {
  std::optional<unsigned> jobs;
  std::optional<std::string> provider;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> output_dir;
  std::optional<std::vector<Measure>> measures;
};

void apply_overrides(RunConfig& cfg, const RunOverrides& overrides);

/// Resolves the provider: the config or override value, else the
/// AUDIT_PROVIDER environment variable. "builtin:mock" is served in-process.
std::unique_ptr<SalienceProvider> make_provider(const RunConfig& cfg);

/// Validates the config against its manifest, runs the requested measures
/// and writes results/, summary.txt and (when all five ran) radar.json.
/// Diagnostics go to `log`.
int run_audit(const RunConfig& cfg, std::ostream& log);

}  // namespace salaudit
