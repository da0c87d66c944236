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

/// @file provider.hpp
/// @brief Directory protocol between the analysis core and salience
/// providers, plus the built-in deterministic mock provider.
///
/// A job is a directory of PNG images and a job manifest:
///
///     images_dir/job.json
///       {"job_id": ..., "run_id": ..., "output_dir": <path>,
///        "requests": [{"sample_id", "image", "variant_tag"}, ...]}
///
/// `image` is relative to images_dir; `output_dir` is absolute or relative
/// to images_dir. The provider is invoked as
/// `<provider_command> <path to job.json>` and must exit 0 after writing
///
///     output_dir/results.json
///       {"job_id": ..., "results": [{"sample_id", "variant_tag",
///        "salience", "score", "status", "reason"?}, ...]}
///
/// with `salience` a SALM file relative to output_dir and `status` either
/// "ok" or "failed". No class hint is passed: providers explain their own
/// predicted class for every image, perturbed or not.

#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "salaudit/errors.hpp"
#include "salaudit/salience_io.hpp"

namespace salaudit {

inline constexpr const char* kJobManifestName = "job.json";
inline constexpr const char* kResultManifestName = "results.json";

struct ProviderRequest {
  std::string sample_id;
  /// Relative to the job's images_dir.
  std::string image_file;
  std::string variant_tag;
};

struct ProviderJob {
  std::string job_id;
  std::string run_id;
  fs::path images_dir;
  fs::path output_dir;
  std::vector<ProviderRequest> requests;
  /// Native resolution every returned map must have; when empty, all maps in
  /// the job must merely agree with each other.
  std::optional<Shape> expected_shape;

  fs::path manifest_path() const { return images_dir / kJobManifestName; }
};

enum class RowStatus { ok, failed };

struct ProviderRow {
  std::string sample_id;
  std::string variant_tag;
  RowStatus status = RowStatus::failed;
  std::string reason;
  fs::path salience_file;
  std::optional<SalienceMap> salience;
  double score = 0.0;
};

struct ProviderResult {
  std::string job_id;
  /// In request order.
  std::vector<ProviderRow> rows;

  const ProviderRow* find(std::string_view sample_id, std::string_view variant_tag) const;
  std::size_t failed_count() const;
};

/// Job-level failure. `partial()` holds every row that did validate.
class ProviderError : public Error {
 public:
  ProviderError(std::string job_id, std::vector<std::string> problems,
                ProviderResult partial = {});

  const std::string& job_id() const noexcept { return job_id_; }
  const std::vector<std::string>& problems() const noexcept { return problems_; }
  const ProviderResult& partial() const noexcept { return partial_; }

 private:
  std::string job_id_;
  std::vector<std::string> problems_;
  ProviderResult partial_;
};

/// Writes images_dir/job.json and returns its path.
fs::path write_job_manifest(const ProviderJob& job);

/// Reads output_dir/results.json and checks it against the job: every
/// request answered exactly once, every ok row a loadable SALM of the
/// required shape with a score in [0,1].
ProviderResult collect_result(const ProviderJob& job);

struct DispatchOptions {
  std::chrono::milliseconds timeout{std::chrono::minutes(30)};
};

/// Runs `<command> <job manifest>` through /bin/sh, waits (killing the
/// provider's process group on timeout), then validates its outputs.
ProviderResult dispatch_job(const ProviderJob& job, const std::string& command,
                            const DispatchOptions& options = {});

// --- mock provider ---------------------------------------------------------

inline constexpr std::size_t kMockGrid = 7;
inline constexpr double kMockTemperature = 0.1;

struct MockOutput {
  SalienceMap map;
  double score = 0.0;
};

/// Deterministic stand-in for a model. The image is cut into a 7x7 grid of
/// blocks (rows [r*H/7, (r+1)*H/7), same for columns); each cell holds the
/// softmax, at temperature 0.1, of its block's mean luminance, where
/// luminance is the plain channel mean. The score is the centre block's mean
/// luminance. When both sides are divisible by 7, flips and 90 degree
/// rotations of the image permute the output bit-exactly.
MockOutput mock_provider(const InputImage& image);

/// Serves a job manifest with the mock provider, writing SALM files and
/// results.json. Per-image failures become failed rows.
void serve_mock_job(const fs::path& job_manifest_path);

class SalienceProvider {
 public:
  virtual ~SalienceProvider() = default;
  virtual ProviderResult run(const ProviderJob& job) = 0;
  virtual std::string describe() const = 0;
};

/// An external provider reached through dispatch_job.
class SubprocessProvider final : public SalienceProvider {
 public:
  explicit SubprocessProvider(std::string command, DispatchOptions options = {})
      : command_(std::move(command)), options_(options) {}

  ProviderResult run(const ProviderJob& job) override {
    return dispatch_job(job, command_, options_);
  }
  std::string describe() const override { return command_; }

 private:
  std::string command_;
  DispatchOptions options_;
};

/// The mock provider served in-process through the same files and
/// validation as an external one.
class MockProvider final : public SalienceProvider {
 public:
  ProviderResult run(const ProviderJob& job) override;
  std::string describe() const override { return "builtin:mock"; }
};

}  // namespace salaudit
