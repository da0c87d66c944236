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

/// @file measures.hpp
/// @brief The five dataset-scale salience measures and AUROC.
///
/// Every measure yields a MeasureResult: per-sample values keyed by
/// sample_id, plus group statistics over
///
///   - `class:authentic`, `class:synthetic`
///   - `dataset:<tag>` for every dataset tag
///   - `total`
///
/// Standard deviations are population standard deviations. Aggregation runs
/// in sample_id order regardless of how many workers computed the values,
/// so results are bit-reproducible.
///
/// Samples that cannot be scored (all-zero salience, missing inputs, failed
/// provider rows) are excluded and listed, never imputed.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "salaudit/metric_kernels.hpp"
#include "salaudit/perturbation.hpp"
#include "salaudit/provider.hpp"
#include "salaudit/salience_io.hpp"

namespace salaudit {

enum class Measure { entropy, noise, resilience, focus, stability };

inline constexpr Measure kAllMeasures[] = {Measure::entropy, Measure::noise, Measure::resilience,
                                           Measure::focus, Measure::stability};

std::string_view to_string(Measure m) noexcept;
std::optional<Measure> parse_measure(std::string_view text) noexcept;

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;

  friend bool operator==(const GroupStats&, const GroupStats&) = default;
};

/// Mean and population standard deviation, summed in the order given.
GroupStats compute_stats(std::span<const double> values);

struct Series {
  std::map<std::string, double> per_sample;
  std::map<std::string, GroupStats> group_stats;

  friend bool operator==(const Series&, const Series&) = default;
};

/// Builds group statistics for `per_sample` using the manifest's labels.
Series make_series(const Manifest& manifest, std::map<std::string, double> per_sample);

enum class ExclusionKind { missing_input, degenerate, provider_failure };

std::string_view to_string(ExclusionKind kind) noexcept;

struct Exclusion {
  std::string sample_id;
  /// Empty when the sample is excluded from the whole measure.
  std::string component;
  ExclusionKind kind = ExclusionKind::missing_input;
  std::string reason;

  friend bool operator==(const Exclusion&, const Exclusion&) = default;
};

struct MeasureResult {
  Measure measure = Measure::entropy;
  /// Headline per-sample value. Empty for focus, whose two arms live in
  /// `components`.
  Series headline;
  /// Sub-results: per noise level ("salt_pepper:0.2"), per transform
  /// ("DR", "LR", ...), per focus arm ("salient", "non_salient") and focus
  /// scores ("score:original", ...).
  std::map<std::string, Series> components;
  /// Derived scalars: AUROCs, transform-group means, valid-area fractions.
  std::map<std::string, double> scalars;
  std::vector<Exclusion> exclusions;
  nlohmann::json config_echo;

  std::size_t provider_failures() const;
  friend bool operator==(const MeasureResult&, const MeasureResult&) = default;
};

struct ExecContext {
  /// Scratch directory for provider jobs; each measure uses its own
  /// subdirectory and clears it first.
  fs::path work_dir;
  unsigned jobs = 1;
};

// --- entropy ---------------------------------------------------------------

MeasureResult measure_entropy(const Manifest& manifest, const std::string& run_id,
                              const EntropyConfig& cfg, unsigned jobs = 1);

// --- noise -----------------------------------------------------------------

struct NoiseConfig {
  std::vector<NoiseKind> kinds = {NoiseKind::salt_pepper, NoiseKind::uniform_blend};
  std::vector<double> levels = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  NoiseKind reporting_kind = NoiseKind::salt_pepper;
  double reporting_level = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  /// Ascending, deduplicated levels including 0 and the reporting level.
  std::vector<double> grid() const;
};

/// Key of a noise component, e.g. "salt_pepper:0.2".
std::string noise_component(NoiseKind kind, double level);

struct NoiseCurve {
  NoiseKind kind = NoiseKind::salt_pepper;
  std::vector<double> levels;
  std::vector<double> mean_ssim;
  std::vector<std::size_t> n;
};

struct NoiseOutcome {
  MeasureResult result;
  std::vector<NoiseCurve> curves;
};

NoiseOutcome measure_noise(const Manifest& manifest, const std::string& run_id,
                           const NoiseConfig& cfg, SalienceProvider& provider,
                           const SsimConfig& ssim_cfg, const ExecContext& ctx);

// --- resilience ------------------------------------------------------------

struct ResilienceConfig {
  std::vector<TransformSpec> transforms = standard_transforms();
};

std::string_view to_string(TransformGroup group) noexcept;

/// Table-style grouping: the mean of the per-transform values within each
/// group present (shifts /8, flips /2, rotations /2 for the full set).
std::map<TransformGroup, double> group_means(
    const std::vector<std::pair<TransformSpec, double>>& per_transform);

MeasureResult measure_resilience(const Manifest& manifest, const std::string& run_id,
                                 const ResilienceConfig& cfg, SalienceProvider& provider,
                                 const SsimConfig& ssim_cfg, const ExecContext& ctx);

// --- focus -----------------------------------------------------------------

struct FocusConfig {
  double threshold_fraction = 0.5;
  std::optional<double> blur_sigma;

  FocusSpec spec(FocusRegion region) const {
    return FocusSpec{region, threshold_fraction, blur_sigma};
  }
};

MeasureResult measure_focus(const Manifest& manifest, const std::string& run_id,
                            const FocusConfig& cfg, SalienceProvider& provider,
                            const SsimConfig& ssim_cfg, const ExecContext& ctx);

// --- stability -------------------------------------------------------------

/// 2/(N(N-1)) times the sum of the N(N-1)/2 pairwise similarities.
double pairwise_mean(std::span<const double> pair_ssims, std::size_t runs);

/// Mean SSIM over all unordered pairs of `maps` (one per run).
double sample_stability(std::span<const SalienceMap> maps, const SsimConfig& cfg);

MeasureResult measure_stability(const Manifest& manifest, const std::vector<std::string>& runs,
                                const SsimConfig& cfg, unsigned jobs = 1);

// --- AUROC -----------------------------------------------------------------

/// Probability that a random synthetic sample outscores a random authentic
/// one, ties counting one half (rank-sum form). Throws DomainError unless
/// both classes are present.
double auroc(std::span<const double> scores, std::span<const ClassLabel> labels);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Operating points for "synthetic if score >= threshold", thresholds
/// descending, starting at (0,0).
std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                std::span<const ClassLabel> labels);

}  // namespace salaudit
