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

/// @file metric_kernels.hpp
/// @brief Normalized salience entropy and global-statistics SSIM.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "salaudit/salience_io.hpp"

namespace salaudit {

enum class EntropyMode {
  /// Salience values are an un-normalized probability distribution over
  /// pixels: p_i = v_i / sum(v).
  distribution,
  /// Classic intensity histogram with `histogram_bins` bins.
  histogram,
};

std::string_view to_string(EntropyMode mode) noexcept;
std::optional<EntropyMode> parse_entropy_mode(std::string_view text) noexcept;

struct EntropyConfig {
  EntropyMode mode = EntropyMode::distribution;
  int histogram_bins = 256;

  void validate() const;
};

struct SsimConfig {
  double k1 = 0.01;
  double k2 = 0.03;
  /// L in the stabilizing constants. Empty: joint max minus joint min of the
  /// two inputs, floored at kMinDynamicRange.
  std::optional<double> dynamic_range;

  static constexpr double kMinDynamicRange = 1e-6;

  void validate() const;
};

/// Largest achievable entropy in bits for an height x width raster of the
/// given bit depth (empty = float). The effective depth is
/// min(depth, log2(height*width)); at that clamp the value is
/// log2(height*width). Throws DomainError for a zero-area raster or when a
/// very low depth drives the bound non-positive.
double max_entropy(std::size_t height, std::size_t width,
                   std::optional<int> depth_hint = std::nullopt);

/// Normalized Shannon entropy in [0,1]. Computed on the map as given; never
/// resamples. Throws DomainError for an all-zero map.
double entropy(const SalienceMap& map, const EntropyConfig& cfg = {});

/// SSIM over a single window spanning all values, with population variance
/// and covariance. Throws DimensionError when the lengths differ.
double ssim(std::span<const float> a, std::span<const float> b,
            const SsimConfig& cfg = {});
/// Same, for two maps; shapes must match exactly.
double ssim(const SalienceMap& a, const SalienceMap& b, const SsimConfig& cfg = {});

}  // namespace salaudit
