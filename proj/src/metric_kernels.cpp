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

#include "salaudit/metric_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "salaudit/errors.hpp"

namespace salaudit {

namespace {

// Floating-point overshoot tolerated past the [0,1] bounds before clamping.
constexpr double kNormalizationSlack = 1e-12;

double clamp_normalized(double value, std::string_view what) {
  if (value > 1.0) {
    if (value - 1.0 > kNormalizationSlack) {
      throw DomainError(fmt::format(
          "{} entropy {} exceeds its normalization bound; the depth hint is too "
          "coarse for this raster size",
          what, value));
    }
    return 1.0;
  }
  return value < 0.0 ? 0.0 : value;
}

double distribution_entropy_bits(std::span<const float> values) {
  double total = 0.0;
  for (float v : values) total += v;
  if (!(total > 0.0)) {
    throw DomainError("entropy undefined for empty distribution");
  }
  double acc = 0.0;
  for (float v : values) {
    if (v > 0.0f) {
      const double p = static_cast<double>(v) / total;
      acc += p * std::log2(p);
    }
  }
  // 0.0 - x keeps a point mass at +0.0 rather than -0.0.
  return 0.0 - acc;
}

double histogram_entropy_bits(const SalienceMap& map, int bins) {
  const auto values = map.values();
  if (std::all_of(values.begin(), values.end(), [](float v) { return v == 0.0f; })) {
    throw DomainError("entropy undefined for empty distribution");
  }
  // Quantized sources are histogrammed over their full [0,1] scale so each
  // code k/(2^p - 1) lands in its own bin; float maps use their own range.
  double lo = 0.0;
  double hi = 1.0;
  if (!map.depth_hint()) {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  const double span = hi - lo;
  for (float v : values) {
    std::size_t bin = 0;
    if (span > 0.0) {
      const double pos = std::floor((static_cast<double>(v) - lo) / span * bins);
      bin = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    }
    ++counts[bin];
  }
  const double n = static_cast<double>(values.size());
  double acc = 0.0;
  for (std::size_t c : counts) {
    if (c > 0) {
      const double p = static_cast<double>(c) / n;
      acc += p * std::log2(p);
    }
  }
  return 0.0 - acc;
}

}  // namespace

std::string_view to_string(EntropyMode mode) noexcept {
  return mode == EntropyMode::distribution ? "distribution" : "histogram";
}

std::optional<EntropyMode> parse_entropy_mode(std::string_view text) noexcept {
  if (text == "distribution") return EntropyMode::distribution;
  if (text == "histogram") return EntropyMode::histogram;
  return std::nullopt;
}

void EntropyConfig::validate() const {
  if (mode == EntropyMode::histogram && histogram_bins < 2) {
    throw ConfigError(fmt::format("entropy: histogram_bins must be >= 2 (got {})",
                                  histogram_bins));
  }
}

void SsimConfig::validate() const {
  std::vector<std::string> bad;
  if (!(k1 > 0.0) || !std::isfinite(k1)) bad.push_back(fmt::format("ssim: k1 must be > 0 (got {})", k1));
  if (!(k2 > 0.0) || !std::isfinite(k2)) bad.push_back(fmt::format("ssim: k2 must be > 0 (got {})", k2));
  if (dynamic_range && (!(*dynamic_range > 0.0) || !std::isfinite(*dynamic_range))) {
    bad.push_back(fmt::format("ssim: dynamic_range must be > 0 (got {})", *dynamic_range));
  }
  if (!bad.empty()) {
    std::string msg;
    for (const auto& b : bad) msg += (msg.empty() ? "" : "; ") + b;
    throw ConfigError(msg);
  }
}

double max_entropy(std::size_t height, std::size_t width, std::optional<int> depth_hint) {
  const std::size_t area = height * width;
  if (area == 0) throw DomainError("max_entropy: zero-area map");
  const double nm = static_cast<double>(area);
  const double log_area = std::log2(nm);
  if (!depth_hint || std::ldexp(1.0, *depth_hint) >= nm) return log_area;
  const double p = *depth_hint;
  const double bound = -nm * (log_area - 2.0 * p) / std::ldexp(1.0, *depth_hint);
  if (!(bound > 0.0)) {
    throw DomainError(fmt::format(
        "max_entropy: depth {} is too coarse for a {}x{} raster (bound {} bits)",
        *depth_hint, height, width, bound));
  }
  return bound;
}

double entropy(const SalienceMap& map, const EntropyConfig& cfg) {
  cfg.validate();
  if (cfg.mode == EntropyMode::histogram) {
    const double bits = histogram_entropy_bits(map, cfg.histogram_bins);
    return clamp_normalized(bits / std::log2(static_cast<double>(cfg.histogram_bins)),
                            "histogram");
  }
  const double bits = distribution_entropy_bits(map.values());
  return clamp_normalized(bits / max_entropy(map.height(), map.width(), map.depth_hint()),
                          "distribution");
}

double ssim(std::span<const float> a, std::span<const float> b, const SsimConfig& cfg) {
  if (a.size() != b.size()) {
    throw DimensionError(fmt::format("ssim: length mismatch ({} vs {})", a.size(), b.size()));
  }
  if (a.empty()) throw DimensionError("ssim: empty input");
  cfg.validate();

  const double n = static_cast<double>(a.size());
  double sum_a = 0.0;
  double sum_b = 0.0;
  float lo = a[0];
  float hi = a[0];
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum_a += a[i];
    sum_b += b[i];
    lo = std::min({lo, a[i], b[i]});
    hi = std::max({hi, a[i], b[i]});
  }
  const double mu_a = sum_a / n;
  const double mu_b = sum_b / n;
  double var_a = 0.0;
  double var_b = 0.0;
  double cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mu_a;
    const double db = b[i] - mu_b;
    var_a += da * da;
    var_b += db * db;
    cov += da * db;
  }
  var_a /= n;
  var_b /= n;
  cov /= n;

  const double range = cfg.dynamic_range.value_or(
      std::max(static_cast<double>(hi) - static_cast<double>(lo), SsimConfig::kMinDynamicRange));
  const double eps1 = (cfg.k1 * range) * (cfg.k1 * range);
  const double eps2 = (cfg.k2 * range) * (cfg.k2 * range);

  const double num = (2.0 * mu_a * mu_b + eps1) * (2.0 * cov + eps2);
  const double den = (mu_a * mu_a + mu_b * mu_b + eps1) * (var_a + var_b + eps2);
  return num / den;
}

double ssim(const SalienceMap& a, const SalienceMap& b, const SsimConfig& cfg) {
  if (a.shape() != b.shape()) {
    throw DimensionError(fmt::format("ssim: shape mismatch ({} vs {})", a.shape().str(),
                                     b.shape().str()));
  }
  return ssim(a.values(), b.values(), cfg);
}

}  // namespace salaudit
