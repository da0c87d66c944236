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

/// @file perturbation.hpp
/// @brief Noise injection, geometric transforms with exact inverses, and
/// salience-guided blur degradation.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "salaudit/salience_io.hpp"

namespace salaudit {

// --- noise -----------------------------------------------------------------

enum class NoiseKind { salt_pepper, uniform_blend };

std::string_view to_string(NoiseKind kind) noexcept;
std::optional<NoiseKind> parse_noise_kind(std::string_view text) noexcept;

struct NoiseSpec {
  NoiseKind kind = NoiseKind::salt_pepper;
  double level = 0.0;
  std::uint64_t seed = 0;
};

/// FNV-1a 64-bit; stable across platforms and runs.
std::uint64_t stable_hash(std::string_view text) noexcept;
/// Per-sample seed: global seed XOR stable_hash(sample_id).
std::uint64_t sample_seed(std::uint64_t seed, std::string_view sample_id) noexcept;

/// salt_pepper: each pixel (all channels together) is replaced with
/// probability `level` by 0 or 1 with equal odds. uniform_blend:
/// (1-level)*x + level*u with u ~ U[0,1] drawn per value. The random stream
/// does not depend on `level`, so masks at increasing levels are nested.
InputImage add_noise(const InputImage& image, const NoiseSpec& spec);

// --- geometric transforms --------------------------------------------------

enum class TransformKind { identity, shift, flip, rotate90 };
enum class ShiftDirection { U, D, L, R, UL, UR, DL, DR };
enum class FlipAxis { LR, UD };
enum class RotationDirection { CW, CC };

/// Table grouping used when summarizing resilience.
enum class TransformGroup { identity, shifts, flips, rotations };

struct TransformSpec {
  TransformKind kind = TransformKind::identity;
  ShiftDirection shift_direction = ShiftDirection::R;
  FlipAxis flip_axis = FlipAxis::LR;
  RotationDirection rotation = RotationDirection::CW;
  double shift_fraction = 0.2;

  static TransformSpec identity();
  static TransformSpec shift(ShiftDirection dir, double fraction = 0.2);
  static TransformSpec flip(FlipAxis axis);
  static TransformSpec rotate(RotationDirection dir);

  /// Parses the short names DR, R, UR, D, U, DL, L, UL, LR, UD, 90CW, 90CC
  /// and "identity". Shifts take `shift_fraction`.
  static TransformSpec parse(std::string_view name, double shift_fraction = 0.2);

  /// Short display name ("DR", "LR", "90CW", ...).
  std::string name() const;
  /// Variant tag carried through provider jobs ("shift:DR:0.2", "flip:LR").
  std::string tag() const;
  TransformGroup group() const noexcept;

  /// Pixel offsets (dy, dx) this spec moves content by on a raster of the
  /// given shape; zero for non-shifts.
  std::pair<long, long> offsets(const Shape& shape) const noexcept;

  /// Throws ConfigError when the transform cannot act on `shape`
  /// (non-square rotation, shift rounding to zero pixels, bad fraction).
  void check_applicable(const Shape& shape) const;

  friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

/// The twelve standard transforms: eight shifts, two flips, two rotations.
std::vector<TransformSpec> standard_transforms(double shift_fraction = 0.2);

/// Flips and rotations permute pixels exactly; shifts move content by
/// round(fraction*dim) pixels and replicate the edge into vacated pixels.
InputImage transform_image(const InputImage& image, const TransformSpec& spec);
SalienceMap transform_map(const SalienceMap& map, const TransformSpec& spec);

/// Axis-aligned region of a raster that survived a transform round trip.
class ValidMask {
 public:
  static ValidMask full(Shape shape) { return ValidMask(shape, 0, 0, shape.height, shape.width); }
  ValidMask(Shape shape, std::size_t row0, std::size_t col0, std::size_t rows,
            std::size_t cols)
      : shape_(shape), row0_(row0), col0_(col0), rows_(rows), cols_(cols) {}

  Shape shape() const noexcept { return shape_; }
  std::size_t row0() const noexcept { return row0_; }
  std::size_t col0() const noexcept { return col0_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t count() const noexcept { return rows_ * cols_; }
  bool is_full() const noexcept { return count() == shape_.area(); }
  double fraction() const noexcept {
    return static_cast<double>(count()) / static_cast<double>(shape_.area());
  }
  bool contains(std::size_t row, std::size_t col) const noexcept {
    return row >= row0_ && row < row0_ + rows_ && col >= col0_ && col < col0_ + cols_;
  }

  friend bool operator==(const ValidMask&, const ValidMask&) = default;

 private:
  Shape shape_;
  std::size_t row0_ = 0;
  std::size_t col0_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

struct CorrectedMap {
  /// Pixels outside `mask` are zero and carry no information.
  SalienceMap map;
  ValidMask mask;
};

/// Undoes `spec` on a salience map computed for a transformed input. Flips
/// and rotations return a full mask; shifts return the overlap rectangle.
CorrectedMap inverse_correct(const SalienceMap& map, const TransformSpec& spec);

/// Copy of the values of `map` inside `mask`, as a standalone raster.
SalienceMap crop(const SalienceMap& map, const ValidMask& mask);

// --- salience-guided degradation -------------------------------------------

enum class FocusRegion { salient, non_salient };

std::string_view to_string(FocusRegion region) noexcept;

struct FocusSpec {
  FocusRegion region = FocusRegion::salient;
  double threshold_fraction = 0.5;
  /// Gaussian std in pixels. Empty: 12 px per 224 px of the shorter side.
  std::optional<double> blur_sigma;

  double sigma_for(const Shape& image_shape) const noexcept;
  void validate() const;
};

double default_blur_sigma(const Shape& image_shape) noexcept;

/// Bilinear resize with half-pixel centers and edge clamping.
std::vector<float> upsample_bilinear(const SalienceMap& map, const Shape& target);

/// Binary mask of pixels whose upsampled salience reaches
/// threshold_fraction of the upsampled maximum. Throws DomainError for an
/// all-zero map.
std::vector<std::uint8_t> salience_mask(const SalienceMap& map, const Shape& target,
                                        double threshold_fraction);

/// Separable Gaussian blur, kernel radius round(4*sigma), half-sample
/// symmetric (reflect) padding.
InputImage gaussian_blur(const InputImage& image, double sigma);

/// Blurs the salient region (mask true) or its complement; every other
/// pixel is passed through bit-exact.
InputImage degrade_by_salience(const InputImage& image, const SalienceMap& map,
                               const FocusSpec& spec);

}  // namespace salaudit
