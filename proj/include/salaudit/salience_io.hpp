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

/// @file salience_io.hpp
/// @brief Salience/image rasters, the SALM exchange format, PNG import and
/// the dataset manifest.
///
/// ## SALM layout (all integers little-endian)
///
///     offset  size  field
///     0       4     magic "SALM"
///     4       1     version (1)
///     5       1     flags, bit 0 = depth_hint present
///     6       2     reserved (0)
///     8       4     height
///     12      4     width
///     16      1     depth_hint (only when flag bit 0 is set)
///     16/17   4*h*w float32 values, row-major
///
/// Rasters are immutable once constructed; the factories validate every
/// invariant and throw on violation.

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace salaudit {

namespace fs = std::filesystem;

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t area() const noexcept { return height * width; }
  bool square() const noexcept { return height == width; }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Non-negative 2D activation raster at the model's native resolution.
/// `depth_hint()` is the bit depth of quantized sources; empty means float.
class SalienceMap {
 public:
  /// Throws ValidationError on zero dimensions, length mismatch, or
  /// negative / non-finite values.
  static SalienceMap create(std::size_t height, std::size_t width,
                            std::vector<float> values,
                            std::optional<int> depth_hint = std::nullopt);

  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return values_.size(); }
  Shape shape() const noexcept { return shape_; }
  std::span<const float> values() const noexcept { return values_; }
  float at(std::size_t row, std::size_t col) const noexcept {
    return values_[row * shape_.width + col];
  }
  std::optional<int> depth_hint() const noexcept { return depth_hint_; }

  /// Exact equality, including bit pattern of every value and depth hint.
  bool bit_equal(const SalienceMap& other) const noexcept;

 private:
  SalienceMap(Shape shape, std::vector<float> values,
              std::optional<int> depth_hint)
      : shape_(shape), values_(std::move(values)), depth_hint_(depth_hint) {}

  Shape shape_;
  std::vector<float> values_;
  std::optional<int> depth_hint_;
};

/// Interleaved image with values in [0,1] and 1 or 3 channels.
class InputImage {
 public:
  static InputImage create(std::size_t height, std::size_t width,
                           std::size_t channels, std::vector<float> values);

  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t channels() const noexcept { return channels_; }
  Shape shape() const noexcept { return shape_; }
  std::span<const float> values() const noexcept { return values_; }
  float at(std::size_t row, std::size_t col, std::size_t ch) const noexcept {
    return values_[(row * shape_.width + col) * channels_ + ch];
  }

  friend bool operator==(const InputImage&, const InputImage&) = default;

 private:
  InputImage(Shape shape, std::size_t channels, std::vector<float> values)
      : shape_(shape), channels_(channels), values_(std::move(values)) {}

  Shape shape_;
  std::size_t channels_ = 1;
  std::vector<float> values_;
};

// --- SALM / PNG ------------------------------------------------------------

inline constexpr std::size_t kSalmHeaderSize = 16;

std::vector<std::uint8_t> encode_salm(const SalienceMap& map);
/// `origin` is only used to label errors.
SalienceMap decode_salm(std::span<const std::uint8_t> bytes,
                        const std::string& origin = "<memory>");

/// Reads a SALM file or an 8-bit single-channel PNG (values k/255,
/// depth_hint 8). The format is chosen by the file signature.
SalienceMap load_salience(const fs::path& path);
void write_salience(const SalienceMap& map, const fs::path& path);
/// Writes an 8-bit grayscale PNG; values must lie in [0,1].
void write_salience_png(const SalienceMap& map, const fs::path& path);

/// Reads an 8-bit PNG (gray, gray+alpha, RGB or RGBA; alpha is dropped).
InputImage load_image(const fs::path& path);
/// Writes an 8-bit PNG, quantizing each value to round(v*255).
void write_image_png(const InputImage& image, const fs::path& path);

// --- manifest --------------------------------------------------------------

enum class ClassLabel { authentic, synthetic };

std::string_view to_string(ClassLabel label) noexcept;
std::optional<ClassLabel> parse_class_label(std::string_view text) noexcept;

struct SampleRecord {
  std::string sample_id;
  ClassLabel class_label = ClassLabel::authentic;
  std::string dataset_tag;
  std::optional<double> score;
  /// run_id -> absolute salience path
  std::map<std::string, fs::path> salience_paths;
  std::optional<fs::path> image_path;
};

struct GroupKey {
  ClassLabel class_label;
  std::string dataset_tag;
  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

struct Manifest {
  int version = 1;
  fs::path base_dir;
  std::vector<std::string> runs;
  /// Sorted by sample_id, so the input order never matters.
  std::vector<SampleRecord> samples;
  /// Partition of sample ids by (class_label, dataset_tag).
  std::map<GroupKey, std::vector<std::string>> groups;

  const SampleRecord* find(std::string_view sample_id) const noexcept;
  bool has_run(std::string_view run_id) const noexcept;
};

/// Parses and validates a manifest document. Relative paths are resolved
/// against `base_dir`. Every violation is reported in one ValidationError.
Manifest parse_manifest(std::string_view json_text, const fs::path& base_dir,
                        bool check_files = true);
Manifest load_manifest(const fs::path& path);

}  // namespace salaudit
