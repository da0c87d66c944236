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

#include "salaudit/salience_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "salaudit/errors.hpp"

namespace salaudit {

namespace {

constexpr std::array<std::uint8_t, 4> kSalmMagic = {'S', 'A', 'L', 'M'};
constexpr std::array<std::uint8_t, 8> kPngMagic = {0x89, 'P', 'N', 'G',
                                                   '\r', '\n', 0x1a, '\n'};
constexpr std::uint8_t kSalmVersion = 1;
constexpr std::uint8_t kFlagDepthHint = 0x01;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[off + i]} << (8 * i);
  return v;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string(), "file", "cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("{}: cannot open for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(fmt::format("{}: write failed", path.string()));
}

template <std::size_t N>
bool starts_with(std::span<const std::uint8_t> bytes,
                 const std::array<std::uint8_t, N>& magic) {
  return bytes.size() >= N && std::equal(magic.begin(), magic.end(), bytes.begin());
}

// RAII holder for libpng's simplified API.
struct PngImage {
  png_image image{};
  PngImage() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

struct DecodedPng {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

DecodedPng decode_png(std::span<const std::uint8_t> bytes, const std::string& origin,
                      bool gray_only) {
  PngImage png;
  if (!png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size())) {
    throw LoadError(origin, "png", png.image.message);
  }
  const auto fmt_in = png.image.format;
  if (fmt_in & PNG_FORMAT_FLAG_LINEAR) {
    throw LoadError(origin, "bit depth", "only 8-bit PNG is supported");
  }
  if (gray_only && (fmt_in & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA))) {
    throw LoadError(origin, "channels", "salience PNG must be single-channel gray");
  }
  DecodedPng out;
  out.height = png.image.height;
  out.width = png.image.width;
  const bool color = (fmt_in & PNG_FORMAT_FLAG_COLOR) != 0;
  out.channels = color ? 3 : 1;
  png.image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  // Alpha is discarded rather than composited; 8-bit sRGB in and out is an
  // identity transform in libpng.
  if (fmt_in & PNG_FORMAT_FLAG_ALPHA) png.image.format |= PNG_FORMAT_FLAG_ALPHA;
  const std::size_t stride_channels = out.channels + ((fmt_in & PNG_FORMAT_FLAG_ALPHA) ? 1 : 0);
  std::vector<std::uint8_t> raw(out.height * out.width * stride_channels);
  if (!png_image_finish_read(&png.image, nullptr, raw.data(), 0, nullptr)) {
    throw LoadError(origin, "png", png.image.message);
  }
  if (stride_channels == out.channels) {
    out.pixels = std::move(raw);
  } else {
    out.pixels.reserve(out.height * out.width * out.channels);
    for (std::size_t i = 0; i < out.height * out.width; ++i) {
      for (std::size_t c = 0; c < out.channels; ++c) {
        out.pixels.push_back(raw[i * stride_channels + c]);
      }
    }
  }
  return out;
}

void encode_png(const fs::path& path, std::size_t height, std::size_t width,
                std::size_t channels, std::span<const std::uint8_t> pixels) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(width);
  png.image.height = static_cast<png_uint_32>(height);
  png.image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png.image, path.c_str(), 0, pixels.data(), 0,
                               nullptr)) {
    throw Error(fmt::format("{}: png write failed: {}", path.string(), png.image.message));
  }
}

std::uint8_t quantize_unit(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

std::string Shape::str() const { return fmt::format("{}x{}", height, width); }

// --- rasters ---------------------------------------------------------------

SalienceMap SalienceMap::create(std::size_t height, std::size_t width,
                                std::vector<float> values,
                                std::optional<int> depth_hint) {
  std::vector<std::string> bad;
  if (height == 0 || width == 0) {
    bad.push_back(fmt::format("dimensions must be positive (got {}x{})", height, width));
  } else if (values.size() != height * width) {
    bad.push_back(fmt::format("payload length mismatch: expected {} values, got {}",
                              height * width, values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      bad.push_back(fmt::format("values: non-finite value at index {}", i));
      break;
    }
    if (values[i] < 0.0f) {
      bad.push_back(fmt::format("values: negative value {} at index {}", values[i], i));
      break;
    }
  }
  if (depth_hint && (*depth_hint < 1 || *depth_hint > 64)) {
    bad.push_back(fmt::format("depth_hint: {} outside [1,64]", *depth_hint));
  }
  if (!bad.empty()) throw ValidationError(std::move(bad));
  return SalienceMap(Shape{height, width}, std::move(values), depth_hint);
}

bool SalienceMap::bit_equal(const SalienceMap& other) const noexcept {
  return shape_ == other.shape_ && depth_hint_ == other.depth_hint_ &&
         values_.size() == other.values_.size() &&
         std::memcmp(values_.data(), other.values_.data(),
                     values_.size() * sizeof(float)) == 0;
}

InputImage InputImage::create(std::size_t height, std::size_t width,
                              std::size_t channels, std::vector<float> values) {
  std::vector<std::string> bad;
  if (height == 0 || width == 0) {
    bad.push_back(fmt::format("dimensions must be positive (got {}x{})", height, width));
  }
  if (channels != 1 && channels != 3) {
    bad.push_back(fmt::format("channels must be 1 or 3 (got {})", channels));
  }
  if (values.size() != height * width * channels) {
    bad.push_back(fmt::format("payload length mismatch: expected {} values, got {}",
                              height * width * channels, values.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0f && values[i] <= 1.0f)) {
      bad.push_back(fmt::format("values: {} at index {} outside [0,1]", values[i], i));
      break;
    }
  }
  if (!bad.empty()) throw ValidationError(std::move(bad));
  return InputImage(Shape{height, width}, channels, std::move(values));
}

// --- SALM ------------------------------------------------------------------

std::vector<std::uint8_t> encode_salm(const SalienceMap& map) {
  std::vector<std::uint8_t> out;
  const bool has_depth = map.depth_hint().has_value();
  out.reserve(kSalmHeaderSize + (has_depth ? 1 : 0) + map.size() * 4);
  for (std::uint8_t b : kSalmMagic) out.push_back(b);
  out.push_back(kSalmVersion);
  out.push_back(has_depth ? kFlagDepthHint : 0);
  out.push_back(0);
  out.push_back(0);
  put_u32(out, static_cast<std::uint32_t>(map.height()));
  put_u32(out, static_cast<std::uint32_t>(map.width()));
  if (has_depth) out.push_back(static_cast<std::uint8_t>(*map.depth_hint()));
  for (float v : map.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

SalienceMap decode_salm(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < kSalmHeaderSize) {
    throw LoadError(origin, "header", "truncated header");
  }
  if (!starts_with(bytes, kSalmMagic)) throw LoadError(origin, "magic", "not a SALM file");
  if (bytes[4] != kSalmVersion) {
    throw LoadError(origin, "version", fmt::format("unsupported version {}", bytes[4]));
  }
  const std::uint8_t flags = bytes[5];
  if (flags & ~kFlagDepthHint) {
    throw LoadError(origin, "flags", fmt::format("unknown flag bits 0x{:02x}", flags));
  }
  if (bytes[6] != 0 || bytes[7] != 0) throw LoadError(origin, "reserved", "must be zero");
  const std::size_t height = get_u32(bytes, 8);
  const std::size_t width = get_u32(bytes, 12);
  if (height == 0 || width == 0) {
    throw LoadError(origin, "dimensions", fmt::format("{}x{} is empty", height, width));
  }
  std::size_t offset = kSalmHeaderSize;
  std::optional<int> depth_hint;
  if (flags & kFlagDepthHint) {
    if (bytes.size() < offset + 1) throw LoadError(origin, "depth_hint", "truncated header");
    depth_hint = bytes[offset++];
  }
  const std::size_t payload = bytes.size() - offset;
  if (payload != height * width * 4) {
    throw LoadError(origin, "payload length mismatch",
                    fmt::format("{}x{} needs {} bytes, found {}", height, width,
                                height * width * 4, payload));
  }
  std::vector<float> values(height * width);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes, offset + 4 * i));
  }
  try {
    return SalienceMap::create(height, width, std::move(values), depth_hint);
  } catch (const ValidationError& e) {
    throw LoadError(origin, "values", e.what());
  }
}

SalienceMap load_salience(const fs::path& path) {
  const auto bytes = read_file(path);
  if (starts_with(std::span<const std::uint8_t>(bytes), kPngMagic)) {
    auto png = decode_png(bytes, path.string(), /*gray_only=*/true);
    std::vector<float> values(png.pixels.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = static_cast<float>(png.pixels[i]) / 255.0f;
    }
    return SalienceMap::create(png.height, png.width, std::move(values), 8);
  }
  return decode_salm(bytes, path.string());
}

void write_salience(const SalienceMap& map, const fs::path& path) {
  write_file(path, encode_salm(map));
}

void write_salience_png(const SalienceMap& map, const fs::path& path) {
  std::vector<std::uint8_t> pixels(map.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const float v = map.values()[i];
    if (v > 1.0f) {
      throw DomainError(fmt::format("{}: value {} exceeds 1, cannot export as 8-bit",
                                    path.string(), v));
    }
    pixels[i] = quantize_unit(v);
  }
  encode_png(path, map.height(), map.width(), 1, pixels);
}

InputImage load_image(const fs::path& path) {
  const auto bytes = read_file(path);
  if (!starts_with(std::span<const std::uint8_t>(bytes), kPngMagic)) {
    throw LoadError(path.string(), "signature", "not a PNG file");
  }
  auto png = decode_png(bytes, path.string(), /*gray_only=*/false);
  std::vector<float> values(png.pixels.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<float>(png.pixels[i]) / 255.0f;
  }
  return InputImage::create(png.height, png.width, png.channels, std::move(values));
}

void write_image_png(const InputImage& image, const fs::path& path) {
  std::vector<std::uint8_t> pixels(image.values().size());
  std::transform(image.values().begin(), image.values().end(), pixels.begin(),
                 quantize_unit);
  encode_png(path, image.height(), image.width(), image.channels(), pixels);
}

// --- manifest --------------------------------------------------------------

std::string_view to_string(ClassLabel label) noexcept {
  return label == ClassLabel::authentic ? "authentic" : "synthetic";
}

std::optional<ClassLabel> parse_class_label(std::string_view text) noexcept {
  if (text == "authentic") return ClassLabel::authentic;
  if (text == "synthetic") return ClassLabel::synthetic;
  return std::nullopt;
}

const SampleRecord* Manifest::find(std::string_view sample_id) const noexcept {
  auto it = std::lower_bound(samples.begin(), samples.end(), sample_id,
                             [](const SampleRecord& s, std::string_view id) {
                               return s.sample_id < id;
                             });
  return (it != samples.end() && it->sample_id == sample_id) ? &*it : nullptr;
}

bool Manifest::has_run(std::string_view run_id) const noexcept {
  return std::find(runs.begin(), runs.end(), run_id) != runs.end();
}

Manifest parse_manifest(std::string_view json_text, const fs::path& base_dir,
                        bool check_files) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("manifest is not valid JSON: {}", e.what()));
  }
  std::vector<std::string> bad;
  Manifest m;
  m.base_dir = base_dir;
  if (!doc.is_object()) throw ValidationError("manifest root must be an object");

  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    bad.emplace_back("version: missing or not an integer");
  } else {
    m.version = doc["version"].get<int>();
    if (m.version != 1) bad.push_back(fmt::format("version: unsupported {}", m.version));
  }

  std::set<std::string> run_set;
  if (!doc.contains("runs") || !doc["runs"].is_array()) {
    bad.emplace_back("runs: missing or not an array");
  } else {
    for (const auto& r : doc["runs"]) {
      if (!r.is_string()) {
        bad.emplace_back("runs: entries must be strings");
        continue;
      }
      auto id = r.get<std::string>();
      if (!run_set.insert(id).second) bad.push_back(fmt::format("runs: duplicate run '{}'", id));
      m.runs.push_back(std::move(id));
    }
  }

  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
  };

  std::set<std::string> ids;
  if (!doc.contains("samples") || !doc["samples"].is_array()) {
    bad.emplace_back("samples: missing or not an array");
  } else {
    std::size_t index = 0;
    for (const auto& s : doc["samples"]) {
      const std::string where = fmt::format("samples[{}]", index++);
      if (!s.is_object()) {
        bad.push_back(where + ": must be an object");
        continue;
      }
      SampleRecord rec;
      if (!s.contains("sample_id") || !s["sample_id"].is_string()) {
        bad.push_back(where + ": sample_id missing or not a string");
        continue;
      }
      rec.sample_id = s["sample_id"].get<std::string>();
      const std::string who = fmt::format("sample '{}'", rec.sample_id);
      if (!ids.insert(rec.sample_id).second) {
        bad.push_back(fmt::format("duplicate sample_id '{}'", rec.sample_id));
      }
      if (!s.contains("class_label") || !s["class_label"].is_string()) {
        bad.push_back(who + ": class_label missing");
      } else if (auto label = parse_class_label(s["class_label"].get<std::string>())) {
        rec.class_label = *label;
      } else {
        bad.push_back(fmt::format("{}: class_label '{}' is not authentic|synthetic", who,
                                  s["class_label"].get<std::string>()));
      }
      if (!s.contains("dataset_tag") || !s["dataset_tag"].is_string()) {
        bad.push_back(who + ": dataset_tag missing");
      } else {
        rec.dataset_tag = s["dataset_tag"].get<std::string>();
      }
      if (s.contains("score") && !s["score"].is_null()) {
        if (!s["score"].is_number() || !std::isfinite(s["score"].get<double>())) {
          bad.push_back(who + ": score must be a finite number");
        } else {
          rec.score = s["score"].get<double>();
        }
      }
      if (s.contains("image_path") && !s["image_path"].is_null()) {
        if (!s["image_path"].is_string()) {
          bad.push_back(who + ": image_path must be a string");
        } else {
          rec.image_path = resolve(s["image_path"].get<std::string>());
          if (check_files && !fs::exists(*rec.image_path)) {
            bad.push_back(fmt::format("{}: missing file {}", who, rec.image_path->string()));
          }
        }
      }
      if (s.contains("salience")) {
        if (!s["salience"].is_object()) {
          bad.push_back(who + ": salience must be an object run_id -> path");
        } else {
          for (const auto& [run, p] : s["salience"].items()) {
            if (!run_set.count(run)) {
              bad.push_back(fmt::format("{}: run '{}' is not listed in runs", who, run));
            }
            if (!p.is_string()) {
              bad.push_back(fmt::format("{}: salience path for run '{}' must be a string", who, run));
              continue;
            }
            auto path = resolve(p.get<std::string>());
            if (check_files && !fs::exists(path)) {
              bad.push_back(fmt::format("{}: missing file {}", who, path.string()));
            }
            rec.salience_paths.emplace(run, std::move(path));
          }
        }
      }
      m.samples.push_back(std::move(rec));
    }
  }
  if (!bad.empty()) throw ValidationError(std::move(bad));

  std::sort(m.samples.begin(), m.samples.end(),
            [](const SampleRecord& a, const SampleRecord& b) { return a.sample_id < b.sample_id; });
  for (const auto& s : m.samples) {
    m.groups[GroupKey{s.class_label, s.dataset_tag}].push_back(s.sample_id);
  }
  return m;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), "file", "cannot open manifest");
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_manifest(text, fs::absolute(path).parent_path());
}

}  // namespace salaudit
