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

#include "salaudit/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "salaudit/errors.hpp"

namespace salaudit {

namespace {

// Uniform double in [0,1) from the top 53 bits; std::uniform_real_distribution
// is implementation-defined and would break cross-platform reproducibility.
double unit_draw(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

struct Plane {
  Shape shape;
  std::size_t channels = 1;
  std::vector<float> values;
};

std::size_t clamp_index(long i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(n) - 1));
}

// Maps an output pixel to the input pixel it is copied from.
std::pair<std::size_t, std::size_t> source_pixel(const TransformSpec& spec, const Shape& s,
                                                 std::size_t r, std::size_t c,
                                                 long dy, long dx) {
  const std::size_t h = s.height;
  const std::size_t w = s.width;
  switch (spec.kind) {
    case TransformKind::identity:
      return {r, c};
    case TransformKind::shift:
      return {clamp_index(static_cast<long>(r) - dy, h),
              clamp_index(static_cast<long>(c) - dx, w)};
    case TransformKind::flip:
      return spec.flip_axis == FlipAxis::LR ? std::pair{r, w - 1 - c}
                                            : std::pair{h - 1 - r, c};
    case TransformKind::rotate90:
      // Square only: CW takes out(r,c) from in(n-1-c, r).
      return spec.rotation == RotationDirection::CW ? std::pair{h - 1 - c, r}
                                                    : std::pair{c, w - 1 - r};
  }
  return {r, c};
}

TransformSpec inverse_of(const TransformSpec& spec) {
  TransformSpec inv = spec;
  if (spec.kind == TransformKind::rotate90) {
    inv.rotation = spec.rotation == RotationDirection::CW ? RotationDirection::CC
                                                          : RotationDirection::CW;
  }
  return inv;
}

Plane apply_transform(const Plane& in, const TransformSpec& spec) {
  spec.check_applicable(in.shape);
  const auto [dy, dx] = spec.offsets(in.shape);
  Plane out{in.shape, in.channels, std::vector<float>(in.values.size())};
  const std::size_t w = in.shape.width;
  for (std::size_t r = 0; r < in.shape.height; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto [sr, sc] = source_pixel(spec, in.shape, r, c, dy, dx);
      const float* src = &in.values[(sr * w + sc) * in.channels];
      std::copy(src, src + in.channels, &out.values[(r * w + c) * in.channels]);
    }
  }
  return out;
}

// Half-sample symmetric reflection: ... c b a | a b c ... c | c b a ...
std::size_t reflect_index(long i, std::size_t n) {
  const long period = 2 * static_cast<long>(n);
  long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long>(n)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

std::vector<double> gaussian_kernel(double sigma) {
  const long radius = static_cast<long>(4.0 * sigma + 0.5);
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

}  // namespace

// --- noise -----------------------------------------------------------------

std::string_view to_string(NoiseKind kind) noexcept {
  return kind == NoiseKind::salt_pepper ? "salt_pepper" : "uniform_blend";
}

std::optional<NoiseKind> parse_noise_kind(std::string_view text) noexcept {
  if (text == "salt_pepper" || text == "sp") return NoiseKind::salt_pepper;
  if (text == "uniform_blend" || text == "uniform") return NoiseKind::uniform_blend;
  return std::nullopt;
}

std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t sample_seed(std::uint64_t seed, std::string_view sample_id) noexcept {
  return seed ^ stable_hash(sample_id);
}

InputImage add_noise(const InputImage& image, const NoiseSpec& spec) {
  if (!(spec.level >= 0.0 && spec.level <= 1.0)) {
    throw ConfigError(fmt::format("noise level {} outside [0,1]", spec.level));
  }
  std::mt19937_64 gen(spec.seed);
  std::vector<float> out(image.values().begin(), image.values().end());
  const std::size_t ch = image.channels();
  const std::size_t pixels = image.shape().area();
  if (spec.kind == NoiseKind::salt_pepper) {
    for (std::size_t p = 0; p < pixels; ++p) {
      const double hit = unit_draw(gen);
      const double coin = unit_draw(gen);
      if (hit < spec.level) {
        const float v = coin < 0.5 ? 0.0f : 1.0f;
        std::fill_n(&out[p * ch], ch, v);
      }
    }
  } else {
    const double keep = 1.0 - spec.level;
    for (float& v : out) {
      const double u = unit_draw(gen);
      const double blended = keep * static_cast<double>(v) + spec.level * u;
      v = static_cast<float>(std::clamp(blended, 0.0, 1.0));
    }
  }
  return InputImage::create(image.height(), image.width(), ch, std::move(out));
}

// --- transforms ------------------------------------------------------------

TransformSpec TransformSpec::identity() { return TransformSpec{}; }

TransformSpec TransformSpec::shift(ShiftDirection dir, double fraction) {
  TransformSpec s;
  s.kind = TransformKind::shift;
  s.shift_direction = dir;
  s.shift_fraction = fraction;
  return s;
}

TransformSpec TransformSpec::flip(FlipAxis axis) {
  TransformSpec s;
  s.kind = TransformKind::flip;
  s.flip_axis = axis;
  return s;
}

TransformSpec TransformSpec::rotate(RotationDirection dir) {
  TransformSpec s;
  s.kind = TransformKind::rotate90;
  s.rotation = dir;
  return s;
}

namespace {
constexpr std::pair<std::string_view, ShiftDirection> kShiftNames[] = {
    {"U", ShiftDirection::U},   {"D", ShiftDirection::D},   {"L", ShiftDirection::L},
    {"R", ShiftDirection::R},   {"UL", ShiftDirection::UL}, {"UR", ShiftDirection::UR},
    {"DL", ShiftDirection::DL}, {"DR", ShiftDirection::DR},
};
}  // namespace

TransformSpec TransformSpec::parse(std::string_view name, double shift_fraction) {
  if (name == "identity") return identity();
  if (name == "LR") return flip(FlipAxis::LR);
  if (name == "UD" || name == "TB") return flip(FlipAxis::UD);
  if (name == "90CW") return rotate(RotationDirection::CW);
  if (name == "90CC" || name == "90CCW") return rotate(RotationDirection::CC);
  for (const auto& [n, d] : kShiftNames) {
    if (n == name) return shift(d, shift_fraction);
  }
  throw ConfigError(fmt::format("unknown transform '{}'", name));
}

std::string TransformSpec::name() const {
  switch (kind) {
    case TransformKind::identity:
      return "identity";
    case TransformKind::shift:
      for (const auto& [n, d] : kShiftNames) {
        if (d == shift_direction) return std::string(n);
      }
      break;
    case TransformKind::flip:
      return flip_axis == FlipAxis::LR ? "LR" : "UD";
    case TransformKind::rotate90:
      return rotation == RotationDirection::CW ? "90CW" : "90CC";
  }
  return "?";
}

std::string TransformSpec::tag() const {
  switch (kind) {
    case TransformKind::identity:
      return "identity";
    case TransformKind::shift:
      return fmt::format("shift:{}:{}", name(), shift_fraction);
    case TransformKind::flip:
      return "flip:" + name();
    case TransformKind::rotate90:
      return "rotate90:" + name().substr(2);
  }
  return "?";
}

TransformGroup TransformSpec::group() const noexcept {
  switch (kind) {
    case TransformKind::shift:
      return TransformGroup::shifts;
    case TransformKind::flip:
      return TransformGroup::flips;
    case TransformKind::rotate90:
      return TransformGroup::rotations;
    case TransformKind::identity:
      break;
  }
  return TransformGroup::identity;
}

std::pair<long, long> TransformSpec::offsets(const Shape& shape) const noexcept {
  if (kind != TransformKind::shift) return {0, 0};
  const long dy = std::lround(shift_fraction * static_cast<double>(shape.height));
  const long dx = std::lround(shift_fraction * static_cast<double>(shape.width));
  switch (shift_direction) {
    case ShiftDirection::U: return {-dy, 0};
    case ShiftDirection::D: return {dy, 0};
    case ShiftDirection::L: return {0, -dx};
    case ShiftDirection::R: return {0, dx};
    case ShiftDirection::UL: return {-dy, -dx};
    case ShiftDirection::UR: return {-dy, dx};
    case ShiftDirection::DL: return {dy, -dx};
    case ShiftDirection::DR: return {dy, dx};
  }
  return {0, 0};
}

void TransformSpec::check_applicable(const Shape& shape) const {
  if (kind == TransformKind::rotate90 && !shape.square()) {
    throw ConfigError(fmt::format("{} requires a square raster, got {}", name(), shape.str()));
  }
  if (kind == TransformKind::shift) {
    if (!(shift_fraction > 0.0 && shift_fraction < 1.0)) {
      throw ConfigError(fmt::format("shift fraction {} outside (0,1)", shift_fraction));
    }
    const auto [dy, dx] = offsets(shape);
    const bool moves_y = shift_direction != ShiftDirection::L && shift_direction != ShiftDirection::R;
    const bool moves_x = shift_direction != ShiftDirection::U && shift_direction != ShiftDirection::D;
    if ((moves_y && (dy == 0 || std::labs(dy) >= static_cast<long>(shape.height))) ||
        (moves_x && (dx == 0 || std::labs(dx) >= static_cast<long>(shape.width)))) {
      throw ConfigError(fmt::format("shift {} by fraction {} does not move a {} raster by "
                                    "a whole pixel inside its bounds",
                                    name(), shift_fraction, shape.str()));
    }
  }
}

std::vector<TransformSpec> standard_transforms(double shift_fraction) {
  std::vector<TransformSpec> out;
  for (auto n : {"DR", "R", "UR", "D", "U", "DL", "L", "UL", "LR", "UD", "90CW", "90CC"}) {
    out.push_back(TransformSpec::parse(n, shift_fraction));
  }
  return out;
}

InputImage transform_image(const InputImage& image, const TransformSpec& spec) {
  Plane in{image.shape(), image.channels(), {image.values().begin(), image.values().end()}};
  auto out = apply_transform(in, spec);
  return InputImage::create(out.shape.height, out.shape.width, out.channels,
                            std::move(out.values));
}

SalienceMap transform_map(const SalienceMap& map, const TransformSpec& spec) {
  Plane in{map.shape(), 1, {map.values().begin(), map.values().end()}};
  auto out = apply_transform(in, spec);
  return SalienceMap::create(out.shape.height, out.shape.width, std::move(out.values),
                             map.depth_hint());
}

CorrectedMap inverse_correct(const SalienceMap& map, const TransformSpec& spec) {
  spec.check_applicable(map.shape());
  if (spec.kind != TransformKind::shift) {
    return {transform_map(map, inverse_of(spec)), ValidMask::full(map.shape())};
  }
  const auto [dy, dx] = spec.offsets(map.shape());
  const long h = static_cast<long>(map.height());
  const long w = static_cast<long>(map.width());
  // corrected(r,c) = t(r+dy, c+dx) wherever that source lies inside t.
  const long r0 = std::max(0L, -dy);
  const long r1 = std::min(h, h - dy);
  const long c0 = std::max(0L, -dx);
  const long c1 = std::min(w, w - dx);
  std::vector<float> values(map.size(), 0.0f);
  for (long r = r0; r < r1; ++r) {
    for (long c = c0; c < c1; ++c) {
      values[static_cast<std::size_t>(r * w + c)] = map.at(static_cast<std::size_t>(r + dy),
                                                           static_cast<std::size_t>(c + dx));
    }
  }
  ValidMask mask(map.shape(), static_cast<std::size_t>(r0), static_cast<std::size_t>(c0),
                 static_cast<std::size_t>(r1 - r0), static_cast<std::size_t>(c1 - c0));
  return {SalienceMap::create(map.height(), map.width(), std::move(values), map.depth_hint()),
          mask};
}

SalienceMap crop(const SalienceMap& map, const ValidMask& mask) {
  if (mask.shape() != map.shape()) {
    throw DimensionError(fmt::format("crop: mask shape {} does not match map shape {}",
                                     mask.shape().str(), map.shape().str()));
  }
  std::vector<float> values;
  values.reserve(mask.count());
  for (std::size_t r = mask.row0(); r < mask.row0() + mask.rows(); ++r) {
    for (std::size_t c = mask.col0(); c < mask.col0() + mask.cols(); ++c) {
      values.push_back(map.at(r, c));
    }
  }
  return SalienceMap::create(mask.rows(), mask.cols(), std::move(values), map.depth_hint());
}

// --- degradation -----------------------------------------------------------

std::string_view to_string(FocusRegion region) noexcept {
  return region == FocusRegion::salient ? "salient" : "non_salient";
}

double default_blur_sigma(const Shape& image_shape) noexcept {
  return 12.0 * static_cast<double>(std::min(image_shape.height, image_shape.width)) / 224.0;
}

double FocusSpec::sigma_for(const Shape& image_shape) const noexcept {
  return blur_sigma.value_or(default_blur_sigma(image_shape));
}

void FocusSpec::validate() const {
  if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0)) {
    throw ConfigError(fmt::format("focus: threshold_fraction {} outside (0,1)",
                                  threshold_fraction));
  }
  if (blur_sigma && !(*blur_sigma > 0.0)) {
    throw ConfigError(fmt::format("focus: blur_sigma must be > 0 (got {})", *blur_sigma));
  }
}

std::vector<float> upsample_bilinear(const SalienceMap& map, const Shape& target) {
  const std::size_t hi = map.height();
  const std::size_t wi = map.width();
  const double sy = static_cast<double>(hi) / static_cast<double>(target.height);
  const double sx = static_cast<double>(wi) / static_cast<double>(target.width);
  std::vector<float> out(target.area());
  for (std::size_t y = 0; y < target.height; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(hi - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, hi - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < target.width; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(wi - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, wi - 1);
      const double tx = fx - static_cast<double>(x0);
      const double top = (1.0 - tx) * map.at(y0, x0) + tx * map.at(y0, x1);
      const double bottom = (1.0 - tx) * map.at(y1, x0) + tx * map.at(y1, x1);
      out[y * target.width + x] = static_cast<float>((1.0 - ty) * top + ty * bottom);
    }
  }
  return out;
}

std::vector<std::uint8_t> salience_mask(const SalienceMap& map, const Shape& target,
                                        double threshold_fraction) {
  const auto values = map.values();
  if (std::all_of(values.begin(), values.end(), [](float v) { return v == 0.0f; })) {
    throw DomainError("salience mask undefined for an all-zero map");
  }
  const auto up = upsample_bilinear(map, target);
  const float peak = *std::max_element(up.begin(), up.end());
  const double cut = threshold_fraction * static_cast<double>(peak);
  std::vector<std::uint8_t> mask(up.size());
  for (std::size_t i = 0; i < up.size(); ++i) {
    mask[i] = static_cast<double>(up[i]) >= cut ? 1 : 0;
  }
  return mask;
}

InputImage gaussian_blur(const InputImage& image, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError(fmt::format("blur sigma must be > 0 (got {})", sigma));
  const auto kernel = gaussian_kernel(sigma);
  const long radius = static_cast<long>(kernel.size() / 2);
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  const std::size_t ch = image.channels();
  const auto src = image.values();

  std::vector<double> tmp(src.size());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t k = 0; k < ch; ++k) {
        double acc = 0.0;
        for (long t = -radius; t <= radius; ++t) {
          const std::size_t cc = reflect_index(static_cast<long>(c) + t, w);
          acc += kernel[static_cast<std::size_t>(t + radius)] * src[(r * w + cc) * ch + k];
        }
        tmp[(r * w + c) * ch + k] = acc;
      }
    }
  }
  std::vector<float> out(src.size());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t k = 0; k < ch; ++k) {
        double acc = 0.0;
        for (long t = -radius; t <= radius; ++t) {
          const std::size_t rr = reflect_index(static_cast<long>(r) + t, h);
          acc += kernel[static_cast<std::size_t>(t + radius)] * tmp[(rr * w + c) * ch + k];
        }
        out[(r * w + c) * ch + k] = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return InputImage::create(h, w, ch, std::move(out));
}

InputImage degrade_by_salience(const InputImage& image, const SalienceMap& map,
                               const FocusSpec& spec) {
  spec.validate();
  const auto mask = salience_mask(map, image.shape(), spec.threshold_fraction);
  const auto blurred = gaussian_blur(image, spec.sigma_for(image.shape()));
  const std::uint8_t blur_when = spec.region == FocusRegion::salient ? 1 : 0;
  const std::size_t ch = image.channels();
  std::vector<float> out(image.values().begin(), image.values().end());
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (mask[p] == blur_when) {
      std::copy_n(&blurred.values()[p * ch], ch, &out[p * ch]);
    }
  }
  return InputImage::create(image.height(), image.width(), ch, std::move(out));
}

}  // namespace salaudit
