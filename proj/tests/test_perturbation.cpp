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

#include <doctest.h>

#include "salaudit/errors.hpp"
#include "salaudit/perturbation.hpp"
#include "support.hpp"

using namespace salaudit;

namespace {

// Pixel (r, c) of a ramp image holds a value unique to (r, c).
InputImage labeled_ramp(std::size_t h, std::size_t w) {
  std::vector<float> v(h * w);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i) / static_cast<float>(v.size());
  return InputImage::create(h, w, 1, std::move(v));
}

struct Offsets {
  long dy;
  long dx;
};

// Expected content motion per direction; y grows downwards.
Offsets expected_motion(ShiftDirection d, long k) {
  switch (d) {
    case ShiftDirection::U: return {-k, 0};
    case ShiftDirection::D: return {k, 0};
    case ShiftDirection::L: return {0, -k};
    case ShiftDirection::R: return {0, k};
    case ShiftDirection::UL: return {-k, -k};
    case ShiftDirection::UR: return {-k, k};
    case ShiftDirection::DL: return {k, -k};
    case ShiftDirection::DR: return {k, k};
  }
  return {0, 0};
}

constexpr ShiftDirection kDirections[] = {ShiftDirection::U,  ShiftDirection::D,  ShiftDirection::L,
                                          ShiftDirection::R,  ShiftDirection::UL, ShiftDirection::UR,
                                          ShiftDirection::DL, ShiftDirection::DR};

long double reference_blur_at(const InputImage& img, std::size_t r, std::size_t c, std::size_t ch,
                              double sigma) {
  const long radius = static_cast<long>(4.0 * sigma + 0.5);
  auto reflect = [](long i, long n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };
  long double norm = 0.0L;
  for (long t = -radius; t <= radius; ++t) norm += std::exp(-0.5L * t * t / (sigma * sigma));
  long double acc = 0.0L;
  for (long a = -radius; a <= radius; ++a) {
    for (long b = -radius; b <= radius; ++b) {
      const long double wgt = std::exp(-0.5L * a * a / (sigma * sigma)) * std::exp(-0.5L * b * b / (sigma * sigma)) /
                              (norm * norm);
      const long rr = reflect(static_cast<long>(r) + a, static_cast<long>(img.height()));
      const long cc = reflect(static_cast<long>(c) + b, static_cast<long>(img.width()));
      acc += wgt * img.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc), ch);
    }
  }
  return acc;
}

}  // namespace

TEST_CASE("noise basics") {
  std::mt19937_64 rng(21);
  const auto img = testing::random_image(rng, 16, 16);
  for (auto kind : {NoiseKind::salt_pepper, NoiseKind::uniform_blend}) {
    CHECK(add_noise(img, {kind, 0.0, 9}) == img);
    CHECK(add_noise(img, {kind, 0.4, 9}) == add_noise(img, {kind, 0.4, 9}));
    CHECK_FALSE(add_noise(img, {kind, 0.4, 9}) == add_noise(img, {kind, 0.4, 10}));
  }
  const auto other = testing::random_image(rng, 16, 16);
  CHECK(add_noise(img, {NoiseKind::uniform_blend, 1.0, 3}) == add_noise(other, {NoiseKind::uniform_blend, 1.0, 3}));
  CHECK_THROWS_AS(add_noise(img, {NoiseKind::salt_pepper, 1.5, 3}), Error);
}

TEST_CASE("salt and pepper alters the requested fraction of pixels") {
  const auto grey = testing::constant_image(224, 224, 3, 0.5f);
  const auto noisy = add_noise(grey, {NoiseKind::salt_pepper, 0.3, 42});
  std::size_t altered = 0;
  for (std::size_t r = 0; r < 224; ++r) {
    for (std::size_t c = 0; c < 224; ++c) {
      const float v0 = noisy.at(r, c, 0);
      if (v0 != 0.5f) {
        ++altered;
        CHECK((v0 == 0.0f || v0 == 1.0f));
        CHECK(noisy.at(r, c, 1) == v0);
        CHECK(noisy.at(r, c, 2) == v0);
      }
    }
  }
  CHECK(std::abs(static_cast<double>(altered) / (224.0 * 224.0) - 0.3) < 0.01);
}

TEST_CASE("uniform blend deviation grows with level") {
  std::mt19937_64 rng(22);
  const auto img = testing::random_image(rng, 32, 32);
  double prev = 0.0;
  for (int i = 1; i <= 9; ++i) {
    const auto noisy = add_noise(img, {NoiseKind::uniform_blend, i / 10.0, 5});
    double mad = 0.0;
    for (std::size_t k = 0; k < img.values().size(); ++k) mad += std::abs(noisy.values()[k] - img.values()[k]);
    CHECK(mad > prev);
    prev = mad;
  }
}

TEST_CASE("sample seeds are stable") {
  CHECK(stable_hash("") == 0xcbf29ce484222325ULL);
  CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(sample_seed(0, "a") == stable_hash("a"));
  CHECK(sample_seed(7, "a") == (7 ^ stable_hash("a")));
}

TEST_CASE("flips and rotations are exact inverses") {
  std::mt19937_64 rng(23);
  const auto img = testing::random_image(rng, 12, 12);
  const auto lr = TransformSpec::flip(FlipAxis::LR);
  const auto ud = TransformSpec::flip(FlipAxis::UD);
  const auto cw = TransformSpec::rotate(RotationDirection::CW);
  const auto cc = TransformSpec::rotate(RotationDirection::CC);
  CHECK(transform_image(transform_image(img, lr), lr) == img);
  CHECK(transform_image(transform_image(img, ud), ud) == img);
  CHECK(transform_image(transform_image(img, cw), cc) == img);
  CHECK_FALSE(transform_image(img, cw) == img);

  const auto ramp = labeled_ramp(3, 3);
  // Clockwise: the left column becomes the top row, read bottom-up.
  const auto r = transform_image(ramp, cw);
  CHECK(r.at(0, 0, 0) == ramp.at(2, 0, 0));
  CHECK(r.at(0, 2, 0) == ramp.at(0, 0, 0));
  const auto f = transform_image(ramp, lr);
  CHECK(f.at(1, 0, 0) == ramp.at(1, 2, 0));

  for (const auto& t : {lr, ud, cw, cc}) {
    for (int i = 0; i < 20; ++i) {
      const auto m = testing::random_map(rng, 7, 7);
      const auto back = inverse_correct(transform_map(m, t), t);
      CHECK(back.mask.is_full());
      CHECK(back.map.bit_equal(m));
    }
  }
  CHECK_THROWS_AS(transform_image(testing::random_image(rng, 4, 5), cw), ConfigError);
}

TEST_CASE("shift right by a quarter of width 8") {
  const auto ramp = labeled_ramp(2, 8);
  const auto out = transform_image(ramp, TransformSpec::shift(ShiftDirection::R, 0.25));
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 2; c < 8; ++c) CHECK(out.at(r, c, 0) == ramp.at(r, c - 2, 0));
    CHECK(out.at(r, 0, 0) == ramp.at(r, 0, 0));
    CHECK(out.at(r, 1, 0) == ramp.at(r, 0, 0));
  }
}

TEST_CASE("shift round trips keep exactly the overlap rectangle") {
  std::mt19937_64 rng(24);
  for (auto d : kDirections) {
    for (double f : {0.14, 0.2, 0.45}) {
      const auto spec = TransformSpec::shift(d, f);
      const auto m = testing::random_map(rng, 7, 9);
      const long ky = std::lround(f * 7.0);
      const long kx = std::lround(f * 9.0);
      auto mv = expected_motion(d, 1);
      mv.dy *= ky;
      mv.dx *= kx;
      const auto back = inverse_correct(transform_map(m, spec), spec);
      std::size_t kept = 0;
      for (long r = 0; r < 7; ++r) {
        for (long c = 0; c < 9; ++c) {
          // Content at (r, c) moves to (r + dy, c + dx); it survives iff that
          // target lies inside the raster.
          const bool survives = r + mv.dy >= 0 && r + mv.dy < 7 && c + mv.dx >= 0 && c + mv.dx < 9;
          CHECK(back.mask.contains(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) == survives);
          if (survives) {
            ++kept;
            CHECK(back.map.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) ==
                  m.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)));
          }
        }
      }
      CHECK(back.mask.count() == kept);
    }
  }
}

TEST_CASE("DR by one pixel on 7x7 keeps the top-left 6x6") {
  std::mt19937_64 rng(25);
  const auto m = testing::random_map(rng, 7, 7);
  const auto spec = TransformSpec::shift(ShiftDirection::DR, 0.14);
  const auto back = inverse_correct(transform_map(m, spec), spec);
  CHECK(back.mask == ValidMask(m.shape(), 0, 0, 6, 6));
  const auto cropped = crop(back.map, back.mask);
  CHECK(cropped.shape() == Shape{6, 6});
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) CHECK(cropped.at(r, c) == m.at(r, c));
  }
}

TEST_CASE("shift up loses the top rows of the original") {
  std::mt19937_64 rng(26);
  const auto m = testing::random_map(rng, 10, 10);
  const auto spec = TransformSpec::shift(ShiftDirection::U, 0.2);
  const auto back = inverse_correct(transform_map(m, spec), spec);
  CHECK(back.mask == ValidMask(m.shape(), 2, 0, 8, 10));
}

TEST_CASE("transform parsing and applicability") {
  CHECK(TransformSpec::parse("DR", 0.2) == TransformSpec::shift(ShiftDirection::DR, 0.2));
  CHECK(TransformSpec::parse("90CC") == TransformSpec::rotate(RotationDirection::CC));
  CHECK(TransformSpec::parse("UD") == TransformSpec::flip(FlipAxis::UD));
  CHECK_THROWS_AS(TransformSpec::parse("sideways"), ConfigError);
  CHECK(standard_transforms().size() == 12);
  CHECK(TransformSpec::shift(ShiftDirection::DR, 0.2).tag() == "shift:DR:0.2");
  CHECK_THROWS_AS(TransformSpec::shift(ShiftDirection::R, 0.05).check_applicable({7, 7}), ConfigError);
  CHECK_NOTHROW(TransformSpec::shift(ShiftDirection::R, 0.14).check_applicable({7, 7}));
  CHECK_THROWS_AS(TransformSpec::rotate(RotationDirection::CW).check_applicable({7, 8}), ConfigError);
}

TEST_CASE("bilinear upsampling and masks") {
  const auto m = SalienceMap::create(2, 2, {0.0f, 1.0f, 2.0f, 3.0f});
  const auto up = upsample_bilinear(m, {4, 4});
  // Half-pixel centers: output x maps to (x + 0.5) / 2 - 0.5 in the source.
  CHECK(up[0] == doctest::Approx(0.0));
  CHECK(up[1] == doctest::Approx(0.25));
  CHECK(up[2] == doctest::Approx(0.75));
  CHECK(up[3] == doctest::Approx(1.0));
  CHECK(up[1 * 4 + 1] == doctest::Approx(0.25 + 0.5));

  const auto mask = salience_mask(m, {4, 4}, 0.5);
  for (std::size_t i = 0; i < up.size(); ++i) CHECK(mask[i] == (up[i] >= 0.5f * 3.0f ? 1 : 0));
  CHECK_THROWS_AS(salience_mask(SalienceMap::create(2, 2, std::vector<float>(4, 0.0f)), {4, 4}, 0.5), DomainError);
}

TEST_CASE("gaussian blur matches a direct 2D convolution") {
  std::mt19937_64 rng(27);
  const auto img = testing::random_image(rng, 9, 13, 3);
  for (double sigma : {0.7, 1.5, 4.0}) {
    const auto out = gaussian_blur(img, sigma);
    for (std::size_t r = 0; r < 9; ++r) {
      for (std::size_t c = 0; c < 13; ++c) {
        for (std::size_t k = 0; k < 3; ++k) {
          CHECK(std::abs(out.at(r, c, k) - static_cast<double>(reference_blur_at(img, r, c, k, sigma))) < 1e-6);
        }
      }
    }
  }
  CHECK(default_blur_sigma({224, 224}) == doctest::Approx(12.0));
  CHECK(default_blur_sigma({56, 112}) == doctest::Approx(3.0));
}

TEST_CASE("salience-guided degradation") {
  std::mt19937_64 rng(28);
  const auto img = testing::random_image(rng, 28, 28);
  const auto map = testing::random_map(rng, 7, 7);
  const FocusSpec sal{FocusRegion::salient, 0.5, 2.0};
  const FocusSpec non{FocusRegion::non_salient, 0.5, 2.0};
  const auto a = degrade_by_salience(img, map, sal);
  const auto b = degrade_by_salience(img, map, non);
  const auto blurred = gaussian_blur(img, 2.0);
  const auto mask = salience_mask(map, img.shape(), 0.5);
  std::size_t masked = 0;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    masked += mask[p];
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t i = p * 3 + k;
      CHECK(a.values()[i] == (mask[p] ? blurred.values()[i] : img.values()[i]));
      CHECK(b.values()[i] == (mask[p] ? img.values()[i] : blurred.values()[i]));
    }
  }
  CHECK(masked > 0);
  CHECK(masked < mask.size());

  const auto flat = testing::constant_image(28, 28, 3, 0.3f);
  for (const auto& spec : {sal, non}) {
    const auto out = degrade_by_salience(flat, map, spec);
    for (float v : out.values()) CHECK(v == doctest::Approx(0.3f).epsilon(1e-6));
  }

  // Near-max threshold: only pixels at the upsampled peak get blurred.
  const auto tight = degrade_by_salience(img, map, {FocusRegion::salient, 0.999999, 2.0});
  const auto up = upsample_bilinear(map, img.shape());
  const float peak = *std::max_element(up.begin(), up.end());
  for (std::size_t p = 0; p < up.size(); ++p) {
    if (static_cast<double>(up[p]) < 0.999999 * peak) {
      for (std::size_t k = 0; k < 3; ++k) CHECK(tight.values()[p * 3 + k] == img.values()[p * 3 + k]);
    }
  }

  CHECK_THROWS_AS(degrade_by_salience(img, SalienceMap::create(7, 7, std::vector<float>(49, 0.0f)), sal), DomainError);
  CHECK_THROWS_AS(degrade_by_salience(img, map, {FocusRegion::salient, 1.5, 2.0}), ConfigError);
}
