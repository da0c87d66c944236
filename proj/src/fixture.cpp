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

#include "salaudit/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "salaudit/errors.hpp"
#include "salaudit/provider.hpp"

namespace salaudit {

namespace {

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

// Quantize through 8 bits so that what the mock sees here equals what it
// sees after a PNG round trip.
float q8(double v) { return static_cast<float>(std::lround(clamp01(v) * 255.0)) / 255.0f; }

InputImage make_image(std::mt19937_64& rng, std::size_t side, bool synthetic) {
  const double base = 0.2 + 0.3 * uniform(rng);
  const double fx = 1.0 + 3.0 * uniform(rng);
  const double fy = 1.0 + 3.0 * uniform(rng);
  const double phase = 6.283185307179586 * uniform(rng);
  const double centre = synthetic ? 0.35 : 0.05;
  std::vector<float> v(side * side * 3);
  const double mid = (static_cast<double>(side) - 1.0) / 2.0;
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const double y = static_cast<double>(r) / static_cast<double>(side);
      const double x = static_cast<double>(c) / static_cast<double>(side);
      const double d2 = ((r - mid) * (r - mid) + (c - mid) * (c - mid)) / (mid * mid);
      const double lum = base + 0.15 * std::sin(6.283185307179586 * (fx * x + fy * y) + phase) +
                         centre * std::exp(-4.0 * d2);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        v[(r * side + c) * 3 + ch] = q8(lum + 0.1 * (uniform(rng) - 0.5));
      }
    }
  }
  return InputImage::create(side, side, 3, std::move(v));
}

InputImage jitter(const InputImage& img, std::mt19937_64& rng) {
  std::vector<float> v(img.values().begin(), img.values().end());
  for (auto& x : v) x = q8(x + 0.04 * (uniform(rng) - 0.5));
  return InputImage::create(img.height(), img.width(), img.channels(), std::move(v));
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::binary);
  out << doc.dump(2) << "\n";
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
}

}  // namespace

fs::path make_fixture(const fs::path& dir, const FixtureOptions& opt) {
  if (opt.samples < 2) throw ConfigError("fixture needs at least 2 samples");
  if (opt.side < kMockGrid) throw ConfigError(fmt::format("fixture side must be >= {}", kMockGrid));
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "salience" / "r1");
  fs::create_directories(dir / "salience" / "r2");

  std::mt19937_64 rng(opt.seed);
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < opt.samples; ++i) {
    const bool synthetic = i % 2 == 1;
    const std::string id = fmt::format("s{:04}", i);
    const std::string tag = synthetic ? (i % 4 == 1 ? "gen_a" : "gen_b") : "real";
    const InputImage image = make_image(rng, opt.side, synthetic);
    const InputImage other = jitter(image, rng);
    const MockOutput r1 = mock_provider(image);
    const MockOutput r2 = mock_provider(other);

    const std::string image_file = fmt::format("images/{}.png", id);
    const std::string r1_file = fmt::format("salience/r1/{}.salm", id);
    const std::string r2_file = fmt::format("salience/r2/{}.salm", id);
    write_image_png(image, dir / image_file);
    write_salience(r1.map, dir / r1_file);
    write_salience(r2.map, dir / r2_file);
    samples.push_back({{"sample_id", id},
                       {"class_label", synthetic ? "synthetic" : "authentic"},
                       {"dataset_tag", tag},
                       {"score", r1.score},
                       {"image_path", image_file},
                       {"salience", {{"r1", r1_file}, {"r2", r2_file}}}});
  }
  const fs::path manifest = dir / "manifest.json";
  write_json(manifest, {{"version", 1}, {"runs", {"r1", "r2"}}, {"samples", samples}});
  write_json(dir / "config.json", {{"manifest", "manifest.json"},
                                   {"model_id", "mock"},
                                   {"provider", "builtin:mock"},
                                   {"output_dir", "audit-out"},
                                   {"seed", 0}});
  return manifest;
}

}  // namespace salaudit
