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

#include <cstring>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "salaudit/errors.hpp"
#include "salaudit/salience_io.hpp"
#include "support.hpp"

using namespace salaudit;
using testing::TempDir;

namespace {

std::vector<std::uint8_t> salm_header(std::uint32_t h, std::uint32_t w, std::uint8_t flags = 0) {
  std::vector<std::uint8_t> b = {'S', 'A', 'L', 'M', 1, flags, 0, 0};
  for (std::uint32_t v : {h, w}) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  return b;
}

void append_float(std::vector<std::uint8_t>& b, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

template <typename F>
std::string load_error_field(F&& fn) {
  try {
    fn();
  } catch (const LoadError& e) {
    return e.field();
  }
  return "<no error>";
}

void make_salm(const testing::fs::path& p) {
  write_salience(SalienceMap::create(1, 1, {1.0f}), p);
}

}  // namespace

TEST_CASE("SALM round trip is bit exact") {
  std::mt19937_64 rng(1);
  TempDir dir;
  for (int i = 0; i < 20; ++i) {
    auto v = testing::random_values(rng, 49, 0.2);
    v[3] = 0.0f;
    v[4] = std::numeric_limits<float>::denorm_min();
    v[5] = std::numeric_limits<float>::max();
    const auto m = SalienceMap::create(7, 7, v);
    write_salience(m, dir / "m.salm");
    const auto back = load_salience(dir / "m.salm");
    CHECK(back.bit_equal(m));
    CHECK_FALSE(back.depth_hint().has_value());
  }
}

TEST_CASE("SALM file layout") {
  TempDir dir;
  std::mt19937_64 rng(2);
  write_salience(testing::random_map(rng, 224, 224), dir / "big.salm");
  CHECK(testing::fs::file_size(dir / "big.salm") == 16u + 224u * 224u * 4u);

  const auto m = SalienceMap::create(2, 3, {0, 1, 2, 3, 4, 5});
  auto expected = salm_header(2, 3);
  for (float f : {0.f, 1.f, 2.f, 3.f, 4.f, 5.f}) append_float(expected, f);
  CHECK(encode_salm(m) == expected);

  const auto q = SalienceMap::create(1, 2, {0.0f, 1.0f}, 8);
  const auto bytes = encode_salm(q);
  CHECK(bytes.size() == 16u + 1u + 8u);
  CHECK(bytes[5] == 1);
  CHECK(bytes[16] == 8);
  CHECK(decode_salm(bytes).bit_equal(q));
  CHECK(decode_salm(bytes).depth_hint() == 8);
}

TEST_CASE("SALM decode errors name the field") {
  auto b = salm_header(7, 7);
  for (int i = 0; i < 48; ++i) append_float(b, 1.0f);
  CHECK(load_error_field([&] { decode_salm(b); }) == "payload length mismatch");

  auto bad_magic = salm_header(1, 1);
  bad_magic[0] = 'X';
  append_float(bad_magic, 1.0f);
  CHECK(load_error_field([&] { decode_salm(bad_magic); }) == "magic");

  auto bad_version = salm_header(1, 1);
  bad_version[4] = 2;
  append_float(bad_version, 1.0f);
  CHECK(load_error_field([&] { decode_salm(bad_version); }) == "version");

  auto reserved = salm_header(1, 1);
  reserved[7] = 1;
  append_float(reserved, 1.0f);
  CHECK(load_error_field([&] { decode_salm(reserved); }) == "reserved");

  auto zero = salm_header(0, 3);
  CHECK(load_error_field([&] { decode_salm(zero); }) == "dimensions");

  auto neg = salm_header(1, 2);
  append_float(neg, 1.0f);
  append_float(neg, -1.0f);
  CHECK(load_error_field([&] { decode_salm(neg); }) == "values");

  auto nan = salm_header(1, 1);
  append_float(nan, std::numeric_limits<float>::quiet_NaN());
  CHECK(load_error_field([&] { decode_salm(nan); }) == "values");

  std::vector<std::uint8_t> truncated = {'S', 'A', 'L', 'M', 1};
  CHECK(load_error_field([&] { decode_salm(truncated); }) == "header");
}

TEST_CASE("SalienceMap invariants") {
  CHECK_THROWS_AS(SalienceMap::create(0, 1, {}), ValidationError);
  CHECK_THROWS_WITH_AS(SalienceMap::create(7, 7, std::vector<float>(48, 1.0f)),
                       doctest::Contains("payload length mismatch"), ValidationError);
  CHECK_THROWS_AS(SalienceMap::create(1, 1, {-0.5f}), ValidationError);
  CHECK_THROWS_AS(SalienceMap::create(1, 1, {std::numeric_limits<float>::infinity()}), ValidationError);
  CHECK_NOTHROW(SalienceMap::create(1, 1, {0.0f}));
}

TEST_CASE("PNG salience import scales k/255 with depth 8") {
  TempDir dir;
  std::vector<float> full(16, 1.0f);
  write_salience_png(SalienceMap::create(4, 4, full), dir / "full.png");
  const auto m = load_salience(dir / "full.png");
  CHECK(m.depth_hint() == 8);
  for (float v : m.values()) CHECK(v == 1.0f);

  std::vector<float> ramp(256);
  for (int k = 0; k < 256; ++k) ramp[k] = static_cast<float>(k) / 255.0f;
  const auto r = SalienceMap::create(16, 16, ramp, 8);
  write_salience_png(r, dir / "ramp.png");
  const auto back = load_salience(dir / "ramp.png");
  for (int k = 0; k < 256; ++k) CHECK(back.values()[k] == static_cast<float>(k) / 255.0f);
  CHECK(back.bit_equal(r));

  // Re-export after import is lossless.
  write_salience_png(back, dir / "again.png");
  CHECK(load_salience(dir / "again.png").bit_equal(back));

  CHECK_THROWS_AS(write_salience_png(SalienceMap::create(1, 1, {2.0f}), dir / "x.png"), DomainError);
}

TEST_CASE("PNG images round trip through 8 bits") {
  TempDir dir;
  std::mt19937_64 rng(3);
  const auto img = testing::random_image(rng, 9, 11, 3);
  write_image_png(img, dir / "img.png");
  CHECK(load_image(dir / "img.png") == img);
  const auto gray = testing::random_image(rng, 5, 4, 1);
  write_image_png(gray, dir / "g.png");
  CHECK(load_image(dir / "g.png") == gray);
}

TEST_CASE("write to an unwritable path fails") {
  const auto m = SalienceMap::create(1, 1, {1.0f});
  CHECK_THROWS_AS(write_salience(m, "/nonexistent-dir/sub/m.salm"), Error);
  CHECK_THROWS_AS(load_salience("/nonexistent-dir/m.salm"), Error);
}

TEST_CASE("manifest loading") {
  TempDir dir;
  for (const char* f : {"a1.salm", "a2.salm", "b1.salm", "b2.salm"}) make_salm(dir / f);

  SUBCASE("two samples, two runs, grouped by class") {
    const char* text = R"({"version": 1, "runs": ["r1", "r2"], "samples": [
      {"sample_id": "b", "class_label": "synthetic", "dataset_tag": "g", "score": 0.9,
       "salience": {"r1": "b1.salm", "r2": "b2.salm"}},
      {"sample_id": "a", "class_label": "authentic", "dataset_tag": "g",
       "salience": {"r1": "a1.salm", "r2": "a2.salm"}}]})";
    const Manifest m = parse_manifest(text, dir.path());
    CHECK(m.samples.size() == 2);
    CHECK(m.samples[0].sample_id == "a");
    CHECK(m.groups.size() == 2);
    CHECK(m.groups.at(GroupKey{ClassLabel::synthetic, "g"}) == std::vector<std::string>{"b"});
    CHECK(m.find("b")->score == doctest::Approx(0.9));
    CHECK(m.find("b")->salience_paths.at("r2") == dir / "b2.salm");
    CHECK(m.has_run("r2"));
    CHECK_FALSE(m.has_run("r3"));
  }

  SUBCASE("every violation is reported") {
    const char* text = R"({"version": 1, "runs": ["r1"], "samples": [
      {"sample_id": "a", "class_label": "authentic", "dataset_tag": "g",
       "salience": {"r1": "a1.salm", "r3": "a2.salm"}},
      {"sample_id": "a", "class_label": "fake", "dataset_tag": "g",
       "salience": {"r1": "missing.salm"}}]})";
    try {
      parse_manifest(text, dir.path());
      FAIL("expected a ValidationError");
    } catch (const ValidationError& e) {
      const std::string all = e.what();
      CHECK(e.violations().size() >= 4);
      CHECK(all.find("r3") != std::string::npos);
      CHECK(all.find("duplicate") != std::string::npos);
      CHECK(all.find("missing.salm") != std::string::npos);
      CHECK(all.find("fake") != std::string::npos);
    }
  }

  SUBCASE("empty sample list is valid") {
    const Manifest m = parse_manifest(R"({"version": 1, "runs": [], "samples": []})", dir.path());
    CHECK(m.samples.empty());
    CHECK(m.groups.empty());
  }

  SUBCASE("non-finite score and malformed JSON") {
    CHECK_THROWS_AS(parse_manifest("{", dir.path()), ValidationError);
    CHECK_THROWS_AS(parse_manifest(R"({"version": 1, "runs": ["r1"], "samples": [
      {"sample_id": "a", "class_label": "authentic", "dataset_tag": "g", "score": "high",
       "salience": {"r1": "a1.salm"}}]})",
                                   dir.path()),
                    ValidationError);
  }

  SUBCASE("order independence") {
    nlohmann::json samples = nlohmann::json::array();
    for (int i = 0; i < 8; ++i) {
      samples.push_back({{"sample_id", "s" + std::to_string(i)},
                         {"class_label", i % 2 ? "synthetic" : "authentic"},
                         {"dataset_tag", i % 3 ? "x" : "y"},
                         {"salience", {{"r1", "a1.salm"}}}});
    }
    nlohmann::json doc = {{"version", 1}, {"runs", {"r1"}}, {"samples", samples}};
    const Manifest a = parse_manifest(doc.dump(), dir.path());
    std::mt19937_64 rng(5);
    std::shuffle(doc["samples"].begin(), doc["samples"].end(), rng);
    const Manifest b = parse_manifest(doc.dump(), dir.path());
    CHECK(a.groups == b.groups);
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].sample_id == b.samples[i].sample_id);
  }

  SUBCASE("load_manifest resolves paths against its directory") {
    testing::write_file(dir / "manifest.json",
                        R"({"version": 1, "runs": ["r1"], "samples": [
      {"sample_id": "a", "class_label": "authentic", "dataset_tag": "g", "image_path": "a1.salm",
       "salience": {"r1": "a1.salm"}}]})");
    const Manifest m = load_manifest(dir / "manifest.json");
    CHECK(m.samples[0].salience_paths.at("r1") == dir / "a1.salm");
    CHECK(m.samples[0].image_path == dir / "a1.salm");
  }
}
