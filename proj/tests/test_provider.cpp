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
#include <nlohmann/json.hpp>

#include "salaudit/errors.hpp"
#include "salaudit/perturbation.hpp"
#include "salaudit/provider.hpp"
#include "support.hpp"

using namespace salaudit;
using testing::TempDir;

namespace {

ProviderJob make_job(const TempDir& dir, std::size_t n, const std::string& sub = "job") {
  std::mt19937_64 rng(31);
  ProviderJob job;
  job.job_id = "job-" + sub;
  job.run_id = "r1";
  job.images_dir = dir / (sub + "/images");
  job.output_dir = dir / (sub + "/out");
  testing::fs::create_directories(job.images_dir);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string file = "img" + std::to_string(i) + ".png";
    write_image_png(testing::random_image(rng, 14, 14), job.images_dir / file);
    job.requests.push_back({"s" + std::to_string(i), file, "clean"});
  }
  return job;
}

std::string fake(const std::string& mode) { return std::string(FAKE_PROVIDER_BIN) + " " + mode; }

std::string mock_command() { return std::string(AUDIT_BIN) + " mock-provider"; }

// Block means and softmax computed from scratch, in long double.
std::vector<long double> reference_mock(const InputImage& img) {
  std::vector<long double> lum(49);
  for (std::size_t br = 0; br < 7; ++br) {
    for (std::size_t bc = 0; bc < 7; ++bc) {
      long double sum = 0.0L;
      std::size_t count = 0;
      for (std::size_t r = br * img.height() / 7; r < (br + 1) * img.height() / 7; ++r) {
        for (std::size_t c = bc * img.width() / 7; c < (bc + 1) * img.width() / 7; ++c) {
          for (std::size_t k = 0; k < img.channels(); ++k, ++count) sum += img.at(r, c, k);
        }
      }
      lum[br * 7 + bc] = sum / count;
    }
  }
  long double total = 0.0L;
  std::vector<long double> out(49);
  for (std::size_t i = 0; i < 49; ++i) total += out[i] = std::exp(lum[i] / 0.1L);
  for (auto& v : out) v /= total;
  out.push_back(lum[24]);
  return out;
}

}  // namespace

TEST_CASE("mock provider output") {
  std::mt19937_64 rng(32);
  const auto black = testing::constant_image(21, 21, 3, 0.0f);
  const auto out = mock_provider(black);
  CHECK(out.map.shape() == Shape{7, 7});
  for (float v : out.map.values()) CHECK(v == doctest::Approx(1.0 / 49.0).epsilon(1e-7));
  CHECK(out.score == 0.0);

  std::vector<float> v(28 * 28 * 3, 0.1f);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t k = 0; k < 3; ++k) v[(r * 28 + c) * 3 + k] = 0.9f;
    }
  }
  const auto bright = mock_provider(InputImage::create(28, 28, 3, v));
  const auto vals = bright.map.values();
  CHECK(std::max_element(vals.begin(), vals.end()) - vals.begin() == 0);

  for (int i = 0; i < 10; ++i) {
    const auto img = testing::random_image(rng, 30, 23, i % 2 ? 3 : 1);
    const auto got = mock_provider(img);
    const auto want = reference_mock(img);
    for (std::size_t j = 0; j < 49; ++j) CHECK(std::abs(got.map.values()[j] - want[j]) < 1e-6);
    CHECK(std::abs(got.score - static_cast<double>(want[49])) < 1e-12);
  }
  CHECK_THROWS_AS(mock_provider(testing::constant_image(6, 10, 1, 0.0f)), ValidationError);
}

TEST_CASE("mock provider is equivariant under flips and rotations") {
  std::mt19937_64 rng(33);
  for (int i = 0; i < 10; ++i) {
    const auto img = testing::random_image(rng, 28, 28);
    const auto base = mock_provider(img).map;
    for (const auto& t : {TransformSpec::flip(FlipAxis::LR), TransformSpec::flip(FlipAxis::UD),
                          TransformSpec::rotate(RotationDirection::CW),
                          TransformSpec::rotate(RotationDirection::CC)}) {
      const auto moved = mock_provider(transform_image(img, t)).map;
      CHECK(moved.bit_equal(transform_map(base, t)));
    }
  }
}

TEST_CASE("job manifest layout") {
  TempDir dir;
  auto job = make_job(dir, 2);
  const auto path = write_job_manifest(job);
  CHECK(path == job.images_dir / "job.json");
  const auto doc = nlohmann::json::parse(testing::read_file(path));
  CHECK(doc["job_id"] == job.job_id);
  CHECK(doc["run_id"] == "r1");
  CHECK(doc["output_dir"] == "../out");
  CHECK(doc["requests"].size() == 2);
  CHECK(doc["requests"][1]["image"] == "img1.png");
  CHECK(doc["requests"][1]["variant_tag"] == "clean");
}

TEST_CASE("dispatch through the CLI mock provider") {
  TempDir dir;
  auto job = make_job(dir, 3);
  const auto result = dispatch_job(job, mock_command());
  CHECK(result.rows.size() == 3);
  CHECK(result.failed_count() == 0);
  for (const auto& row : result.rows) {
    CHECK(row.status == RowStatus::ok);
    CHECK(row.salience->shape() == Shape{7, 7});
  }
  const auto img = load_image(job.images_dir / "img1.png");
  CHECK(result.find("s1", "clean")->salience->bit_equal(mock_provider(img).map));

  SUBCASE("reruns are byte identical") {
    auto again = make_job(dir, 3, "again");
    dispatch_job(again, mock_command());
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(testing::read_file(result.rows[i].salience_file) ==
            testing::read_file(again.output_dir / testing::fs::path(result.rows[i].salience_file).filename()));
    }
  }
  SUBCASE("a non-empty output directory is refused") {
    CHECK_THROWS_AS(dispatch_job(job, mock_command()), ProviderError);
  }
}

TEST_CASE("in-process mock provider uses the same protocol") {
  TempDir dir;
  auto job = make_job(dir, 2);
  MockProvider provider;
  const auto result = provider.run(job);
  CHECK(result.rows.size() == 2);
  CHECK(testing::fs::exists(job.output_dir / "results.json"));
  CHECK(provider.describe() == "builtin:mock");
}

TEST_CASE("provider failures") {
  TempDir dir;
  auto job = make_job(dir, 3);

  SUBCASE("omitted row names the sample") {
    try {
      dispatch_job(job, fake("omit"));
      FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
      CHECK(std::string(e.what()).find("s2") != std::string::npos);
      CHECK(e.partial().rows.size() == 2);
    }
  }
  SUBCASE("wrong dimensions") {
    job.expected_shape = Shape{7, 7};
    CHECK_THROWS_WITH_AS(dispatch_job(job, fake("wrong_dims")), doctest::Contains("dimension-consistency"),
                         ProviderError);
  }
  SUBCASE("wrong dimensions without a declared shape") {
    CHECK_THROWS_WITH_AS(dispatch_job(job, fake("wrong_dims")), doctest::Contains("6x7"), ProviderError);
  }
  SUBCASE("failed rows are reported, not fatal") {
    const auto result = dispatch_job(job, fake("fail_row"));
    CHECK(result.failed_count() == 1);
    CHECK(result.find("s2", "clean")->reason == "simulated failure");
  }
  SUBCASE("score out of range") {
    CHECK_THROWS_WITH_AS(dispatch_job(job, fake("bad_score")), doctest::Contains("outside [0,1]"), ProviderError);
  }
  SUBCASE("nonzero exit keeps the partial results") {
    try {
      dispatch_job(job, fake("exit"));
      FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
      CHECK(std::string(e.what()).find("status 3") != std::string::npos);
      CHECK(e.partial().rows.size() == 3);
    }
  }
  SUBCASE("timeout") {
    const auto start = std::chrono::steady_clock::now();
    CHECK_THROWS_WITH_AS(dispatch_job(job, fake("sleep"), {std::chrono::milliseconds(300)}),
                         doctest::Contains("timed out"), ProviderError);
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
  }
  SUBCASE("missing command") {
    CHECK_THROWS_AS(dispatch_job(job, "/nonexistent/provider"), ProviderError);
  }
}
