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

// Shared fixtures and independent reference computations for the tests.
// Nothing here calls into the library's numerical code.

#pragma once

#include <stdlib.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "salaudit/salience_io.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "salaudit-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline std::vector<float> random_values(std::mt19937_64& rng, std::size_t n, double zero_prob = 0.0) {
  std::vector<float> v(n);
  for (auto& x : v) {
    x = uniform01(rng) < zero_prob ? 0.0f : static_cast<float>(uniform01(rng) * 3.0);
  }
  return v;
}

inline salaudit::SalienceMap random_map(std::mt19937_64& rng, std::size_t h, std::size_t w,
                                        double zero_prob = 0.0) {
  auto v = random_values(rng, h * w, zero_prob);
  if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) v[0] = 1.0f;
  return salaudit::SalienceMap::create(h, w, std::move(v));
}

inline salaudit::InputImage random_image(std::mt19937_64& rng, std::size_t h, std::size_t w,
                                         std::size_t channels = 3) {
  std::vector<float> v(h * w * channels);
  for (auto& x : v) x = static_cast<float>(std::lround(uniform01(rng) * 255.0)) / 255.0f;
  return salaudit::InputImage::create(h, w, channels, std::move(v));
}

inline salaudit::InputImage constant_image(std::size_t h, std::size_t w, std::size_t channels,
                                           float value) {
  return salaudit::InputImage::create(h, w, channels, std::vector<float>(h * w * channels, value));
}

// -- reference computations ---------------------------------------------------

/// Shannon entropy (bits) of the pixel values read as a distribution,
/// accumulated in long double.
inline long double oracle_raw_entropy(const std::vector<float>& values) {
  long double total = 0.0L;
  for (float v : values) total += v;
  long double h = 0.0L;
  for (float v : values) {
    if (v <= 0.0f) continue;
    const long double p = static_cast<long double>(v) / total;
    h -= p * std::log2(p);
  }
  return h;
}

/// The first form of the max-entropy bound, with the effective depth
/// min(p, log2(nm)) and no shortcut for the clamped case.
inline long double oracle_max_entropy(std::size_t h, std::size_t w, std::optional<int> depth) {
  const long double nm = static_cast<long double>(h * w);
  const long double lg = std::log2(nm);
  const long double p = depth ? std::min<long double>(*depth, lg) : lg;
  return -(1.0L / std::pow(2.0L, p)) * nm * (lg - 2.0L * p);
}

/// Histogram entropy in bits with `bins` equal-width bins over [lo, hi],
/// the top edge closed.
inline long double oracle_histogram_entropy(const std::vector<float>& values, int bins, double lo,
                                            double hi) {
  std::vector<long double> counts(static_cast<std::size_t>(bins), 0.0L);
  for (float v : values) {
    long long k = 0;
    if (hi > lo) {
      k = static_cast<long long>(std::floor((static_cast<long double>(v) - lo) / (hi - lo) * bins));
    }
    k = std::clamp<long long>(k, 0, bins - 1);
    counts[static_cast<std::size_t>(k)] += 1.0L;
  }
  long double h = 0.0L;
  for (auto c : counts) {
    if (c == 0.0L) continue;
    const long double p = c / static_cast<long double>(values.size());
    h -= p * std::log2(p);
  }
  return h;
}

/// Global-statistics SSIM written out term by term, two-pass, long double.
inline long double oracle_ssim(const std::vector<float>& a, const std::vector<float>& b, long double L,
                               long double k1 = 0.01L, long double k2 = 0.03L) {
  const long double n = static_cast<long double>(a.size());
  long double ma = 0.0L, mb = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  long double va = 0.0L, vb = 0.0L, cov = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
    cov += (a[i] - ma) * (b[i] - mb);
  }
  va /= n;
  vb /= n;
  cov /= n;
  const long double c1 = (k1 * L) * (k1 * L);
  const long double c2 = (k2 * L) * (k2 * L);
  return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

inline long double oracle_ssim_auto(const std::vector<float>& a, const std::vector<float>& b) {
  float lo = a[0], hi = a[0];
  for (float v : a) lo = std::min(lo, v), hi = std::max(hi, v);
  for (float v : b) lo = std::min(lo, v), hi = std::max(hi, v);
  return oracle_ssim(a, b, std::max<long double>(static_cast<long double>(hi) - lo, 1e-6L));
}

/// AUROC by enumerating every (synthetic, authentic) pair; ties count 1/2.
/// Returned as the exact fraction wins2 / (2 * pairs) evaluated once.
inline double oracle_auroc(const std::vector<double>& scores, const std::vector<int>& positive) {
  long long wins2 = 0;
  long long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!positive[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins2 += 2;
      else if (scores[i] == scores[j]) wins2 += 1;
    }
  }
  return static_cast<double>(wins2) / (2.0 * static_cast<double>(pairs));
}

inline std::vector<float> to_vector(std::span<const float> s) { return {s.begin(), s.end()}; }

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// Every regular file under `dir`, keyed by relative path, with contents.
inline std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

}  // namespace testing
