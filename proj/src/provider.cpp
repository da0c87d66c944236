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

#include "salaudit/provider.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <fstream>
#include <map>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

extern char** environ;

namespace salaudit {

using nlohmann::json;

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), "file", "cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw LoadError(path.string(), "json", e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(fmt::format("{}: cannot open for writing", path.string()));
  out << doc.dump(2) << '\n';
  if (!out) throw Error(fmt::format("{}: write failed", path.string()));
}

fs::path resolve_against(const fs::path& base, const fs::path& p) {
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

std::string request_key(std::string_view sample_id, std::string_view variant_tag) {
  return std::string(sample_id) + '\x1f' + std::string(variant_tag);
}

// Waits for `pid`; returns the wait status or nullopt after killing its
// process group on timeout.
std::optional<int> wait_with_timeout(pid_t pid, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  auto pause = std::chrono::milliseconds(1);
  while (true) {
    int status = 0;
    const pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) return status;
    if (r < 0 && errno != EINTR) throw Error(fmt::format("waitpid failed: errno {}", errno));
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      return std::nullopt;
    }
    std::this_thread::sleep_for(pause);
    pause = std::min(pause * 2, std::chrono::milliseconds(50));
  }
}

}  // namespace

const ProviderRow* ProviderResult::find(std::string_view sample_id,
                                        std::string_view variant_tag) const {
  for (const auto& row : rows) {
    if (row.sample_id == sample_id && row.variant_tag == variant_tag) return &row;
  }
  return nullptr;
}

std::size_t ProviderResult::failed_count() const {
  return static_cast<std::size_t>(std::count_if(
      rows.begin(), rows.end(), [](const ProviderRow& r) { return r.status != RowStatus::ok; }));
}

ProviderError::ProviderError(std::string job_id, std::vector<std::string> problems,
                             ProviderResult partial)
    : Error([&] {
        std::string msg = fmt::format("provider job '{}' failed", job_id);
        for (const auto& p : problems) msg += "\n  " + p;
        return msg;
      }()),
      job_id_(std::move(job_id)),
      problems_(std::move(problems)),
      partial_(std::move(partial)) {}

fs::path write_job_manifest(const ProviderJob& job) {
  json requests = json::array();
  for (const auto& r : job.requests) {
    requests.push_back({{"sample_id", r.sample_id},
                        {"image", r.image_file},
                        {"variant_tag", r.variant_tag}});
  }
  // Stored relative to images_dir; job manifests carry no absolute paths.
  const fs::path images_abs = fs::absolute(job.images_dir).lexically_normal();
  const fs::path output_abs = fs::absolute(job.output_dir).lexically_normal();
  fs::path out = output_abs.lexically_relative(images_abs);
  if (out.empty()) out = output_abs;
  const json doc = {{"job_id", job.job_id},
                    {"run_id", job.run_id},
                    {"output_dir", out.generic_string()},
                    {"requests", std::move(requests)}};
  fs::create_directories(job.images_dir);
  const auto path = job.manifest_path();
  write_json(path, doc);
  return path;
}

ProviderResult collect_result(const ProviderJob& job) {
  ProviderResult result;
  result.job_id = job.job_id;
  std::vector<std::string> problems;

  const auto manifest = job.output_dir / kResultManifestName;
  json doc;
  try {
    doc = read_json(manifest);
  } catch (const LoadError& e) {
    throw ProviderError(job.job_id, {fmt::format("result manifest unreadable: {}", e.what())});
  }
  if (!doc.is_object() || !doc.contains("results") || !doc["results"].is_array()) {
    throw ProviderError(job.job_id, {"result manifest lacks a 'results' array"});
  }
  if (!doc.contains("job_id") || doc["job_id"] != job.job_id) {
    problems.push_back(fmt::format("result manifest job_id does not match '{}'", job.job_id));
  }

  std::map<std::string, const json*> answered;
  for (const auto& entry : doc["results"]) {
    if (!entry.is_object() || !entry.contains("sample_id") || !entry["sample_id"].is_string() ||
        !entry.contains("variant_tag") || !entry["variant_tag"].is_string()) {
      problems.emplace_back("result row without string sample_id/variant_tag");
      continue;
    }
    const auto sid = entry["sample_id"].get<std::string>();
    const auto tag = entry["variant_tag"].get<std::string>();
    if (!answered.emplace(request_key(sid, tag), &entry).second) {
      problems.push_back(fmt::format("sample '{}' variant '{}' answered more than once", sid, tag));
    }
  }

  std::optional<Shape> shape = job.expected_shape;
  std::map<std::string, bool> requested;
  for (const auto& req : job.requests) {
    requested[request_key(req.sample_id, req.variant_tag)] = true;
    auto it = answered.find(request_key(req.sample_id, req.variant_tag));
    if (it == answered.end()) {
      problems.push_back(
          fmt::format("missing result for sample '{}' variant '{}'", req.sample_id, req.variant_tag));
      continue;
    }
    const json& e = *it->second;
    ProviderRow row;
    row.sample_id = req.sample_id;
    row.variant_tag = req.variant_tag;
    const std::string status = e.value("status", std::string{});
    if (status == "failed") {
      row.status = RowStatus::failed;
      row.reason = e.value("reason", std::string("provider reported failure"));
      result.rows.push_back(std::move(row));
      continue;
    }
    if (status != "ok") {
      problems.push_back(fmt::format("sample '{}' variant '{}': status '{}' is not ok|failed",
                                     req.sample_id, req.variant_tag, status));
      continue;
    }
    if (!e.contains("score") || !e["score"].is_number()) {
      problems.push_back(fmt::format("sample '{}' variant '{}': score missing", req.sample_id,
                                     req.variant_tag));
      continue;
    }
    row.score = e["score"].get<double>();
    if (!(std::isfinite(row.score) && row.score >= 0.0 && row.score <= 1.0)) {
      problems.push_back(fmt::format("sample '{}' variant '{}': score {} outside [0,1]",
                                     req.sample_id, req.variant_tag, row.score));
      continue;
    }
    if (!e.contains("salience") || !e["salience"].is_string()) {
      problems.push_back(fmt::format("sample '{}' variant '{}': salience path missing",
                                     req.sample_id, req.variant_tag));
      continue;
    }
    row.salience_file = resolve_against(job.output_dir, e["salience"].get<std::string>());
    try {
      row.salience = load_salience(row.salience_file);
    } catch (const Error& err) {
      problems.push_back(fmt::format("sample '{}' variant '{}': {}", req.sample_id,
                                     req.variant_tag, err.what()));
      continue;
    }
    if (!shape) shape = row.salience->shape();
    if (row.salience->shape() != *shape) {
      problems.push_back(fmt::format(
          "sample '{}' variant '{}': dimension-consistency error, map is {} but the run's maps are {}",
          req.sample_id, req.variant_tag, row.salience->shape().str(), shape->str()));
      continue;
    }
    row.status = RowStatus::ok;
    result.rows.push_back(std::move(row));
  }
  for (const auto& [key, entry] : answered) {
    if (!requested.count(key)) {
      problems.push_back(fmt::format("unrequested result for sample '{}'",
                                     (*entry)["sample_id"].get<std::string>()));
    }
  }
  if (!problems.empty()) throw ProviderError(job.job_id, std::move(problems), std::move(result));
  return result;
}

ProviderResult dispatch_job(const ProviderJob& job, const std::string& command,
                            const DispatchOptions& options) {
  if (fs::exists(job.output_dir) && !fs::is_empty(job.output_dir)) {
    throw ProviderError(job.job_id,
                        {fmt::format("output_dir {} is not empty", job.output_dir.string())});
  }
  fs::create_directories(job.output_dir);
  const auto manifest = write_job_manifest(job);
  const std::string cmdline = command + " " + shell_quote(manifest.string());

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);
  // Provider chatter goes to stderr; stdout belongs to the caller.
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, STDERR_FILENO, STDOUT_FILENO);

  std::string sh = "/bin/sh";
  std::string dash_c = "-c";
  std::vector<char*> argv = {sh.data(), dash_c.data(), const_cast<char*>(cmdline.c_str()),
                             nullptr};
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, &attr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    throw ProviderError(job.job_id, {fmt::format("cannot spawn provider: errno {}", rc)});
  }

  const auto status = wait_with_timeout(pid, options.timeout);
  auto partial = [&] {
    try {
      return collect_result(job);
    } catch (const ProviderError& e) {
      return e.partial();
    } catch (const Error&) {
      return ProviderResult{job.job_id, {}};
    }
  };
  if (!status) {
    throw ProviderError(job.job_id,
                        {fmt::format("provider timed out after {} ms", options.timeout.count())},
                        partial());
  }
  if (!WIFEXITED(*status) || WEXITSTATUS(*status) != 0) {
    const std::string why = WIFEXITED(*status)
                                ? fmt::format("provider exited with status {}", WEXITSTATUS(*status))
                                : fmt::format("provider killed by signal {}", WTERMSIG(*status));
    throw ProviderError(job.job_id, {why}, partial());
  }
  return collect_result(job);
}

// --- mock ------------------------------------------------------------------

MockOutput mock_provider(const InputImage& image) {
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  if (h < kMockGrid || w < kMockGrid) {
    throw ValidationError(fmt::format("mock provider needs at least {0}x{0} pixels, got {1}",
                                      kMockGrid, image.shape().str()));
  }
  const std::size_t ch = image.channels();
  std::vector<double> lum(kMockGrid * kMockGrid);
  for (std::size_t br = 0; br < kMockGrid; ++br) {
    const std::size_t r0 = br * h / kMockGrid;
    const std::size_t r1 = (br + 1) * h / kMockGrid;
    for (std::size_t bc = 0; bc < kMockGrid; ++bc) {
      const std::size_t c0 = bc * w / kMockGrid;
      const std::size_t c1 = (bc + 1) * w / kMockGrid;
      // 8-bit sources (k/255 as float) sum exactly in double for any block
      // size that fits an image, so the order of summation is irrelevant.
      double sum = 0.0;
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) {
          for (std::size_t k = 0; k < ch; ++k) sum += image.at(r, c, k);
        }
      }
      lum[br * kMockGrid + bc] = sum / static_cast<double>((r1 - r0) * (c1 - c0) * ch);
    }
  }
  const double peak = *std::max_element(lum.begin(), lum.end());
  std::vector<double> e(lum.size());
  for (std::size_t i = 0; i < lum.size(); ++i) {
    e[i] = std::exp((lum[i] - peak) / kMockTemperature);
  }
  // Sum in sorted order so any permutation of blocks normalizes identically.
  std::vector<double> sorted = e;
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double v : sorted) total += v;
  std::vector<float> values(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) values[i] = static_cast<float>(e[i] / total);

  const std::size_t centre = kMockGrid / 2;
  return {SalienceMap::create(kMockGrid, kMockGrid, std::move(values)),
          lum[centre * kMockGrid + centre]};
}

void serve_mock_job(const fs::path& job_manifest_path) {
  const json job = read_json(job_manifest_path);
  if (!job.is_object() || !job.contains("requests") || !job["requests"].is_array()) {
    throw LoadError(job_manifest_path.string(), "requests", "missing or not an array");
  }
  const fs::path images_dir = fs::absolute(job_manifest_path).parent_path();
  const fs::path output_dir =
      resolve_against(images_dir, job.value("output_dir", std::string("output")));
  fs::create_directories(output_dir);

  json results = json::array();
  std::size_t index = 0;
  for (const auto& req : job["requests"]) {
    const std::string sid = req.value("sample_id", std::string{});
    const std::string tag = req.value("variant_tag", std::string{});
    json row = {{"sample_id", sid}, {"variant_tag", tag}};
    try {
      const auto image = load_image(resolve_against(images_dir, req.at("image").get<std::string>()));
      const auto out = mock_provider(image);
      const std::string name = fmt::format("{:06}.salm", index);
      write_salience(out.map, output_dir / name);
      row["salience"] = name;
      row["score"] = out.score;
      row["status"] = "ok";
    } catch (const std::exception& e) {
      row["status"] = "failed";
      row["reason"] = e.what();
    }
    results.push_back(std::move(row));
    ++index;
  }
  write_json(output_dir / kResultManifestName,
             {{"job_id", job.value("job_id", std::string{})}, {"results", std::move(results)}});
}

ProviderResult MockProvider::run(const ProviderJob& job) {
  if (fs::exists(job.output_dir) && !fs::is_empty(job.output_dir)) {
    throw ProviderError(job.job_id,
                        {fmt::format("output_dir {} is not empty", job.output_dir.string())});
  }
  fs::create_directories(job.output_dir);
  serve_mock_job(write_job_manifest(job));
  return collect_result(job);
}

}  // namespace salaudit
