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

#include "salaudit/run_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "salaudit/errors.hpp"
#include "salaudit/report.hpp"

namespace salaudit {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> known,
                std::vector<std::string>& bad) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      bad.push_back(fmt::format("{}: unknown key '{}'", where, key));
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, std::string_view where, std::vector<std::string>& bad) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad.push_back(fmt::format("{}.{}: wrong type", where, key));
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& out, std::string_view where,
              std::vector<std::string>& bad) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  T value{};
  read(obj, key, value, where, bad);
  out = value;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
}

bool needs_provider(Measure m) {
  return m == Measure::noise || m == Measure::resilience || m == Measure::focus;
}

bool has(const std::vector<Measure>& v, Measure m) {
  return std::find(v.begin(), v.end(), m) != v.end();
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  std::vector<std::string> bad;
  check_keys(doc, "config",
             {"manifest", "model_id", "provider", "provider_timeout_s", "measures", "run_id",
              "stability_runs", "entropy", "noise", "resilience", "focus", "ssim", "output_dir",
              "seed", "jobs", "keep_work"},
             bad);

  RunConfig cfg;
  std::string manifest;
  read(doc, "manifest", manifest, "config", bad);
  if (manifest.empty()) {
    bad.emplace_back("config.manifest: required");
  } else {
    cfg.manifest_path = base_dir / manifest;
  }
  read(doc, "model_id", cfg.model_id, "config", bad);
  read_opt(doc, "provider", cfg.provider, "config", bad);
  read(doc, "provider_timeout_s", cfg.provider_timeout_s, "config", bad);
  if (!(cfg.provider_timeout_s > 0.0)) bad.emplace_back("config.provider_timeout_s: must be > 0");
  read_opt(doc, "run_id", cfg.run_id, "config", bad);
  read(doc, "stability_runs", cfg.stability_runs, "config", bad);
  read(doc, "seed", cfg.seed, "config", bad);
  read(doc, "jobs", cfg.jobs, "config", bad);
  read(doc, "keep_work", cfg.keep_work, "config", bad);
  std::string out_dir;
  read(doc, "output_dir", out_dir, "config", bad);
  cfg.output_dir = base_dir / (out_dir.empty() ? cfg.output_dir : fs::path(out_dir));

  if (doc.contains("measures")) {
    std::vector<std::string> names;
    read(doc, "measures", names, "config", bad);
    cfg.measures.clear();
    for (const auto& n : names) {
      if (auto m = parse_measure(n)) {
        if (!has(cfg.measures, *m)) cfg.measures.push_back(*m);
      } else {
        bad.push_back(fmt::format("config.measures: unknown measure '{}'", n));
      }
    }
    if (names.empty()) bad.emplace_back("config.measures: empty");
  }

  if (doc.contains("entropy")) {
    const auto& e = doc["entropy"];
    check_keys(e, "entropy", {"mode", "histogram_bins"}, bad);
    std::string mode;
    read(e, "mode", mode, "entropy", bad);
    if (!mode.empty()) {
      if (auto m = parse_entropy_mode(mode)) {
        cfg.entropy.mode = *m;
      } else {
        bad.push_back(fmt::format("entropy.mode: unknown mode '{}'", mode));
      }
    }
    read(e, "histogram_bins", cfg.entropy.histogram_bins, "entropy", bad);
  }

  if (doc.contains("noise")) {
    const auto& n = doc["noise"];
    check_keys(n, "noise", {"kinds", "levels", "reporting_kind", "reporting_level"}, bad);
    if (n.contains("kinds")) {
      std::vector<std::string> kinds;
      read(n, "kinds", kinds, "noise", bad);
      cfg.noise.kinds.clear();
      for (const auto& k : kinds) {
        if (auto kind = parse_noise_kind(k)) {
          cfg.noise.kinds.push_back(*kind);
        } else {
          bad.push_back(fmt::format("noise.kinds: unknown kind '{}'", k));
        }
      }
    }
    read(n, "levels", cfg.noise.levels, "noise", bad);
    std::string reporting;
    read(n, "reporting_kind", reporting, "noise", bad);
    if (!reporting.empty()) {
      if (auto kind = parse_noise_kind(reporting)) {
        cfg.noise.reporting_kind = *kind;
      } else {
        bad.push_back(fmt::format("noise.reporting_kind: unknown kind '{}'", reporting));
      }
    }
    read(n, "reporting_level", cfg.noise.reporting_level, "noise", bad);
  }

  std::vector<std::string> transform_names;
  if (doc.contains("resilience")) {
    const auto& r = doc["resilience"];
    check_keys(r, "resilience", {"shift_fraction", "transforms"}, bad);
    read(r, "shift_fraction", cfg.shift_fraction, "resilience", bad);
    read(r, "transforms", transform_names, "resilience", bad);
  }
  if (!(cfg.shift_fraction > 0.0 && cfg.shift_fraction < 1.0)) {
    bad.emplace_back("resilience.shift_fraction: must be in (0,1)");
  } else if (transform_names.empty()) {
    cfg.resilience.transforms = standard_transforms(cfg.shift_fraction);
  } else {
    cfg.resilience.transforms.clear();
    for (const auto& name : transform_names) {
      try {
        cfg.resilience.transforms.push_back(TransformSpec::parse(name, cfg.shift_fraction));
      } catch (const Error& e) {
        bad.push_back(fmt::format("resilience.transforms: {}", e.what()));
      }
    }
  }

  if (doc.contains("focus")) {
    const auto& f = doc["focus"];
    check_keys(f, "focus", {"threshold_fraction", "blur_sigma"}, bad);
    read(f, "threshold_fraction", cfg.focus.threshold_fraction, "focus", bad);
    read_opt(f, "blur_sigma", cfg.focus.blur_sigma, "focus", bad);
  }

  if (doc.contains("ssim")) {
    const auto& s = doc["ssim"];
    check_keys(s, "ssim", {"k1", "k2", "dynamic_range"}, bad);
    read(s, "k1", cfg.ssim.k1, "ssim", bad);
    read(s, "k2", cfg.ssim.k2, "ssim", bad);
    read_opt(s, "dynamic_range", cfg.ssim.dynamic_range, "ssim", bad);
  }

  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      bad.emplace_back(e.what());
    }
  };
  check([&] { cfg.entropy.validate(); });
  check([&] { cfg.noise.validate(); });
  check([&] { cfg.focus.spec(FocusRegion::salient).validate(); });
  check([&] { cfg.ssim.validate(); });

  if (!bad.empty()) throw ConfigError(fmt::format("{}", fmt::join(bad, "; ")));
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.parent_path());
}

void apply_overrides(RunConfig& cfg, const RunOverrides& o) {
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.provider) cfg.provider = *o.provider;
  if (o.seed) cfg.seed = *o.seed;
  if (o.output_dir) cfg.output_dir = *o.output_dir;
  if (o.measures) cfg.measures = *o.measures;
}

std::unique_ptr<SalienceProvider> make_provider(const RunConfig& cfg) {
  std::optional<std::string> command = cfg.provider;
  if (!command) {
    if (const char* env = std::getenv(kProviderEnvVar); env && *env) command = env;
  }
  if (!command || command->empty()) return nullptr;
  if (*command == kBuiltinMock) return std::make_unique<MockProvider>();
  DispatchOptions opts;
  opts.timeout = std::chrono::milliseconds(static_cast<long long>(cfg.provider_timeout_s * 1000.0));
  return std::make_unique<SubprocessProvider>(*command, opts);
}

int run_audit(const RunConfig& cfg_in, std::ostream& log) {
  RunConfig cfg = cfg_in;
  cfg.noise.seed = cfg.seed;
  const unsigned jobs = cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());

  // Everything that can be checked before any work is done is checked here,
  // so a config error never leaves outputs behind.
  Manifest manifest;
  std::unique_ptr<SalienceProvider> provider;
  try {
    manifest = load_manifest(cfg.manifest_path);
    std::vector<std::string> bad;
    if (manifest.runs.empty()) bad.emplace_back("manifest declares no runs");
    if (!cfg.run_id && !manifest.runs.empty()) cfg.run_id = manifest.runs.front();
    if (cfg.run_id && !manifest.has_run(*cfg.run_id)) {
      bad.push_back(fmt::format("run_id '{}' is not in the manifest", *cfg.run_id));
    }
    if (has(cfg.measures, Measure::stability)) {
      if (cfg.stability_runs.empty()) cfg.stability_runs = manifest.runs;
      if (cfg.stability_runs.size() < 2) {
        bad.push_back(fmt::format("stability needs at least 2 runs, {} available",
                                  cfg.stability_runs.size()));
      }
      std::set<std::string> seen;
      for (const auto& r : cfg.stability_runs) {
        if (!manifest.has_run(r)) bad.push_back(fmt::format("stability run '{}' is not in the manifest", r));
        if (!seen.insert(r).second) bad.push_back(fmt::format("stability run '{}' listed twice", r));
      }
    }
    if (std::any_of(cfg.measures.begin(), cfg.measures.end(), needs_provider)) {
      provider = make_provider(cfg);
      if (!provider) {
        bad.push_back(fmt::format("noise, resilience and focus need a provider (config 'provider', "
                                  "--provider or ${})",
                                  kProviderEnvVar));
      }
    }
    if (!bad.empty()) throw ConfigError(fmt::format("{}", fmt::join(bad, "; ")));
  } catch (const Error& e) {
    fmt::print(log, "config error: {}\n", e.what());
    return kExitConfig;
  }

  const fs::path results_dir = cfg.output_dir / "results";
  const fs::path work_dir = cfg.output_dir / "work";
  int code = kExitOk;
  std::vector<MeasureResult> results;
  try {
    fs::remove_all(results_dir);
    fs::remove(cfg.output_dir / "summary.txt");
    fs::create_directories(results_dir);
    const ExecContext ctx{work_dir, jobs};

    for (Measure m : cfg.measures) {
      fmt::print(log, "{}: running\n", to_string(m));
      try {
        MeasureResult r;
        switch (m) {
          case Measure::entropy:
            r = measure_entropy(manifest, *cfg.run_id, cfg.entropy, jobs);
            break;
          case Measure::noise: {
            auto outcome = measure_noise(manifest, *cfg.run_id, cfg.noise, *provider, cfg.ssim, ctx);
            write_text(results_dir / "noise_curve.csv", noise_curve_csv(outcome.curves));
            r = std::move(outcome.result);
            break;
          }
          case Measure::resilience:
            r = measure_resilience(manifest, *cfg.run_id, cfg.resilience, *provider, cfg.ssim, ctx);
            r.config_echo["resilience"]["shift_fraction"] = cfg.shift_fraction;
            break;
          case Measure::focus:
            r = measure_focus(manifest, *cfg.run_id, cfg.focus, *provider, cfg.ssim, ctx);
            write_text(results_dir / "roc_points.csv", roc_points_csv(r, manifest));
            break;
          case Measure::stability:
            r = measure_stability(manifest, cfg.stability_runs, cfg.ssim, jobs);
            break;
        }
        r.config_echo["model_id"] = cfg.model_id;
        const std::string name(to_string(m));
        write_text(results_dir / (name + ".json"), to_json(r).dump(2) + "\n");
        write_text(results_dir / (name + ".csv"), to_csv(r, manifest));
        std::size_t gaps = 0;
        for (const auto& e : r.exclusions) {
          fmt::print(log, "{}: excluded {}{}{} ({}): {}\n", name, e.sample_id,
                     e.component.empty() ? "" : "/", e.component, to_string(e.kind), e.reason);
          if (e.kind != ExclusionKind::degenerate) ++gaps;
        }
        if (gaps > 0 && code == kExitOk) code = kExitPartial;
        results.push_back(std::move(r));
      } catch (const ProviderError& e) {
        fmt::print(log, "{}: provider job {} failed\n", to_string(m), e.job_id());
        for (const auto& p : e.problems()) fmt::print(log, "  {}\n", p);
        code = kExitProvider;
      } catch (const ConfigError& e) {
        fmt::print(log, "{}: config error: {}\n", to_string(m), e.what());
        if (code == kExitOk || code == kExitPartial) code = kExitConfig;
      }
    }

    if (results.size() == std::size(kAllMeasures)) {
      write_text(results_dir / "radar.json", to_json(make_radar(cfg.model_id, results)).dump(2) + "\n");
    }
    write_text(cfg.output_dir / "summary.txt", render_summary(cfg.model_id, results));
    if (!cfg.keep_work && code == kExitOk) fs::remove_all(work_dir);
  } catch (const Error& e) {
    fmt::print(log, "error: {}\n", e.what());
    return kExitInternal;
  } catch (const fs::filesystem_error& e) {
    fmt::print(log, "error: {}\n", e.what());
    return kExitInternal;
  }
  return code;
}

}  // namespace salaudit
