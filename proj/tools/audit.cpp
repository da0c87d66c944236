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

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "salaudit/errors.hpp"
#include "salaudit/fixture.hpp"
#include "salaudit/report.hpp"
#include "salaudit/run_config.hpp"

using namespace salaudit;

namespace {

struct RunFlags {
  std::string config;
  std::optional<unsigned> jobs;
  std::optional<std::string> provider;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "Run configuration (JSON)")->required();
  cmd->add_option("--jobs", f.jobs, "Worker threads (default: hardware threads)");
  cmd->add_option("--provider", f.provider, "Provider command, or builtin:mock");
  cmd->add_option("--seed", f.seed, "Global noise seed");
  cmd->add_option("--out", f.out, "Output directory");
}

int do_run(const RunFlags& f, std::optional<Measure> only) {
  RunConfig cfg;
  try {
    cfg = load_run_config(f.config);
  } catch (const Error& e) {
    fmt::print(std::cerr, "config error: {}\n", e.what());
    return kExitConfig;
  }
  RunOverrides o;
  o.jobs = f.jobs;
  o.provider = f.provider;
  o.seed = f.seed;
  if (f.out) o.output_dir = fs::path(*f.out);
  if (only) o.measures = std::vector<Measure>{*only};
  apply_overrides(cfg, o);
  return run_audit(cfg, std::cerr);
}

int do_radar(const std::string& results_dir, const std::string& model_id, const std::string& out) {
  std::vector<MeasureResult> results;
  for (auto m : kAllMeasures) {
    const fs::path path = fs::path(results_dir) / fmt::format("{}.json", to_string(m));
    std::ifstream in(path, std::ios::binary);
    if (!in) continue;
    try {
      results.push_back(result_from_json(nlohmann::json::parse(in)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
  }
  const auto profile = make_radar(model_id, results);
  const std::string text = to_json(profile).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream o(out, std::ios::binary);
    o << text;
    if (!o) throw Error(fmt::format("cannot write {}", out));
  }
  return kExitOk;
}

int do_validate(const std::string& config, const std::string& manifest_path) {
  fs::path manifest_file = manifest_path;
  if (!config.empty()) {
    const RunConfig cfg = load_run_config(config);
    manifest_file = cfg.manifest_path;
    fmt::print("config ok: {} measure(s)\n", cfg.measures.size());
  }
  if (manifest_file.empty()) throw ConfigError("validate needs --config or --manifest");
  const Manifest m = load_manifest(manifest_file);
  fmt::print("manifest ok: {} sample(s), {} run(s), {} group(s)\n", m.samples.size(), m.runs.size(),
             m.groups.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dataset-scale salience audit"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run the configured measures end to end");
  add_run_flags(run, run_flags);

  std::vector<std::pair<CLI::App*, Measure>> shortcuts;
  for (auto m : kAllMeasures) {
    auto* cmd = app.add_subcommand(std::string(to_string(m)), fmt::format("Run only the {} measure", to_string(m)));
    add_run_flags(cmd, run_flags);
    shortcuts.emplace_back(cmd, m);
  }

  std::string results_dir;
  std::string model_id = "model";
  std::string radar_out;
  auto* radar = app.add_subcommand("radar", "Build radar data from a results directory");
  radar->add_option("--results", results_dir, "Directory holding <measure>.json files")->required();
  radar->add_option("--model-id", model_id, "Model label");
  radar->add_option("--out", radar_out, "Output file (default: stdout)");

  std::string validate_config;
  std::string validate_manifest;
  auto* validate = app.add_subcommand("validate", "Check a config and its manifest");
  validate->add_option("--config", validate_config, "Run configuration");
  validate->add_option("--manifest", validate_manifest, "Dataset manifest");

  std::string job_manifest;
  auto* mock = app.add_subcommand("mock-provider", "Serve a provider job with the mock provider");
  mock->add_option("job", job_manifest, "Path to job.json")->required();

  std::string fixture_dir;
  FixtureOptions fixture;
  auto* make = app.add_subcommand("make-fixture", "Write a mock-scored demo dataset");
  make->add_option("--out", fixture_dir, "Target directory")->required();
  make->add_option("--samples", fixture.samples, "Number of samples");
  make->add_option("--side", fixture.side, "Image side in pixels");
  make->add_option("--seed", fixture.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return do_run(run_flags, std::nullopt);
    for (const auto& [cmd, m] : shortcuts) {
      if (cmd->parsed()) return do_run(run_flags, m);
    }
    if (radar->parsed()) return do_radar(results_dir, model_id, radar_out);
    if (validate->parsed()) return do_validate(validate_config, validate_manifest);
    if (mock->parsed()) {
      serve_mock_job(job_manifest);
      return kExitOk;
    }
    if (make->parsed()) {
      fmt::print("{}\n", make_fixture(fixture_dir, fixture).string());
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    fmt::print(std::cerr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const ValidationError& e) {
    fmt::print(std::cerr, "invalid: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
