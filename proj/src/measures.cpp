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

#include "salaudit/measures.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/format.h>

#include "parallel.hpp"
#include "salaudit/errors.hpp"

namespace salaudit {

using nlohmann::json;

namespace {

constexpr const char* kCleanTag = "clean";

json ssim_echo(const SsimConfig& cfg) {
  return {{"k1", cfg.k1},
          {"k2", cfg.k2},
          {"dynamic_range", cfg.dynamic_range ? json(*cfg.dynamic_range) : json("auto")},
          {"window", "global"},
          {"variance", "population"}};
}

json base_echo(const std::string& run_id) {
  return {{"run_id", run_id}, {"std", "population"}};
}

void fresh_dir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

std::string slug(std::string_view tag) {
  std::string out;
  for (char c : tag) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

std::optional<Shape> native_shape(const Manifest& manifest, const std::string& run_id) {
  for (const auto& s : manifest.samples) {
    auto it = s.salience_paths.find(run_id);
    if (it == s.salience_paths.end()) continue;
    try {
      return load_salience(it->second).shape();
    } catch (const Error&) {
      continue;
    }
  }
  return std::nullopt;
}

struct LoadedSample {
  const SampleRecord* record = nullptr;
  InputImage image;
};

std::vector<LoadedSample> load_images(const Manifest& manifest, unsigned jobs,
                                      std::vector<Exclusion>& exclusions) {
  std::vector<std::optional<InputImage>> images(manifest.samples.size());
  std::vector<std::string> errors(manifest.samples.size());
  detail::parallel_for(manifest.samples.size(), jobs, [&](std::size_t i) {
    const auto& s = manifest.samples[i];
    if (!s.image_path) {
      errors[i] = "no image_path";
      return;
    }
    try {
      images[i] = load_image(*s.image_path);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  std::vector<LoadedSample> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]) {
      out.push_back({&manifest.samples[i], std::move(*images[i])});
    } else {
      exclusions.push_back({manifest.samples[i].sample_id, "", ExclusionKind::missing_input,
                            errors[i]});
    }
  }
  return out;
}

using VariantList = std::vector<std::pair<std::string, InputImage>>;

struct Pass {
  ProviderResult result;
  /// Index into the sample list -> reason the sample produced no variants.
  std::vector<std::optional<std::string>> skipped;
};

// Writes every sample's variants as PNGs, runs one provider job over them and
// returns the validated result.
Pass run_pass(SalienceProvider& provider, const std::string& job_id, const std::string& run_id,
              const fs::path& dir, const std::vector<LoadedSample>& samples,
              const std::function<VariantList(std::size_t)>& make_variants,
              std::optional<Shape> expected_shape, unsigned jobs) {
  const fs::path images_dir = dir / "images";
  const fs::path output_dir = dir / "output";
  fresh_dir(dir);
  fs::create_directories(images_dir);

  std::vector<std::vector<ProviderRequest>> per_sample(samples.size());
  Pass pass;
  pass.skipped.resize(samples.size());
  detail::parallel_for(samples.size(), jobs, [&](std::size_t i) {
    VariantList variants;
    try {
      variants = make_variants(i);
    } catch (const Error& e) {
      pass.skipped[i] = e.what();
      return;
    }
    for (const auto& [tag, image] : variants) {
      const std::string file = fmt::format("s{:05}_{}.png", i, slug(tag));
      write_image_png(image, images_dir / file);
      per_sample[i].push_back({samples[i].record->sample_id, file, tag});
    }
  });

  ProviderJob job;
  job.job_id = job_id;
  job.run_id = run_id;
  job.images_dir = images_dir;
  job.output_dir = output_dir;
  job.expected_shape = expected_shape;
  for (auto& reqs : per_sample) {
    for (auto& r : reqs) job.requests.push_back(std::move(r));
  }
  pass.result = provider.run(job);
  return pass;
}

std::string noise_tag(NoiseKind kind, double level) {
  return fmt::format("noise:{}:{}", kind == NoiseKind::salt_pepper ? "sp" : "uniform", level);
}

}  // namespace

// --- shared ----------------------------------------------------------------

std::string_view to_string(Measure m) noexcept {
  switch (m) {
    case Measure::entropy: return "entropy";
    case Measure::noise: return "noise";
    case Measure::resilience: return "resilience";
    case Measure::focus: return "focus";
    case Measure::stability: return "stability";
  }
  return "?";
}

std::optional<Measure> parse_measure(std::string_view text) noexcept {
  for (auto m : kAllMeasures) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

std::string_view to_string(ExclusionKind kind) noexcept {
  switch (kind) {
    case ExclusionKind::missing_input: return "missing_input";
    case ExclusionKind::degenerate: return "degenerate";
    case ExclusionKind::provider_failure: return "provider_failure";
  }
  return "?";
}

std::string_view to_string(TransformGroup group) noexcept {
  switch (group) {
    case TransformGroup::identity: return "identity";
    case TransformGroup::shifts: return "shifts";
    case TransformGroup::flips: return "flips";
    case TransformGroup::rotations: return "rotations";
  }
  return "?";
}

GroupStats compute_stats(std::span<const double> values) {
  GroupStats g;
  g.n = values.size();
  if (values.empty()) return g;
  double sum = 0.0;
  for (double v : values) sum += v;
  g.mean = sum / static_cast<double>(g.n);
  double sq = 0.0;
  for (double v : values) sq += (v - g.mean) * (v - g.mean);
  g.std = std::sqrt(sq / static_cast<double>(g.n));
  return g;
}

Series make_series(const Manifest& manifest, std::map<std::string, double> per_sample) {
  std::map<std::string, std::vector<double>> buckets;
  for (const auto& [id, value] : per_sample) {
    const SampleRecord* rec = manifest.find(id);
    if (!rec) throw Error(fmt::format("sample '{}' is not in the manifest", id));
    buckets[fmt::format("class:{}", to_string(rec->class_label))].push_back(value);
    buckets["dataset:" + rec->dataset_tag].push_back(value);
    buckets["total"].push_back(value);
  }
  Series s;
  for (const auto& [key, values] : buckets) s.group_stats[key] = compute_stats(values);
  s.per_sample = std::move(per_sample);
  return s;
}

std::size_t MeasureResult::provider_failures() const {
  return static_cast<std::size_t>(std::count_if(
      exclusions.begin(), exclusions.end(),
      [](const Exclusion& e) { return e.kind == ExclusionKind::provider_failure; }));
}

// --- entropy ---------------------------------------------------------------

MeasureResult measure_entropy(const Manifest& manifest, const std::string& run_id,
                              const EntropyConfig& cfg, unsigned jobs) {
  cfg.validate();
  if (!manifest.has_run(run_id)) throw ConfigError(fmt::format("unknown run '{}'", run_id));
  const auto& samples = manifest.samples;
  std::vector<std::optional<double>> values(samples.size());
  std::vector<std::optional<Exclusion>> excluded(samples.size());
  detail::parallel_for(samples.size(), jobs, [&](std::size_t i) {
    const auto& s = samples[i];
    auto it = s.salience_paths.find(run_id);
    if (it == s.salience_paths.end()) {
      excluded[i] = Exclusion{s.sample_id, "", ExclusionKind::missing_input,
                              fmt::format("no salience for run '{}'", run_id)};
      return;
    }
    try {
      values[i] = entropy(load_salience(it->second), cfg);
    } catch (const DomainError& e) {
      excluded[i] = Exclusion{s.sample_id, "", ExclusionKind::degenerate, e.what()};
    } catch (const Error& e) {
      excluded[i] = Exclusion{s.sample_id, "", ExclusionKind::missing_input, e.what()};
    }
  });

  MeasureResult r;
  r.measure = Measure::entropy;
  std::map<std::string, double> per_sample;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (values[i]) per_sample[samples[i].sample_id] = *values[i];
    if (excluded[i]) r.exclusions.push_back(*excluded[i]);
  }
  r.headline = make_series(manifest, std::move(per_sample));
  r.config_echo = base_echo(run_id);
  r.config_echo["entropy"] = {{"mode", to_string(cfg.mode)},
                              {"histogram_bins", cfg.histogram_bins},
                              {"resolution", "native"}};
  return r;
}

// --- noise -----------------------------------------------------------------

void NoiseConfig::validate() const {
  std::vector<std::string> bad;
  if (kinds.empty()) bad.emplace_back("noise: at least one kind is required");
  for (double l : levels) {
    if (!(l >= 0.0 && l <= 1.0)) bad.push_back(fmt::format("noise: level {} outside [0,1]", l));
  }
  if (!(reporting_level >= 0.0 && reporting_level <= 1.0)) {
    bad.push_back(fmt::format("noise: reporting_level {} outside [0,1]", reporting_level));
  }
  if (std::find(kinds.begin(), kinds.end(), reporting_kind) == kinds.end()) {
    bad.push_back(fmt::format("noise: reporting_kind {} is not among the configured kinds",
                              to_string(reporting_kind)));
  }
  if (!bad.empty()) throw ConfigError(fmt::format("{}", fmt::join(bad, "; ")));
}

std::vector<double> NoiseConfig::grid() const {
  std::vector<double> g = levels;
  g.push_back(0.0);
  g.push_back(reporting_level);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

std::string noise_component(NoiseKind kind, double level) {
  return fmt::format("{}:{}", to_string(kind), level);
}

NoiseOutcome measure_noise(const Manifest& manifest, const std::string& run_id,
                           const NoiseConfig& cfg, SalienceProvider& provider,
                           const SsimConfig& ssim_cfg, const ExecContext& ctx) {
  cfg.validate();
  ssim_cfg.validate();
  if (!manifest.has_run(run_id)) throw ConfigError(fmt::format("unknown run '{}'", run_id));
  const auto grid = cfg.grid();

  MeasureResult r;
  r.measure = Measure::noise;
  const auto samples = load_images(manifest, ctx.jobs, r.exclusions);

  auto make_variants = [&](std::size_t i) {
    VariantList v;
    const auto& s = samples[i];
    v.emplace_back(kCleanTag, s.image);
    const std::uint64_t seed = sample_seed(cfg.seed, s.record->sample_id);
    for (NoiseKind kind : cfg.kinds) {
      for (double level : grid) {
        // Level 0 is the clean image; its map is the clean map by construction.
        if (level == 0.0) continue;
        v.emplace_back(noise_tag(kind, level), add_noise(s.image, NoiseSpec{kind, level, seed}));
      }
    }
    return v;
  };
  const auto pass = run_pass(provider, "noise-" + run_id, run_id, ctx.work_dir / ("noise-" + run_id),
                             samples, make_variants, native_shape(manifest, run_id), ctx.jobs);

  std::map<std::string, std::map<std::string, double>> comp;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string& sid = samples[i].record->sample_id;
    const ProviderRow* clean = pass.result.find(sid, kCleanTag);
    if (!clean || clean->status != RowStatus::ok) {
      r.exclusions.push_back({sid, "", ExclusionKind::provider_failure,
                              clean ? clean->reason : "clean image not scored"});
      continue;
    }
    for (NoiseKind kind : cfg.kinds) {
      for (double level : grid) {
        const std::string key = noise_component(kind, level);
        const ProviderRow* row = level == 0.0 ? clean : pass.result.find(sid, noise_tag(kind, level));
        if (!row || row->status != RowStatus::ok) {
          r.exclusions.push_back({sid, key, ExclusionKind::provider_failure,
                                  row ? row->reason : "variant not scored"});
          continue;
        }
        comp[key][sid] = ssim(*clean->salience, *row->salience, ssim_cfg);
      }
    }
  }

  NoiseOutcome out;
  for (NoiseKind kind : cfg.kinds) {
    NoiseCurve curve;
    curve.kind = kind;
    for (double level : grid) {
      auto& values = comp[noise_component(kind, level)];
      std::vector<double> v;
      for (const auto& [id, x] : values) v.push_back(x);
      const auto stats = compute_stats(v);
      curve.levels.push_back(level);
      curve.mean_ssim.push_back(stats.mean);
      curve.n.push_back(stats.n);
    }
    out.curves.push_back(std::move(curve));
  }
  for (auto& [key, values] : comp) r.components[key] = make_series(manifest, values);
  r.headline = r.components[noise_component(cfg.reporting_kind, cfg.reporting_level)];

  r.config_echo = base_echo(run_id);
  json kinds = json::array();
  for (auto k : cfg.kinds) kinds.push_back(to_string(k));
  r.config_echo["noise"] = {{"kinds", kinds},
                            {"levels", grid},
                            {"reporting_kind", to_string(cfg.reporting_kind)},
                            {"reporting_level", cfg.reporting_level},
                            {"seed", cfg.seed},
                            {"seed_derivation", "seed XOR fnv1a64(sample_id)"}};
  r.config_echo["ssim"] = ssim_echo(ssim_cfg);
  r.config_echo["provider"] = provider.describe();
  out.result = std::move(r);
  return out;
}

// --- resilience ------------------------------------------------------------

std::map<TransformGroup, double> group_means(
    const std::vector<std::pair<TransformSpec, double>>& per_transform) {
  std::map<TransformGroup, std::vector<double>> buckets;
  for (const auto& [spec, value] : per_transform) buckets[spec.group()].push_back(value);
  std::map<TransformGroup, double> out;
  for (const auto& [g, values] : buckets) {
    out[g] = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  }
  return out;
}

MeasureResult measure_resilience(const Manifest& manifest, const std::string& run_id,
                                 const ResilienceConfig& cfg, SalienceProvider& provider,
                                 const SsimConfig& ssim_cfg, const ExecContext& ctx) {
  ssim_cfg.validate();
  if (!manifest.has_run(run_id)) throw ConfigError(fmt::format("unknown run '{}'", run_id));
  if (cfg.transforms.empty()) throw ConfigError("resilience: no transforms configured");
  for (std::size_t i = 0; i < cfg.transforms.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (cfg.transforms[i].name() == cfg.transforms[j].name()) {
        throw ConfigError(fmt::format("resilience: transform {} listed twice", cfg.transforms[i].name()));
      }
    }
  }

  MeasureResult r;
  r.measure = Measure::resilience;
  const auto samples = load_images(manifest, ctx.jobs, r.exclusions);
  // Non-square rotations and degenerate shifts are configuration errors, not
  // per-sample exclusions.
  for (const auto& s : samples) {
    for (const auto& t : cfg.transforms) t.check_applicable(s.image.shape());
  }

  auto make_variants = [&](std::size_t i) {
    VariantList v;
    v.emplace_back(kCleanTag, samples[i].image);
    for (const auto& t : cfg.transforms) v.emplace_back(t.tag(), transform_image(samples[i].image, t));
    return v;
  };
  const auto pass = run_pass(provider, "resilience-" + run_id, run_id,
                             ctx.work_dir / ("resilience-" + run_id), samples, make_variants,
                             native_shape(manifest, run_id), ctx.jobs);

  std::map<std::string, std::map<std::string, double>> comp;
  std::map<std::string, std::vector<double>> valid_fraction;
  std::map<std::string, double> headline;
  bool shapes_checked = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string& sid = samples[i].record->sample_id;
    const ProviderRow* clean = pass.result.find(sid, kCleanTag);
    if (!clean || clean->status != RowStatus::ok) {
      r.exclusions.push_back({sid, "", ExclusionKind::provider_failure,
                              clean ? clean->reason : "clean image not scored"});
      continue;
    }
    const SalienceMap& original = *clean->salience;
    if (!shapes_checked) {
      for (const auto& t : cfg.transforms) t.check_applicable(original.shape());
      shapes_checked = true;
    }
    std::vector<std::pair<TransformSpec, double>> mine;
    for (const auto& t : cfg.transforms) {
      const ProviderRow* row = pass.result.find(sid, t.tag());
      if (!row || row->status != RowStatus::ok) {
        r.exclusions.push_back({sid, t.name(), ExclusionKind::provider_failure,
                                row ? row->reason : "variant not scored"});
        continue;
      }
      const auto corrected = inverse_correct(*row->salience, t);
      const double value = corrected.mask.is_full()
                               ? ssim(original, corrected.map, ssim_cfg)
                               : ssim(crop(original, corrected.mask),
                                      crop(corrected.map, corrected.mask), ssim_cfg);
      comp[t.name()][sid] = value;
      valid_fraction[t.name()].push_back(corrected.mask.fraction());
      mine.emplace_back(t, value);
    }
    if (mine.size() == cfg.transforms.size()) {
      const auto groups = group_means(mine);
      double sum = 0.0;
      for (const auto& [g, v] : groups) sum += v;
      headline[sid] = sum / static_cast<double>(groups.size());
    } else {
      r.exclusions.push_back({sid, "headline", ExclusionKind::provider_failure,
                              "incomplete transform set"});
    }
  }

  std::vector<std::pair<TransformSpec, double>> totals;
  for (const auto& t : cfg.transforms) {
    auto series = make_series(manifest, comp[t.name()]);
    if (series.group_stats.count("total")) {
      const double total = series.group_stats.at("total").mean;
      totals.emplace_back(t, total);
      r.scalars["transform:" + t.name()] = total;
      const auto& vf = valid_fraction[t.name()];
      r.scalars["valid_area_fraction:" + t.name()] =
          std::accumulate(vf.begin(), vf.end(), 0.0) / static_cast<double>(vf.size());
    }
    r.components[t.name()] = std::move(series);
  }
  const auto groups = group_means(totals);
  double grand = 0.0;
  for (const auto& [g, v] : groups) {
    r.scalars[fmt::format("group:{}", to_string(g))] = v;
    grand += v;
  }
  if (!groups.empty()) r.scalars["grand_mean"] = grand / static_cast<double>(groups.size());
  r.headline = make_series(manifest, std::move(headline));

  r.config_echo = base_echo(run_id);
  json names = json::array();
  for (const auto& t : cfg.transforms) names.push_back(t.tag());
  r.config_echo["resilience"] = {{"transforms", names},
                                 {"shift_fill", "edge_replicate"},
                                 {"shift_comparison", "valid_rectangle"}};
  r.config_echo["ssim"] = ssim_echo(ssim_cfg);
  r.config_echo["provider"] = provider.describe();
  return r;
}

// --- focus -----------------------------------------------------------------

MeasureResult measure_focus(const Manifest& manifest, const std::string& run_id,
                            const FocusConfig& cfg, SalienceProvider& provider,
                            const SsimConfig& ssim_cfg, const ExecContext& ctx) {
  ssim_cfg.validate();
  cfg.spec(FocusRegion::salient).validate();
  if (!manifest.has_run(run_id)) throw ConfigError(fmt::format("unknown run '{}'", run_id));
  const auto expected = native_shape(manifest, run_id);

  MeasureResult r;
  r.measure = Measure::focus;
  const auto samples = load_images(manifest, ctx.jobs, r.exclusions);

  const auto clean_pass = run_pass(
      provider, "focus-clean-" + run_id, run_id, ctx.work_dir / ("focus-clean-" + run_id), samples,
      [&](std::size_t i) { return VariantList{{kCleanTag, samples[i].image}}; }, expected, ctx.jobs);

  constexpr FocusRegion kRegions[] = {FocusRegion::salient, FocusRegion::non_salient};
  auto region_tag = [](FocusRegion region) { return fmt::format("focus:{}", to_string(region)); };

  const auto degraded_pass = run_pass(
      provider, "focus-degraded-" + run_id, run_id, ctx.work_dir / ("focus-degraded-" + run_id),
      samples,
      [&](std::size_t i) {
        VariantList v;
        const ProviderRow* clean = clean_pass.result.find(samples[i].record->sample_id, kCleanTag);
        if (!clean || clean->status != RowStatus::ok) return v;
        for (FocusRegion region : kRegions) {
          v.emplace_back(region_tag(region),
                         degrade_by_salience(samples[i].image, *clean->salience, cfg.spec(region)));
        }
        return v;
      },
      expected, ctx.jobs);

  std::map<std::string, std::map<std::string, double>> comp;
  std::vector<double> scores[3];
  std::vector<ClassLabel> labels[3];
  const std::string score_keys[3] = {"original", "salient", "non_salient"};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& rec = *samples[i].record;
    const ProviderRow* clean = clean_pass.result.find(rec.sample_id, kCleanTag);
    if (!clean || clean->status != RowStatus::ok) {
      r.exclusions.push_back({rec.sample_id, "", ExclusionKind::provider_failure,
                              clean ? clean->reason : "clean image not scored"});
      continue;
    }
    comp["score:original"][rec.sample_id] = clean->score;
    scores[0].push_back(clean->score);
    labels[0].push_back(rec.class_label);
    if (degraded_pass.skipped[i]) {
      r.exclusions.push_back({rec.sample_id, "", ExclusionKind::degenerate, *degraded_pass.skipped[i]});
      continue;
    }
    for (std::size_t k = 0; k < 2; ++k) {
      const FocusRegion region = kRegions[k];
      const std::string key(to_string(region));
      const ProviderRow* row = degraded_pass.result.find(rec.sample_id, region_tag(region));
      if (!row || row->status != RowStatus::ok) {
        r.exclusions.push_back({rec.sample_id, key, ExclusionKind::provider_failure,
                                row ? row->reason : "variant not scored"});
        continue;
      }
      comp[key][rec.sample_id] = ssim(*clean->salience, *row->salience, ssim_cfg);
      comp["score:" + key][rec.sample_id] = row->score;
      scores[k + 1].push_back(row->score);
      labels[k + 1].push_back(rec.class_label);
    }
  }
  for (auto key : {"salient", "non_salient", "score:original", "score:salient", "score:non_salient"}) {
    r.components[key] = make_series(manifest, comp[key]);
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const bool both = std::count(labels[k].begin(), labels[k].end(), ClassLabel::authentic) > 0 &&
                      std::count(labels[k].begin(), labels[k].end(), ClassLabel::synthetic) > 0;
    if (both) r.scalars["auroc:" + score_keys[k]] = auroc(scores[k], labels[k]);
  }

  r.config_echo = base_echo(run_id);
  r.config_echo["focus"] = {
      {"threshold_fraction", cfg.threshold_fraction},
      {"blur_sigma", cfg.blur_sigma ? json(*cfg.blur_sigma) : json("auto: 12 px per 224 px")},
      {"mask", "binary, upsampled map >= threshold_fraction * upsampled max"},
      {"upsample", "bilinear"},
      {"blur", "gaussian, reflect padding"}};
  r.config_echo["ssim"] = ssim_echo(ssim_cfg);
  r.config_echo["provider"] = provider.describe();
  return r;
}

// --- stability -------------------------------------------------------------

double pairwise_mean(std::span<const double> pair_ssims, std::size_t runs) {
  if (runs < 2) throw DomainError("stability needs at least two runs");
  if (pair_ssims.size() != runs * (runs - 1) / 2) {
    throw DimensionError(fmt::format("expected {} pairwise values for {} runs, got {}",
                                     runs * (runs - 1) / 2, runs, pair_ssims.size()));
  }
  const double n = static_cast<double>(runs);
  double sum = 0.0;
  for (double v : pair_ssims) sum += v;
  return 2.0 / (n * (n - 1.0)) * sum;
}

double sample_stability(std::span<const SalienceMap> maps, const SsimConfig& cfg) {
  std::vector<double> pairs;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) pairs.push_back(ssim(maps[i], maps[j], cfg));
  }
  return pairwise_mean(pairs, maps.size());
}

MeasureResult measure_stability(const Manifest& manifest, const std::vector<std::string>& runs,
                                const SsimConfig& cfg, unsigned jobs) {
  cfg.validate();
  if (runs.size() < 2) {
    throw ConfigError(fmt::format("stability needs at least 2 runs, got {}", runs.size()));
  }
  for (const auto& run : runs) {
    if (!manifest.has_run(run)) throw ConfigError(fmt::format("unknown run '{}'", run));
  }
  const auto& samples = manifest.samples;
  std::vector<std::optional<double>> values(samples.size());
  std::vector<std::optional<Exclusion>> excluded(samples.size());
  detail::parallel_for(samples.size(), jobs, [&](std::size_t i) {
    const auto& s = samples[i];
    std::vector<SalienceMap> maps;
    for (const auto& run : runs) {
      auto it = s.salience_paths.find(run);
      if (it == s.salience_paths.end()) {
        excluded[i] = Exclusion{s.sample_id, "", ExclusionKind::missing_input,
                                fmt::format("no salience for run '{}'", run)};
        return;
      }
      try {
        maps.push_back(load_salience(it->second));
      } catch (const Error& e) {
        excluded[i] = Exclusion{s.sample_id, "", ExclusionKind::missing_input, e.what()};
        return;
      }
    }
    try {
      values[i] = sample_stability(maps, cfg);
    } catch (const DimensionError& e) {
      excluded[i] = Exclusion{s.sample_id, "", ExclusionKind::degenerate, e.what()};
    }
  });

  MeasureResult r;
  r.measure = Measure::stability;
  std::map<std::string, double> per_sample;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (values[i]) per_sample[samples[i].sample_id] = *values[i];
    if (excluded[i]) r.exclusions.push_back(*excluded[i]);
  }
  r.headline = make_series(manifest, std::move(per_sample));
  r.config_echo = {{"runs", runs}, {"std", "population"}, {"ssim", ssim_echo(cfg)}};
  return r;
}

// --- AUROC -----------------------------------------------------------------

double auroc(std::span<const double> scores, std::span<const ClassLabel> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError(fmt::format("auroc: {} scores but {} labels", scores.size(), labels.size()));
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (double s : scores) {
    if (!std::isfinite(s)) throw DomainError("auroc: scores must be finite");
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (1-based, tie-averaged) ranks of the synthetic samples, kept in
  // half units so it stays an exact integer.
  double rank_sum_x2 = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank_x2 = static_cast<double>(i + 1 + j);  // 2 * (i+1 + j)/2
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == ClassLabel::synthetic) {
        rank_sum_x2 += avg_rank_x2;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DomainError("auroc undefined: both authentic and synthetic samples are required");
  }
  const double p = static_cast<double>(positives);
  const double u_x2 = rank_sum_x2 - p * (p + 1.0);
  return (u_x2 / 2.0) / (p * static_cast<double>(negatives));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const ClassLabel> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError(fmt::format("roc: {} scores but {} labels", scores.size(), labels.size()));
  }
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), ClassLabel::synthetic));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw DomainError("roc undefined: both authentic and synthetic samples are required");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> out;
  out.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] == ClassLabel::synthetic ? tp : fp)++;
      ++i;
    }
    out.push_back({t, static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos)});
  }
  return out;
}

}  // namespace salaudit
