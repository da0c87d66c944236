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

#include "salaudit/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "salaudit/errors.hpp"

namespace salaudit {

using nlohmann::json;

namespace {

json series_json(const Series& s) {
  json stats = json::object();
  for (const auto& [key, g] : s.group_stats) {
    stats[key] = {{"mean", g.mean}, {"std", g.std}, {"n", g.n}};
  }
  return {{"per_sample", s.per_sample}, {"group_stats", stats}};
}

Series series_from(const json& doc) {
  Series s;
  s.per_sample = doc.at("per_sample").get<std::map<std::string, double>>();
  for (const auto& [key, g] : doc.at("group_stats").items()) {
    s.group_stats[key] = {g.at("mean").get<double>(), g.at("std").get<double>(),
                          g.at("n").get<std::size_t>()};
  }
  return s;
}

ExclusionKind parse_exclusion_kind(const std::string& text) {
  for (auto k : {ExclusionKind::missing_input, ExclusionKind::degenerate,
                 ExclusionKind::provider_failure}) {
    if (to_string(k) == text) return k;
  }
  throw ValidationError(fmt::format("unknown exclusion kind '{}'", text));
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

const MeasureResult* find_result(std::span<const MeasureResult> results, Measure m) {
  for (const auto& r : results) {
    if (r.measure == m) return &r;
  }
  return nullptr;
}

double total_mean(const Series& s, std::string_view what) {
  auto it = s.group_stats.find("total");
  if (it == s.group_stats.end()) {
    throw ValidationError(fmt::format("radar: {} has no scored samples", what));
  }
  return it->second.mean;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

json to_json(const MeasureResult& r) {
  json doc;
  doc["measure"] = to_string(r.measure);
  doc["config_echo"] = r.config_echo;
  const json headline = series_json(r.headline);
  doc["per_sample"] = headline["per_sample"];
  doc["group_stats"] = headline["group_stats"];
  json components = json::object();
  for (const auto& [key, s] : r.components) components[key] = series_json(s);
  doc["components"] = components;
  doc["scalars"] = r.scalars;
  json ex = json::array();
  for (const auto& e : r.exclusions) {
    ex.push_back({{"sample_id", e.sample_id},
                  {"component", e.component},
                  {"kind", to_string(e.kind)},
                  {"reason", e.reason}});
  }
  doc["exclusions"] = ex;
  return doc;
}

MeasureResult result_from_json(const json& doc) {
  try {
    MeasureResult r;
    const auto name = doc.at("measure").get<std::string>();
    const auto m = parse_measure(name);
    if (!m) throw ValidationError(fmt::format("unknown measure '{}'", name));
    r.measure = *m;
    r.config_echo = doc.at("config_echo");
    r.headline = series_from(doc);
    for (const auto& [key, s] : doc.at("components").items()) r.components[key] = series_from(s);
    r.scalars = doc.at("scalars").get<std::map<std::string, double>>();
    for (const auto& e : doc.at("exclusions")) {
      r.exclusions.push_back({e.at("sample_id").get<std::string>(),
                              e.at("component").get<std::string>(),
                              parse_exclusion_kind(e.at("kind").get<std::string>()),
                              e.at("reason").get<std::string>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed result document: {}", e.what()));
  }
}

std::string to_csv(const MeasureResult& r, const Manifest& manifest) {
  std::set<std::string> ids;
  for (const auto& [id, v] : r.headline.per_sample) ids.insert(id);
  for (const auto& [key, s] : r.components) {
    for (const auto& [id, v] : s.per_sample) ids.insert(id);
  }
  std::string out = "sample_id,class_label,dataset_tag,value";
  for (const auto& [key, s] : r.components) out += "," + csv_field(key);
  out += '\n';
  for (const auto& id : ids) {
    const SampleRecord* rec = manifest.find(id);
    out += csv_field(id);
    out += ',';
    if (rec) out += to_string(rec->class_label);
    out += ',';
    if (rec) out += csv_field(rec->dataset_tag);
    auto cell = [&](const Series& s) {
      out += ',';
      auto it = s.per_sample.find(id);
      if (it != s.per_sample.end()) out += number(it->second);
    };
    cell(r.headline);
    for (const auto& [key, s] : r.components) cell(s);
    out += '\n';
  }
  return out;
}

std::string noise_curve_csv(std::span<const NoiseCurve> curves) {
  std::string out = "kind,level,mean_ssim,n\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.levels.size(); ++i) {
      out += fmt::format("{},{},{},{}\n", to_string(c.kind), number(c.levels[i]),
                         number(c.mean_ssim[i]), c.n[i]);
    }
  }
  return out;
}

std::string roc_points_csv(const MeasureResult& focus, const Manifest& manifest) {
  std::string out = "condition,threshold,fpr,tpr\n";
  for (const char* condition : {"original", "salient", "non_salient"}) {
    auto it = focus.components.find(fmt::format("score:{}", condition));
    if (it == focus.components.end()) continue;
    std::vector<double> scores;
    std::vector<ClassLabel> labels;
    for (const auto& [id, score] : it->second.per_sample) {
      const SampleRecord* rec = manifest.find(id);
      if (!rec) continue;
      scores.push_back(score);
      labels.push_back(rec->class_label);
    }
    const bool both = std::count(labels.begin(), labels.end(), ClassLabel::synthetic) > 0 &&
                      std::count(labels.begin(), labels.end(), ClassLabel::authentic) > 0;
    if (!both) continue;
    for (const auto& p : roc_curve(scores, labels)) {
      out += fmt::format("{},{},{},{}\n", condition, number(p.threshold), number(p.fpr),
                         number(p.tpr));
    }
  }
  return out;
}

RadarProfile make_radar(const std::string& model_id, const RadarInputs& in) {
  RadarProfile p;
  p.model_id = model_id;
  p.inputs = in;
  p.axes["entropy'"] = clamp01(1.0 - in.entropy);
  p.axes["noise"] = clamp01(in.noise);
  p.axes["resilience"] = clamp01(in.resilience);
  p.axes["focus'"] = clamp01(((1.0 - in.focus_salient) + in.focus_non_salient) / 2.0);
  p.axes["stability"] = clamp01(in.stability);
  return p;
}

RadarProfile make_radar(const std::string& model_id, std::span<const MeasureResult> results) {
  std::vector<std::string> missing;
  for (auto m : kAllMeasures) {
    if (!find_result(results, m)) missing.push_back(fmt::format("radar: missing measure '{}'", to_string(m)));
  }
  if (!missing.empty()) throw ValidationError(std::move(missing));

  RadarInputs in;
  in.entropy = total_mean(find_result(results, Measure::entropy)->headline, "entropy");
  in.noise = total_mean(find_result(results, Measure::noise)->headline, "noise");
  const auto* res = find_result(results, Measure::resilience);
  auto grand = res->scalars.find("grand_mean");
  if (grand == res->scalars.end()) throw ValidationError("radar: resilience has no grand mean");
  in.resilience = grand->second;
  const auto* focus = find_result(results, Measure::focus);
  for (const char* arm : {"salient", "non_salient"}) {
    if (!focus->components.count(arm)) {
      throw ValidationError(fmt::format("radar: focus result lacks the '{}' arm", arm));
    }
  }
  in.focus_salient = total_mean(focus->components.at("salient"), "focus salient");
  in.focus_non_salient = total_mean(focus->components.at("non_salient"), "focus non_salient");
  in.stability = total_mean(find_result(results, Measure::stability)->headline, "stability");
  return make_radar(model_id, in);
}

json to_json(const RadarProfile& p) {
  json axes = json::object();
  for (const char* key : kRadarAxes) axes[key] = p.axes.at(key);
  return {{"model_id", p.model_id},
          {"axes", axes},
          {"inputs",
           {{"entropy", p.inputs.entropy},
            {"noise", p.inputs.noise},
            {"resilience", p.inputs.resilience},
            {"focus_salient", p.inputs.focus_salient},
            {"focus_non_salient", p.inputs.focus_non_salient},
            {"stability", p.inputs.stability}}}};
}

std::string render_summary(const std::string& model_id, std::span<const MeasureResult> results) {
  struct Row {
    std::string label;
    const Series* series;
  };
  std::vector<Row> rows;
  std::set<std::string> datasets;
  for (auto m : kAllMeasures) {
    const auto* r = find_result(results, m);
    if (!r) continue;
    if (m == Measure::focus) {
      for (const char* arm : {"salient", "non_salient"}) {
        auto it = r->components.find(arm);
        if (it != r->components.end()) rows.push_back({fmt::format("focus ({})", arm), &it->second});
      }
    } else {
      rows.push_back({std::string(to_string(m)), &r->headline});
    }
  }
  for (const auto& row : rows) {
    for (const auto& [key, g] : row.series->group_stats) {
      if (key.rfind("dataset:", 0) == 0) datasets.insert(key);
    }
  }
  std::vector<std::string> columns = {"class:authentic"};
  columns.insert(columns.end(), datasets.begin(), datasets.end());
  columns.push_back("class:synthetic");
  columns.push_back("total");

  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header = {"measure"};
  for (const auto& c : columns) header.push_back(c.substr(c.find(':') + 1));
  table.push_back(header);
  for (const auto& row : rows) {
    std::vector<std::string> line = {row.label};
    for (const auto& c : columns) {
      auto it = row.series->group_stats.find(c);
      line.push_back(it == row.series->group_stats.end()
                         ? "-"
                         : fmt::format("{:.3f} ± {:.3f}", it->second.mean, it->second.std));
    }
    table.push_back(line);
  }
  std::vector<std::size_t> widths(header.size(), 0);
  auto display_width = [](const std::string& s) {
    // "±" is two bytes in UTF-8 but one column.
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
  };
  for (const auto& line : table) {
    for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], display_width(line[i]));
  }

  std::string out = fmt::format("model: {}\n\n", model_id);
  for (std::size_t li = 0; li < table.size(); ++li) {
    const auto& line = table[li];
    for (std::size_t i = 0; i < line.size(); ++i) {
      out += line[i];
      if (i + 1 < line.size()) out += std::string(widths[i] - display_width(line[i]) + 2, ' ');
    }
    out += '\n';
    if (li == 0) {
      std::size_t total = 0;
      for (auto w : widths) total += w + 2;
      out += std::string(total - 2, '-') + '\n';
    }
  }

  if (const auto* res = find_result(results, Measure::resilience)) {
    out += "\nresilience by transform group\n";
    for (const char* g : {"shifts", "flips", "rotations"}) {
      auto it = res->scalars.find(fmt::format("group:{}", g));
      if (it != res->scalars.end()) out += fmt::format("  {:<10} {:.3f}\n", g, it->second);
    }
    if (auto it = res->scalars.find("grand_mean"); it != res->scalars.end()) {
      out += fmt::format("  {:<10} {:.3f}\n", "mean", it->second);
    }
  }
  if (const auto* focus = find_result(results, Measure::focus)) {
    bool any = false;
    for (const char* c : {"original", "salient", "non_salient"}) {
      auto it = focus->scalars.find(fmt::format("auroc:{}", c));
      if (it == focus->scalars.end()) continue;
      if (!any) out += "\nAUROC (synthetic vs authentic)\n";
      any = true;
      out += fmt::format("  {:<12} {:.3f}\n", c, it->second);
    }
  }
  std::size_t excluded = 0;
  for (const auto& r : results) excluded += r.exclusions.size();
  if (excluded > 0) {
    out += "\nexclusions\n";
    for (const auto& r : results) {
      if (!r.exclusions.empty()) out += fmt::format("  {:<12} {}\n", to_string(r.measure), r.exclusions.size());
    }
  }
  return out;
}

}  // namespace salaudit
