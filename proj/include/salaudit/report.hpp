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

/// @file report.hpp
/// @brief Serialization of measure results and the derived report artifacts:
/// per-sample CSV, noise curves, ROC points, radar profile, summary table.

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "salaudit/measures.hpp"

namespace salaudit {

/// Full-precision JSON; from_json(to_json(r)) == r.
nlohmann::json to_json(const MeasureResult& result);
MeasureResult result_from_json(const nlohmann::json& doc);

/// One row per sample that has any value: sample_id, class_label,
/// dataset_tag, value, then one column per component. Missing cells are
/// empty.
std::string to_csv(const MeasureResult& result, const Manifest& manifest);

std::string noise_curve_csv(std::span<const NoiseCurve> curves);

/// ROC operating points of the focus scores per condition ("original",
/// "salient", "non_salient"). Conditions with a single class are skipped.
std::string roc_points_csv(const MeasureResult& focus, const Manifest& manifest);

inline constexpr const char* kRadarAxes[] = {"entropy'", "noise", "resilience", "focus'",
                                             "stability"};

struct RadarInputs {
  double entropy = 0.0;
  double noise = 0.0;
  double resilience = 0.0;
  double focus_salient = 0.0;
  double focus_non_salient = 0.0;
  double stability = 0.0;
};

struct RadarProfile {
  std::string model_id;
  std::map<std::string, double> axes;
  RadarInputs inputs;
};

/// entropy' = 1 - entropy and focus' = ((1 - salient) + non_salient) / 2;
/// the rest pass through. Axes are clamped to [0,1].
RadarProfile make_radar(const std::string& model_id, const RadarInputs& inputs);

/// Pulls the dataset totals out of one result per measure. A missing
/// measure raises a ValidationError naming it.
RadarProfile make_radar(const std::string& model_id, std::span<const MeasureResult> results);

nlohmann::json to_json(const RadarProfile& profile);

/// Mean +- std per group to three decimals, plus transform-group and AUROC
/// scalars. Display only; the JSON results keep full precision.
std::string render_summary(const std::string& model_id, std::span<const MeasureResult> results);

}  // namespace salaudit
