/* Copyright 2026 The AAD Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aad/scoring.hpp"

namespace aad {

class Model;
struct FeatureConfig;
struct DatasetIndex;

// Mann-Whitney statistic with H(0) = 1/2, computed with integer pair counts.
double roc_auc(std::span<const double> normal_scores, std::span<const double> anomaly_scores);
double roc_auc(const std::vector<ScoreRecord>& records);

// Trapezoidal area under the empirical ROC curve. Same value as roc_auc,
// obtained by sweeping the threshold over the merged sorted scores.
double roc_auc_trapezoid(std::span<const double> normal_scores,
                         std::span<const double> anomaly_scores);

// Partial AUC over FPR in [0, p]: the floor(p * N-) highest-scoring normals
// against every anomaly, normalised by that count times N+. `use_ceil`
// switches the count to ceil(p * N-).
double pauc(std::span<const double> normal_scores, std::span<const double> anomaly_scores,
            double p, bool use_ceil = false);
double pauc(const std::vector<ScoreRecord>& records, double p, bool use_ceil = false);

struct IdResult {
  int id = 0;
  double auc = 0.0;   // percent
  double pauc = 0.0;  // percent
  std::size_t n_normal = 0;
  std::size_t n_anomaly = 0;
  std::optional<std::string> error;
};

struct MachineResult {
  MachineType type = MachineType::kSynthetic;
  std::vector<IdResult> ids;
  double avg_auc = 0.0;
  double avg_pauc = 0.0;
};

struct EvalReport {
  std::string model;
  double p = 0.05;
  std::optional<std::size_t> parameters;
  std::vector<MachineResult> machines;
};

// Groups records by (machine_type, machine_id); IDs that cannot be scored
// keep an error string and are left out of the averages.
EvalReport build_report(const std::vector<ScoreRecord>& records, const std::string& model,
                        double p, bool use_ceil = false);

struct EvalConfig {
  double p = 0.05;
  bool pauc_ceil = false;
  double test_normal_fraction = 0.1;
  // Cached AADF features are used when present under this directory.
  std::filesystem::path feature_cache_dir;
};

EvalReport evaluate_dataset(const Model& model, const DatasetIndex& index,
                            const FeatureConfig& features, const EvalConfig& config,
                            std::vector<ScoreRecord>* records_out = nullptr);

enum class ReportFormat { kJson, kCsv, kMarkdown };

std::string report_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_csv(const EvalReport& report);
// One column pair per report; the best AUC and pAUC of each row are bold.
std::string report_markdown(const std::vector<EvalReport>& reports);
void emit_report(const EvalReport& report, ReportFormat format,
                 const std::filesystem::path& path);

}  // namespace aad
