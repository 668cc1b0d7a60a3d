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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aad/audio_io.hpp"
#include "aad/dsp_features.hpp"

namespace aad {

struct ScoreRecord {
  std::string clip;
  MachineType machine_type = MachineType::kSynthetic;
  int machine_id = 0;
  Label label = Label::kUnlabeled;
  double score = 0.0;
  std::size_t frames = 0;  // N_s, frames averaged into the score
};

struct ThresholdConfig {
  double max_fpr = 0.10;
};

enum class Decision { kNormal, kAnomaly };
std::string_view to_string(Decision decision);

// Mean over frames of the squared Euclidean distance between observed and
// reconstructed frame vectors.
double anomaly_score(const FeatureMatrix& observed, const FeatureMatrix& reconstructed);

// Nearest-rank quantile: the ceil((1 - p) * N)-th smallest normal score. At
// most a fraction p of the normal scores lies strictly above it.
double select_threshold(std::span<const double> normal_scores, double max_fpr);

// Anomaly iff score > tau; ties are normal.
Decision decide(double score, double tau);

// Fraction of scores strictly above tau.
double false_positive_rate(std::span<const double> normal_scores, double tau);

// clip_path, machine_type, machine_id, label, score, decision
void write_score_csv(const std::filesystem::path& path, const std::vector<ScoreRecord>& records,
                     double tau);
std::vector<ScoreRecord> read_score_csv(const std::filesystem::path& path);

}  // namespace aad
