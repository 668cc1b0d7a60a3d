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
#include <optional>
#include <span>
#include <vector>

#include "aad/audio_io.hpp"
#include "aad/dsp_features.hpp"
#include "aad/models.hpp"
#include "aad/scoring.hpp"

namespace aad {

// Per (machine_type, machine_id): the last `test_normal_fraction` of the
// normal clips (path order) are held out; every anomaly goes to test.
struct DatasetSplit {
  std::vector<DatasetEntry> train;
  std::vector<DatasetEntry> test;
};

DatasetSplit split_dataset(const DatasetIndex& index, double test_normal_fraction);

// Decodes a clip, resamples it to the extractor's rate and computes log-mel.
FeatureMatrix clip_features(const std::filesystem::path& wav, const LogMelExtractor& extractor);

// Location of a clip's cached features under `cache_dir`, mirroring the
// dataset layout relative to `root`.
std::filesystem::path feature_cache_path(const std::filesystem::path& cache_dir,
                                         const std::filesystem::path& root,
                                         const std::filesystem::path& wav);

// Reads the cache when it exists and was computed with the same config,
// otherwise computes the features.
FeatureMatrix load_features(const std::filesystem::path& wav, const LogMelExtractor& extractor,
                            const std::optional<std::filesystem::path>& cached = std::nullopt);

// Anomaly score of one clip's log-mel features under the model.
double clip_score(const Model& model, const FeatureMatrix& log_mel);

std::vector<ScoreRecord> score_entries(const Model& model, const std::vector<DatasetEntry>& entries,
                                       const LogMelExtractor& extractor,
                                       const std::filesystem::path& cache_dir = {},
                                       const std::filesystem::path& root = {});

// Sets model.threshold from the scores of normal clips.
double calibrate_threshold(Model& model, std::span<const double> normal_scores, double max_fpr);

// Sliding-window scorer over a pushed sample stream.
class StreamScorer {
 public:
  struct Result {
    double timestamp_s = 0.0;  // window start
    double score = 0.0;
    Decision decision = Decision::kNormal;
  };

  StreamScorer(const Model& model, const FeatureConfig& features, double window_s, double hop_s);

  std::vector<Result> push(std::span<const float> samples);

  double audio_seconds() const { return audio_seconds_; }
  double processing_seconds() const { return processing_seconds_; }
  // Processing time over audio time.
  double real_time_factor() const;

 private:
  const Model& model_;
  StreamingFeatureExtractor extractor_;
  double tau_;
  int sample_rate_;
  double audio_seconds_ = 0.0;
  double processing_seconds_ = 0.0;
};

// Offline counterpart of StreamScorer over a whole sample buffer.
std::vector<StreamScorer::Result> score_windows(const Model& model, std::span<const float> samples,
                                                const FeatureConfig& features, double window_s,
                                                double hop_s);

// Clip-level vectors for embedding: the mean stacked feature row in the
// model's normalised space, and the mean latent code.
std::vector<float> raw_clip_vector(const Model& model, const FeatureMatrix& log_mel);

}  // namespace aad
