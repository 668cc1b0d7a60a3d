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

#include "aad/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "aad/errors.hpp"

namespace aad {

DatasetSplit split_dataset(const DatasetIndex& index, double test_normal_fraction) {
  if (!(test_normal_fraction >= 0.0 && test_normal_fraction < 1.0)) {
    fail(ErrorKind::kConfiguration, "test_normal_fraction must be in [0, 1)");
  }
  std::map<std::pair<MachineType, int>, std::vector<const DatasetEntry*>> normals;
  DatasetSplit split;
  for (const auto& e : index.entries) {
    if (e.label == Label::kNormal) {
      normals[{e.machine_type, e.machine_id}].push_back(&e);
    } else {
      split.test.push_back(e);
    }
  }
  for (auto& [key, group] : normals) {
    std::sort(group.begin(), group.end(),
              [](const DatasetEntry* a, const DatasetEntry* b) { return a->path < b->path; });
    auto n_test = static_cast<std::size_t>(
        std::floor(test_normal_fraction * static_cast<double>(group.size()) + 1e-9));
    if (test_normal_fraction > 0.0 && n_test == 0 && group.size() >= 2) n_test = 1;
    const std::size_t n_train = group.size() - n_test;
    for (std::size_t i = 0; i < group.size(); ++i) {
      (i < n_train ? split.train : split.test).push_back(*group[i]);
    }
  }
  auto by_path = [](const DatasetEntry& a, const DatasetEntry& b) { return a.path < b.path; };
  std::sort(split.train.begin(), split.train.end(), by_path);
  std::sort(split.test.begin(), split.test.end(), by_path);
  return split;
}

FeatureMatrix clip_features(const std::filesystem::path& wav, const LogMelExtractor& extractor) {
  AudioClip clip = read_wav(wav);
  if (clip.sample_rate != extractor.config().sample_rate) {
    clip = resample(clip, extractor.config().sample_rate);
  }
  return extractor.compute(clip.samples);
}

std::filesystem::path feature_cache_path(const std::filesystem::path& cache_dir,
                                         const std::filesystem::path& root,
                                         const std::filesystem::path& wav) {
  std::filesystem::path rel = wav.lexically_relative(root);
  if (rel.empty() || *rel.begin() == "..") rel = wav.filename();
  rel.replace_extension(".aadf");
  return cache_dir / rel;
}

FeatureMatrix load_features(const std::filesystem::path& wav, const LogMelExtractor& extractor,
                            const std::optional<std::filesystem::path>& cached) {
  if (cached && std::filesystem::exists(*cached)) {
    FeatureConfig stored;
    FeatureMatrix fm = read_feature_cache(*cached, &stored);
    if (stored == extractor.config()) return fm;
  }
  return clip_features(wav, extractor);
}

double clip_score(const Model& model, const FeatureMatrix& log_mel) {
  const auto [observed, rebuilt] = model.reconstruct(log_mel);
  return anomaly_score(observed, rebuilt);
}

std::vector<ScoreRecord> score_entries(const Model& model, const std::vector<DatasetEntry>& entries,
                                       const LogMelExtractor& extractor,
                                       const std::filesystem::path& cache_dir,
                                       const std::filesystem::path& root) {
  std::vector<ScoreRecord> records;
  records.reserve(entries.size());
  for (const auto& e : entries) {
    std::optional<std::filesystem::path> cached;
    if (!cache_dir.empty()) cached = feature_cache_path(cache_dir, root, e.path);
    const FeatureMatrix fm = load_features(e.path, extractor, cached);
    const auto [observed, rebuilt] = model.reconstruct(fm);
    ScoreRecord r;
    r.clip = e.path.string();
    r.machine_type = e.machine_type;
    r.machine_id = e.machine_id;
    r.label = e.label;
    r.score = anomaly_score(observed, rebuilt);
    r.frames = observed.frames;
    records.push_back(std::move(r));
  }
  return records;
}

double calibrate_threshold(Model& model, std::span<const double> normal_scores, double max_fpr) {
  const double tau = select_threshold(normal_scores, max_fpr);
  model.threshold = tau;
  model.threshold_max_fpr = max_fpr;
  return tau;
}

StreamScorer::StreamScorer(const Model& model, const FeatureConfig& features, double window_s,
                           double hop_s)
    : model_(model),
      extractor_(features, window_s, hop_s),
      tau_(0.0),
      sample_rate_(features.sample_rate) {
  if (!model.threshold) fail(ErrorKind::kContract, "model has no calibrated threshold");
  if (features.n_mels != model.spec().n_mels) {
    fail(ErrorKind::kSpecMismatch, "feature n_mels " + std::to_string(features.n_mels) +
                                       " does not match the model's " +
                                       std::to_string(model.spec().n_mels));
  }
  tau_ = *model.threshold;
}

std::vector<StreamScorer::Result> StreamScorer::push(std::span<const float> samples) {
  const auto started = std::chrono::steady_clock::now();
  std::vector<Result> out;
  for (auto& w : extractor_.push(samples)) {
    const double score = clip_score(model_, w.features);
    out.push_back({w.start_s, score, decide(score, tau_)});
  }
  audio_seconds_ += static_cast<double>(samples.size()) / sample_rate_;
  processing_seconds_ +=
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

double StreamScorer::real_time_factor() const {
  return audio_seconds_ > 0.0 ? processing_seconds_ / audio_seconds_ : 0.0;
}

std::vector<StreamScorer::Result> score_windows(const Model& model, std::span<const float> samples,
                                                const FeatureConfig& features, double window_s,
                                                double hop_s) {
  if (!model.threshold) fail(ErrorKind::kContract, "model has no calibrated threshold");
  std::vector<StreamScorer::Result> out;
  for (auto& w : stream_windows(samples, features, window_s, hop_s)) {
    const double score = clip_score(model, w.features);
    out.push_back({w.start_s, score, decide(score, *model.threshold)});
  }
  return out;
}

std::vector<float> raw_clip_vector(const Model& model, const FeatureMatrix& log_mel) {
  const auto p = static_cast<std::size_t>(model.spec().context_frames);
  const FeatureMatrix stacked = stack_frames(log_mel, p);
  const std::size_t n_mels = log_mel.dims;
  std::vector<double> acc(stacked.dims, 0.0);
  for (std::size_t t = 0; t < stacked.frames; ++t) {
    for (std::size_t d = 0; d < stacked.dims; ++d) {
      const std::size_t m = d % n_mels;
      acc[d] += (stacked.at(t, d) - model.norm_mean()[m]) * model.norm_scale()[m];
    }
  }
  std::vector<float> out(stacked.dims);
  for (std::size_t d = 0; d < stacked.dims; ++d) {
    out[d] = static_cast<float>(acc[d] / static_cast<double>(stacked.frames));
  }
  return out;
}

}  // namespace aad
