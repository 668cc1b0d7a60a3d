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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aad/audio_io.hpp"
#include "aad/dsp_features.hpp"
#include "aad/models.hpp"

namespace aad {

enum class LossKind { kMse, kVae };
std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 7;
  double validation_split = 0.1;
  // Unset: vae for variational kinds, mse otherwise.
  std::optional<LossKind> loss;
  // Written after the last epoch when non-empty.
  std::filesystem::path checkpoint_path;
  // Rewritten whenever the validation loss improves when non-empty.
  std::filesystem::path best_checkpoint_path;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without a validation set
  double seconds = 0.0;
};

struct TrainLog {
  double initial_loss = 0.0;  // training-set loss before the first update
  std::vector<EpochLog> epochs;
  std::size_t train_clips = 0;
  std::size_t val_clips = 0;
  double best_val_loss = 0.0;
  int best_epoch = 0;
};

struct TrainingClip {
  const FeatureMatrix* features = nullptr;
  Label label = Label::kUnlabeled;
};

// Fits the model's normalizer on the training clips, then runs mini-batch Adam.
// Every clip must be labeled normal.
TrainLog train(Model& model, const std::vector<TrainingClip>& clips, const TrainConfig& config);

// Deterministic clip-level validation split: indices of the held-out clips.
std::vector<std::size_t> validation_indices(std::size_t n_clips, double fraction,
                                            std::uint64_t seed);

// Mean per-example loss over a clip set, without gradients. Variational
// models draw their noise from a fixed stream so the value is reproducible.
double evaluate_loss(const Model& model, const std::vector<const FeatureMatrix*>& clips,
                     LossKind loss, std::uint64_t seed);

// epoch,train_loss,val_loss,seconds
void write_train_log_csv(const std::filesystem::path& path, const TrainLog& log);

// Checkpoint: "AADM", u32 version, u32 header length, JSON header (spec,
// threshold), then per tensor u32 rank, u32 dims and little-endian floats.
// The normalizer mean and scale follow the parameters.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void checkpoint_save(const Model& model, const std::filesystem::path& path);
std::vector<std::uint8_t> checkpoint_bytes(const Model& model);
// With `expected` set, a checkpoint of another architecture is rejected.
Model checkpoint_load(const std::filesystem::path& path, const ModelSpec* expected = nullptr);
Model checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes,
                            const ModelSpec* expected = nullptr);

}  // namespace aad
