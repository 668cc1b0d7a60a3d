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
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aad/audio_io.hpp"
#include "aad/dsp_features.hpp"
#include "aad/evaluation.hpp"
#include "aad/models.hpp"
#include "aad/scoring.hpp"
#include "aad/training.hpp"
#include "aad/tsne.hpp"

namespace aad::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPipelineError = 1;
inline constexpr int kExitUsage = 2;

// Environment variable naming the default config file.
inline constexpr const char* kConfigEnv = "AAD_CONFIG";

struct StreamConfig {
  double window_s = 2.0;
  double hop_s = 1.0;
  std::size_t chunk_samples = 4096;
  std::size_t queue_chunks = 16;
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::filesystem::path dataset_root;  // empty: <output_dir>/dataset
  std::filesystem::path output_dir = "aad_out";
  FeatureConfig features;
  ModelSpec model;
  TrainConfig train;
  ThresholdConfig threshold;
  EvalConfig eval;
  EmbedConfig embed;
  SynthConfig synth;
  StreamConfig stream;
  int workers = 0;  // 0: hardware concurrency

  std::filesystem::path resolved_dataset_root() const;
};

// Built-in defaults as JSON. The "model" section only names the kind; the
// remaining architecture fields default per kind.
nlohmann::json default_config_json();

// Applies defaults < file < flags (RFC 7386 merge patches) and resolves the
// seed and feature dimensions into every section.
RunConfig resolve_config(const nlohmann::json& file, const nlohmann::json& flags);
RunConfig run_config_from_json(const nlohmann::json& merged);
nlohmann::json run_config_to_json(const RunConfig& config);

// Parses argv (without the program name) and runs one subcommand.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             std::istream& in);

}  // namespace aad::cli
