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

namespace aad {

enum class MachineType { kFan, kPump, kSlider, kValve, kSynthetic };
enum class Label { kNormal, kAnomaly, kUnlabeled };

std::string_view to_string(MachineType type);
std::string_view to_string(Label label);
MachineType parse_machine_type(std::string_view name);
Label parse_label(std::string_view name);

struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;
  std::optional<std::string> source_path;
  std::optional<MachineType> machine_type;
  std::optional<int> machine_id;
  Label label = Label::kUnlabeled;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

enum class WavEncoding { kPcm16, kFloat32 };

// Reads RIFF/WAVE (PCM16 or IEEE float32, little-endian). Multi-channel input
// is averaged to mono. Samples are normalized to [-1, 1].
AudioClip read_wav(const std::filesystem::path& path);
AudioClip decode_wav(const std::vector<std::uint8_t>& bytes);

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavEncoding encoding = WavEncoding::kFloat32);
std::vector<std::uint8_t> encode_wav(const AudioClip& clip,
                                     WavEncoding encoding);

// Linear-interpolation resampler on the exact rational grid in/out, so the
// read position never drifts. Output length is round(len * out / in).
AudioClip resample(const AudioClip& clip, int target_rate);

struct DatasetEntry {
  MachineType machine_type = MachineType::kSynthetic;
  int machine_id = 0;
  Label label = Label::kUnlabeled;
  std::filesystem::path path;

  friend bool operator==(const DatasetEntry&, const DatasetEntry&) = default;
};

struct DatasetIndex {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;

  std::size_t count(Label label) const;
  friend bool operator==(const DatasetIndex&, const DatasetIndex&) = default;
};

// Walks `<machine_type>/id_<NN>/<normal|abnormal>/*.wav` under root.
DatasetIndex scan_dataset(const std::filesystem::path& root);

struct SynthConfig {
  int n_normal = 200;
  int n_anomaly = 50;
  int n_ids = 1;
  double duration_s = 2.0;
  int sample_rate = 16000;
  std::uint64_t seed = 7;
  WavEncoding encoding = WavEncoding::kFloat32;
};

enum class AnomalyArchetype { kTransientBurst, kDetunedHarmonic, kDropout };

// Base tone shared by every normal clip.
inline constexpr double kSynthHarmonicsHz[] = {120.0, 240.0, 360.0};

AudioClip synth_clip(const SynthConfig& config, Label label,
                     std::uint64_t clip_seed,
                     AnomalyArchetype* archetype_out = nullptr);

// Writes `<out>/synthetic/id_NN/{normal,abnormal}/*.wav`. Counts are split
// across ids as evenly as possible and are matched exactly in total.
DatasetIndex synth_generate(const SynthConfig& config,
                            const std::filesystem::path& out_root);

}  // namespace aad
