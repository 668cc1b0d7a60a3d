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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aad/audio_io.hpp"

namespace aad {

struct FeatureConfig {
  int sample_rate = 22050;
  int n_fft = 1024;
  int hop = 512;
  int n_mels = 512;
  int context_frames = 11;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 means sample_rate / 2
  double log_floor = 1e-10;
  double mel_break_hz = 700.0;
  bool slaney_norm = false;
  // When set, a mel filter that covers no FFT bin is a configuration error.
  // Otherwise such filters are kept as all-zero rows (they read log_floor).
  bool strict_filterbank = false;

  double resolved_fmax() const { return fmax > 0 ? fmax : sample_rate / 2.0; }
  void validate() const;
  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

// Row-major frames x dims matrix of 32-bit features.
struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t dims = 0;
  double frame_rate = 0.0;
  std::vector<float> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t n_frames, std::size_t n_dims, double rate = 0.0)
      : frames(n_frames), dims(n_dims), frame_rate(rate), data(n_frames * n_dims, 0.0f) {}

  std::span<float> row(std::size_t t) { return {data.data() + t * dims, dims}; }
  std::span<const float> row(std::size_t t) const { return {data.data() + t * dims, dims}; }
  float& at(std::size_t t, std::size_t d) { return data[t * dims + d]; }
  float at(std::size_t t, std::size_t d) const { return data[t * dims + d]; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

// Dense row-major double matrix used for the spectral intermediates.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

double hz_to_mel(double hz, double break_hz = 700.0);
double mel_to_hz(double mel, double break_hz = 700.0);

// n_mels x (n_fft/2 + 1) triangular filters, peak 1 unless slaney_norm.
Matrix mel_filterbank(const FeatureConfig& config, int sample_rate);
// Indices of filters that cover no FFT bin.
std::vector<std::size_t> empty_filters(const Matrix& filterbank);

std::vector<double> hann_window(std::size_t n);

// In-place complex FFT; n must be a power of two.
void fft_inplace(std::vector<double>& re, std::vector<double>& im);

// One-sided |FFT(hann * frame)|^2 for every valid (unpadded) frame.
Matrix stft_power(std::span<const float> samples, const FeatureConfig& config);
Matrix stft_power(const AudioClip& clip, const FeatureConfig& config);

std::size_t frame_count(std::size_t n_samples, const FeatureConfig& config);

// Precomputes the filterbank and window once; safe to share across threads.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(const FeatureConfig& config);

  FeatureMatrix compute(std::span<const float> samples) const;
  const FeatureConfig& config() const { return config_; }
  const Matrix& filterbank() const { return filterbank_; }

 private:
  FeatureConfig config_;
  Matrix filterbank_;
};

// 10 * log10(max(filterbank . power, log_floor)); clip rate must match config.
FeatureMatrix log_mel(const AudioClip& clip, const FeatureConfig& config);

// Row t of the result concatenates frames t .. t+P-1.
FeatureMatrix stack_frames(const FeatureMatrix& fm, std::size_t context);

// Sliding-window log-mel over an incrementally fed sample stream. Each emitted
// window is exactly log_mel of the corresponding offline slice.
class StreamingFeatureExtractor {
 public:
  struct Window {
    std::size_t start_sample = 0;
    double start_s = 0.0;
    FeatureMatrix features;
  };

  StreamingFeatureExtractor(const FeatureConfig& config, double window_s, double hop_s);

  // Appends samples and returns every window completed by them.
  std::vector<Window> push(std::span<const float> samples);

  std::size_t window_samples() const { return window_samples_; }
  std::size_t hop_samples() const { return hop_samples_; }

 private:
  LogMelExtractor extractor_;
  std::size_t window_samples_;
  std::size_t hop_samples_;
  std::vector<float> buffer_;
  std::size_t buffer_start_ = 0;  // absolute sample index of buffer_[0]
  std::size_t next_start_ = 0;    // absolute start of the next window
};

// Offline reference used to check the streaming path.
std::vector<StreamingFeatureExtractor::Window> stream_windows(
    std::span<const float> samples, const FeatureConfig& config, double window_s,
    double hop_s);

// Feature cache: "AADF", u32 version, u32 header length, JSON header, floats.
inline constexpr std::uint32_t kFeatureCacheVersion = 1;
void write_feature_cache(const std::filesystem::path& path, const FeatureMatrix& fm,
                         const FeatureConfig& config);
FeatureMatrix read_feature_cache(const std::filesystem::path& path,
                                 FeatureConfig* config_out = nullptr);

std::string feature_config_json(const FeatureConfig& config);
FeatureConfig feature_config_from_json(const std::string& text);

}  // namespace aad
