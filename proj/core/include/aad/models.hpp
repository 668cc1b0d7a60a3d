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
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "aad/dsp_features.hpp"
#include "aad/tensor.hpp"

namespace aad {

enum class ModelKind { kDenseAe, kCae, kCvae, kTcnCvae };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

// Architecture of one rung of the ladder.
//
//  dense_ae  rows of n_mels * context_frames stacked features; `hidden` are the
//            dense widths, mirrored in the decoder around `latent_dim`.
//  cae/cvae  windows of n_mels x window_frames; `hidden` are conv channels,
//            each layer halves the frame axis (stride 2), dense bottleneck.
//  tcn_cvae  causal dilated stack (dilations 1, 2, ..., 2^(tcn_layers-1)) of
//            tcn_channels feeding mu/log_var heads; dense + conv decoder.
struct ModelSpec {
  ModelKind kind = ModelKind::kTcnCvae;
  int n_mels = 64;
  int context_frames = 5;
  std::vector<int> hidden;
  int latent_dim = 40;
  int kernel = 3;
  int tcn_layers = 6;
  int tcn_channels = 64;
  int window_frames = 32;
  int window_hop_frames = 16;
  std::uint64_t seed = 7;

  bool is_sequence() const { return kind != ModelKind::kDenseAe; }
  bool is_variational() const {
    return kind == ModelKind::kCvae || kind == ModelKind::kTcnCvae;
  }
  // Length of one flattened training example.
  std::size_t example_size() const;
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

ModelSpec default_model_spec(ModelKind kind, int n_mels = 64, int context_frames = 5);
std::string model_spec_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const std::string& text);

template <typename T>
struct LatentDistribution {
  Tensor<T> mu;
  Tensor<T> log_var;  // log sigma^2
};

// z = mu + exp(log_var / 2) * noise
template <typename T>
Tensor<T> reparameterize(const LatentDistribution<T>& latent, const Tensor<T>& noise);

template <typename T>
struct LossTerms {
  Tensor<T> total;  // differentiable, mean over the batch
  double reconstruction = 0.0;
  double kl = 0.0;
};

// Per example: 1/2 * sum (x - x_hat)^2 + KL(N(mu, sigma^2) || N(0, 1)), with
// KL = -1/2 * sum (1 + log sigma^2 - mu^2 - sigma^2). Averaged over dim 0
// (a rank-1 input is a batch of one).
template <typename T>
LossTerms<T> vae_loss(const Tensor<T>& x, const Tensor<T>& x_hat,
                      const LatentDistribution<T>& latent);

// Reconstruction term only, same scaling as vae_loss.
template <typename T>
LossTerms<T> reconstruction_loss(const Tensor<T>& x, const Tensor<T>& x_hat);

struct ReceptiveField {
  std::int64_t estimate;  // 2^l * (k - 1)
  std::int64_t exact;     // 1 + (k - 1) * (2^l - 1)
};

ReceptiveField receptive_field(int layers, int kernel);

// Plain causal dilated stack. Output at time t depends on inputs <= t only.
class TcnEncoder {
 public:
  TcnEncoder() = default;
  TcnEncoder(int in_channels, int channels, int layers, int kernel, std::mt19937_64& rng,
             bool relu = true);

  Tensorf forward(const Tensorf& x) const;
  std::vector<Tensorf> parameters() const;
  int layers() const { return static_cast<int>(weights_.size()); }

 private:
  std::vector<Tensorf> weights_;
  std::vector<Tensorf> biases_;
  bool relu_ = true;
};

class Model {
 public:
  struct Output {
    Tensorf reconstruction;
    Tensorf latent;  // z (the code fed to the decoder)
    std::optional<LatentDistribution<float>> distribution;
  };

  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }

  // x is [batch x example_size] for dense_ae or [batch x n_mels x frames]
  // for the convolutional kinds. With noise_rng == nullptr a variational
  // model decodes mu directly (deterministic inference).
  Output forward(const Tensorf& x, std::mt19937_64* noise_rng = nullptr) const;

  const std::vector<Tensorf>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  std::size_t param_count() const;

  // Per-mel standardisation applied before the network. Fitted on normal
  // training frames and stored alongside the weights.
  void fit_normalizer(const std::vector<const FeatureMatrix*>& log_mels);
  const std::vector<float>& norm_mean() const { return norm_mean_; }
  const std::vector<float>& norm_scale() const { return norm_scale_; }
  void set_normalizer(std::vector<float> mean, std::vector<float> scale);

  // Examples of one clip, flattened back to back (example_size() floats each).
  std::vector<float> examples(const FeatureMatrix& log_mel) const;
  std::size_t example_count(const FeatureMatrix& log_mel) const;
  Tensorf batch(std::span<const float> examples, std::size_t count) const;

  // Observed and reconstructed frames of a clip in the normalised feature
  // space, one row per scored frame.
  std::pair<FeatureMatrix, FeatureMatrix> reconstruct(const FeatureMatrix& log_mel) const;
  // Mean of the latent code (mu for variational kinds) over the clip.
  std::vector<float> latent_code(const FeatureMatrix& log_mel) const;

  // Window start frames used by the convolutional kinds.
  std::vector<std::size_t> window_starts(std::size_t frames) const;

  // Threshold calibrated after training and the feature settings the model
  // was trained on; both are carried inside checkpoints.
  std::optional<double> threshold;
  double threshold_max_fpr = 0.1;
  std::optional<FeatureConfig> features;

 private:
  Tensorf& add_param(const std::string& name, Tensorf t);
  Tensorf dense_param(const std::string& name, std::size_t in, std::size_t out);
  Tensorf conv_param(const std::string& name, std::size_t out, std::size_t in, std::size_t k);
  Tensorf bias_param(const std::string& name, std::size_t n);

  Output forward_dense(const Tensorf& x, std::mt19937_64* rng) const;
  Output forward_conv(const Tensorf& x, std::mt19937_64* rng) const;
  Output forward_tcn(const Tensorf& x, std::mt19937_64* rng) const;
  Output bottleneck(const Tensorf& flat, std::size_t first_head, std::mt19937_64* rng) const;

  ModelSpec spec_;
  std::mt19937_64 init_rng_;
  std::vector<Tensorf> params_;
  std::vector<std::string> names_;
  std::vector<float> norm_mean_;
  std::vector<float> norm_scale_;
  // Parameter layout indices.
  std::size_t decoder_start_ = 0;
  std::size_t encoder_layers_ = 0;
  std::size_t encoded_frames_ = 0;
};

std::size_t param_count(const Model& model);
std::size_t param_count(const std::vector<Tensorf>& params);

}  // namespace aad
