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

#include "aad/models.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "aad/errors.hpp"

namespace aad {

using nlohmann::json;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kDenseAe: return "dense_ae";
    case ModelKind::kCae: return "cae";
    case ModelKind::kCvae: return "cvae";
    case ModelKind::kTcnCvae: return "tcn_cvae";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "dense_ae") return ModelKind::kDenseAe;
  if (name == "cae") return ModelKind::kCae;
  if (name == "cvae") return ModelKind::kCvae;
  if (name == "tcn_cvae") return ModelKind::kTcnCvae;
  fail(ErrorKind::kSpecMismatch, "unknown model kind '" + std::string(name) + "'");
}

std::size_t ModelSpec::example_size() const {
  if (kind == ModelKind::kDenseAe) {
    return static_cast<std::size_t>(n_mels) * static_cast<std::size_t>(context_frames);
  }
  return static_cast<std::size_t>(n_mels) * static_cast<std::size_t>(window_frames);
}

void ModelSpec::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kSpecMismatch, what); };
  if (n_mels < 1) bad("n_mels must be >= 1");
  if (latent_dim < 1) bad("latent_dim must be >= 1");
  if (kernel < 1) bad("kernel must be >= 1");
  for (int h : hidden) {
    if (h < 1) bad("hidden widths must be >= 1");
  }
  switch (kind) {
    case ModelKind::kDenseAe:
      if (context_frames < 1) bad("context_frames must be >= 1");
      break;
    case ModelKind::kCae:
    case ModelKind::kCvae: {
      if (hidden.empty()) bad("conv encoder needs at least one layer");
      if (hidden.size() > 16) bad("too many conv layers");
      const int factor = 1 << hidden.size();
      if (window_frames < factor || window_frames % factor != 0) {
        bad("window_frames " + std::to_string(window_frames) + " not divisible by " +
            std::to_string(factor));
      }
      break;
    }
    case ModelKind::kTcnCvae:
      if (tcn_layers < 1 || tcn_layers > 24) bad("tcn_layers must be in [1, 24]");
      if (tcn_channels < 1) bad("tcn_channels must be >= 1");
      break;
  }
  if (is_sequence() && (window_frames < 1 || window_hop_frames < 1)) {
    bad("window_frames and window_hop_frames must be >= 1");
  }
}

ModelSpec default_model_spec(ModelKind kind, int n_mels, int context_frames) {
  ModelSpec spec;
  spec.kind = kind;
  spec.n_mels = n_mels;
  spec.context_frames = context_frames;
  switch (kind) {
    case ModelKind::kDenseAe:
      spec.hidden = {128, 128, 128, 128};
      spec.latent_dim = 8;
      break;
    case ModelKind::kCae:
    case ModelKind::kCvae:
      spec.hidden = {32, 64, 128};
      spec.latent_dim = 40;
      break;
    case ModelKind::kTcnCvae:
      spec.latent_dim = 40;
      break;
  }
  return spec;
}

std::string model_spec_json(const ModelSpec& s) {
  json j = {{"kind", std::string(to_string(s.kind))},
            {"n_mels", s.n_mels},
            {"context_frames", s.context_frames},
            {"hidden", s.hidden},
            {"latent_dim", s.latent_dim},
            {"kernel", s.kernel},
            {"tcn_layers", s.tcn_layers},
            {"tcn_channels", s.tcn_channels},
            {"window_frames", s.window_frames},
            {"window_hop_frames", s.window_hop_frames},
            {"seed", s.seed}};
  return j.dump();
}

ModelSpec model_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("model spec: ") + e.what());
  }
  ModelSpec s = default_model_spec(parse_model_kind(j.value("kind", std::string("tcn_cvae"))),
                                   j.value("n_mels", 64), j.value("context_frames", 5));
  s.hidden = j.value("hidden", s.hidden);
  s.latent_dim = j.value("latent_dim", s.latent_dim);
  s.kernel = j.value("kernel", s.kernel);
  s.tcn_layers = j.value("tcn_layers", s.tcn_layers);
  s.tcn_channels = j.value("tcn_channels", s.tcn_channels);
  s.window_frames = j.value("window_frames", s.window_frames);
  s.window_hop_frames = j.value("window_hop_frames", s.window_hop_frames);
  s.seed = j.value("seed", s.seed);
  return s;
}

template <typename T>
Tensor<T> reparameterize(const LatentDistribution<T>& latent, const Tensor<T>& noise) {
  return add(latent.mu, mul(exp(scale(latent.log_var, T(0.5))), noise));
}

namespace {

template <typename T>
std::size_t batch_of(const Tensor<T>& x) {
  return x.rank() >= 2 ? x.dim(0) : 1;
}

}  // namespace

template <typename T>
LossTerms<T> reconstruction_loss(const Tensor<T>& x, const Tensor<T>& x_hat) {
  if (x.shape() != x_hat.shape()) {
    fail(ErrorKind::kShape, "loss: " + shape_string(x.shape()) + " vs " +
                                shape_string(x_hat.shape()));
  }
  const T inv_batch = T(1) / static_cast<T>(batch_of(x));
  LossTerms<T> out;
  out.total = scale(sum(square(sub(x, x_hat))), T(0.5) * inv_batch);
  out.reconstruction = static_cast<double>(out.total.item());
  return out;
}

template <typename T>
LossTerms<T> vae_loss(const Tensor<T>& x, const Tensor<T>& x_hat,
                      const LatentDistribution<T>& latent) {
  if (latent.mu.shape() != latent.log_var.shape()) {
    fail(ErrorKind::kShape, "mu " + shape_string(latent.mu.shape()) + " vs log_var " +
                                shape_string(latent.log_var.shape()));
  }
  LossTerms<T> out = reconstruction_loss(x, x_hat);
  const T inv_batch = T(1) / static_cast<T>(batch_of(x));
  // 1 + log_var - mu^2 - exp(log_var)
  Tensor<T> inner = sub(sub(add_scalar(latent.log_var, T(1)), square(latent.mu)),
                        exp(latent.log_var));
  Tensor<T> kl = scale(sum(inner), T(-0.5) * inv_batch);
  out.kl = static_cast<double>(kl.item());
  out.total = add(out.total, kl);
  return out;
}

template Tensor<float> reparameterize<float>(const LatentDistribution<float>&, const Tensor<float>&);
template Tensor<double> reparameterize<double>(const LatentDistribution<double>&, const Tensor<double>&);
template LossTerms<float> vae_loss<float>(const Tensor<float>&, const Tensor<float>&,
                                          const LatentDistribution<float>&);
template LossTerms<double> vae_loss<double>(const Tensor<double>&, const Tensor<double>&,
                                            const LatentDistribution<double>&);
template LossTerms<float> reconstruction_loss<float>(const Tensor<float>&, const Tensor<float>&);
template LossTerms<double> reconstruction_loss<double>(const Tensor<double>&, const Tensor<double>&);

ReceptiveField receptive_field(int layers, int kernel) {
  if (layers < 1 || kernel < 1) fail(ErrorKind::kContract, "layers and kernel must be >= 1");
  const std::int64_t pow2 = std::int64_t{1} << layers;
  return {pow2 * (kernel - 1), 1 + static_cast<std::int64_t>(kernel - 1) * (pow2 - 1)};
}

namespace {

Tensorf tcn_stack(const Tensorf& x, const std::vector<Tensorf>& weights,
                  const std::vector<Tensorf>& biases, bool use_relu) {
  Tensorf h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = conv1d_causal(h, weights[l], std::size_t{1} << l, biases[l]);
    if (use_relu) h = relu(h);
  }
  return h;
}

}  // namespace

TcnEncoder::TcnEncoder(int in_channels, int channels, int layers, int kernel,
                       std::mt19937_64& rng, bool relu)
    : relu_(relu) {
  auto in = static_cast<std::size_t>(in_channels);
  const auto out = static_cast<std::size_t>(channels);
  const auto k = static_cast<std::size_t>(kernel);
  for (int l = 0; l < layers; ++l) {
    weights_.push_back(he_uniform<float>({out, in, k}, in * k, rng));
    biases_.push_back(Tensorf::zeros({out}, true));
    in = out;
  }
}

Tensorf TcnEncoder::forward(const Tensorf& x) const {
  return tcn_stack(x, weights_, biases_, relu_);
}

std::vector<Tensorf> TcnEncoder::parameters() const {
  std::vector<Tensorf> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(weights_[l]);
    out.push_back(biases_[l]);
  }
  return out;
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)), init_rng_(spec_.seed) {
  spec_.validate();
  const auto latent = static_cast<std::size_t>(spec_.latent_dim);
  const auto n_mels = static_cast<std::size_t>(spec_.n_mels);
  const auto k = static_cast<std::size_t>(spec_.kernel);
  norm_mean_.assign(n_mels, 0.0f);
  norm_scale_.assign(n_mels, 1.0f);

  auto heads = [&](std::size_t in) {
    if (spec_.is_variational()) {
      dense_param("mu.weight", in, latent);
      bias_param("mu.bias", latent);
      dense_param("log_var.weight", in, latent);
      bias_param("log_var.bias", latent);
    } else {
      dense_param("latent.weight", in, latent);
      bias_param("latent.bias", latent);
    }
  };

  switch (spec_.kind) {
    case ModelKind::kDenseAe: {
      std::vector<std::size_t> widths{spec_.example_size()};
      for (int h : spec_.hidden) widths.push_back(static_cast<std::size_t>(h));
      for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        dense_param("enc" + std::to_string(i) + ".weight", widths[i], widths[i + 1]);
        bias_param("enc" + std::to_string(i) + ".bias", widths[i + 1]);
      }
      encoder_layers_ = widths.size() - 1;
      heads(widths.back());
      decoder_start_ = params_.size();
      std::vector<std::size_t> dec{latent};
      for (auto it = widths.rbegin(); it != widths.rend(); ++it) dec.push_back(*it);
      for (std::size_t i = 0; i + 1 < dec.size(); ++i) {
        dense_param("dec" + std::to_string(i) + ".weight", dec[i], dec[i + 1]);
        bias_param("dec" + std::to_string(i) + ".bias", dec[i + 1]);
      }
      break;
    }
    case ModelKind::kCae:
    case ModelKind::kCvae: {
      std::size_t in = n_mels;
      for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
        const auto out = static_cast<std::size_t>(spec_.hidden[i]);
        conv_param("enc" + std::to_string(i) + ".weight", out, in, k);
        bias_param("enc" + std::to_string(i) + ".bias", out);
        in = out;
      }
      encoder_layers_ = spec_.hidden.size();
      encoded_frames_ = static_cast<std::size_t>(spec_.window_frames) >> spec_.hidden.size();
      const std::size_t flat = in * encoded_frames_;
      heads(flat);
      decoder_start_ = params_.size();
      dense_param("dec.dense.weight", latent, flat);
      bias_param("dec.dense.bias", flat);
      for (std::size_t i = spec_.hidden.size(); i-- > 0;) {
        const auto from = static_cast<std::size_t>(spec_.hidden[i]);
        const std::size_t to = i > 0 ? static_cast<std::size_t>(spec_.hidden[i - 1]) : n_mels;
        conv_param("dec" + std::to_string(i) + ".weight", to, from, k);
        bias_param("dec" + std::to_string(i) + ".bias", to);
      }
      break;
    }
    case ModelKind::kTcnCvae: {
      const auto channels = static_cast<std::size_t>(spec_.tcn_channels);
      std::size_t in = n_mels;
      for (int l = 0; l < spec_.tcn_layers; ++l) {
        conv_param("tcn" + std::to_string(l) + ".weight", channels, in, k);
        bias_param("tcn" + std::to_string(l) + ".bias", channels);
        in = channels;
      }
      encoder_layers_ = static_cast<std::size_t>(spec_.tcn_layers);
      encoded_frames_ = static_cast<std::size_t>(spec_.window_frames);
      const std::size_t flat = channels * encoded_frames_;
      heads(flat);
      decoder_start_ = params_.size();
      dense_param("dec.dense.weight", latent, flat);
      bias_param("dec.dense.bias", flat);
      conv_param("dec0.weight", channels, channels, k);
      bias_param("dec0.bias", channels);
      conv_param("dec1.weight", n_mels, channels, k);
      bias_param("dec1.bias", n_mels);
      break;
    }
  }
}

Tensorf& Model::add_param(const std::string& name, Tensorf t) {
  names_.push_back(name);
  params_.push_back(std::move(t));
  return params_.back();
}

Tensorf Model::dense_param(const std::string& name, std::size_t in, std::size_t out) {
  return add_param(name, he_uniform<float>({in, out}, in, init_rng_));
}

Tensorf Model::conv_param(const std::string& name, std::size_t out, std::size_t in,
                          std::size_t k) {
  return add_param(name, he_uniform<float>({out, in, k}, in * k, init_rng_));
}

Tensorf Model::bias_param(const std::string& name, std::size_t n) {
  return add_param(name, Tensorf::zeros({n}, true));
}

std::size_t Model::param_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.size();
  return total;
}

std::size_t param_count(const Model& model) { return model.param_count(); }

std::size_t param_count(const std::vector<Tensorf>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

Model::Output Model::bottleneck(const Tensorf& flat, std::size_t first_head,
                                std::mt19937_64* rng) const {
  Output out;
  const auto& p = params_;
  if (spec_.is_variational()) {
    LatentDistribution<float> dist{dense(flat, p[first_head], p[first_head + 1]),
                                   dense(flat, p[first_head + 2], p[first_head + 3])};
    if (rng) {
      std::normal_distribution<float> gauss(0.0f, 1.0f);
      std::vector<float> noise(dist.mu.size());
      for (auto& v : noise) v = gauss(*rng);
      out.latent = reparameterize(dist, Tensorf::from(dist.mu.shape(), std::move(noise)));
    } else {
      out.latent = dist.mu;
    }
    out.distribution = std::move(dist);
  } else {
    out.latent = dense(flat, p[first_head], p[first_head + 1]);
  }
  return out;
}

Model::Output Model::forward(const Tensorf& x, std::mt19937_64* noise_rng) const {
  const bool ok = spec_.is_sequence()
                      ? (x.rank() == 3 && x.dim(1) == static_cast<std::size_t>(spec_.n_mels) &&
                         x.dim(2) == static_cast<std::size_t>(spec_.window_frames))
                      : (x.rank() == 2 && x.dim(1) == spec_.example_size());
  if (!ok) {
    fail(ErrorKind::kShape, std::string(to_string(spec_.kind)) + " input " +
                                shape_string(x.shape()));
  }
  switch (spec_.kind) {
    case ModelKind::kDenseAe: return forward_dense(x, noise_rng);
    case ModelKind::kCae:
    case ModelKind::kCvae: return forward_conv(x, noise_rng);
    case ModelKind::kTcnCvae: return forward_tcn(x, noise_rng);
  }
  fail(ErrorKind::kSpecMismatch, "unknown model kind");
}

Model::Output Model::forward_dense(const Tensorf& x, std::mt19937_64* rng) const {
  const auto& p = params_;
  Tensorf h = x;
  for (std::size_t i = 0; i < encoder_layers_; ++i) h = relu(dense(h, p[2 * i], p[2 * i + 1]));
  Output out = bottleneck(h, 2 * encoder_layers_, rng);
  h = out.latent;
  const std::size_t n_dec = (params_.size() - decoder_start_) / 2;
  for (std::size_t i = 0; i < n_dec; ++i) {
    const std::size_t at = decoder_start_ + 2 * i;
    h = dense(h, p[at], p[at + 1]);
    if (i + 1 < n_dec) h = relu(h);
  }
  out.reconstruction = h;
  return out;
}

Model::Output Model::forward_conv(const Tensorf& x, std::mt19937_64* rng) const {
  const auto& p = params_;
  const std::size_t batch = x.dim(0);
  Tensorf h = x;
  for (std::size_t i = 0; i < encoder_layers_; ++i) {
    h = relu(conv1d(h, p[2 * i], p[2 * i + 1], Conv1dOptions{1, 2, Padding::kSame}));
  }
  const std::size_t channels = h.dim(1);
  Output out = bottleneck(reshape(h, {batch, channels * encoded_frames_}),
                          2 * encoder_layers_, rng);
  std::size_t at = decoder_start_;
  h = relu(dense(out.latent, p[at], p[at + 1]));
  h = reshape(h, {batch, channels, encoded_frames_});
  at += 2;
  for (std::size_t i = 0; i < encoder_layers_; ++i, at += 2) {
    h = conv1d(upsample(h, 2), p[at], p[at + 1], Conv1dOptions{1, 1, Padding::kSame});
    if (i + 1 < encoder_layers_) h = relu(h);
  }
  out.reconstruction = h;
  return out;
}

Model::Output Model::forward_tcn(const Tensorf& x, std::mt19937_64* rng) const {
  const auto& p = params_;
  const std::size_t batch = x.dim(0);
  Tensorf h = x;
  for (std::size_t l = 0; l < encoder_layers_; ++l) {
    h = relu(conv1d_causal(h, p[2 * l], std::size_t{1} << l, p[2 * l + 1]));
  }
  const std::size_t channels = h.dim(1);
  Output out = bottleneck(reshape(h, {batch, channels * encoded_frames_}),
                          2 * encoder_layers_, rng);
  std::size_t at = decoder_start_;
  h = relu(dense(out.latent, p[at], p[at + 1]));
  h = reshape(h, {batch, channels, encoded_frames_});
  h = relu(conv1d(h, p[at + 2], p[at + 3], Conv1dOptions{1, 1, Padding::kSame}));
  out.reconstruction = conv1d(h, p[at + 4], p[at + 5], Conv1dOptions{1, 1, Padding::kSame});
  return out;
}

void Model::fit_normalizer(const std::vector<const FeatureMatrix*>& log_mels) {
  const auto n_mels = static_cast<std::size_t>(spec_.n_mels);
  std::vector<double> acc(n_mels, 0.0), acc2(n_mels, 0.0);
  std::size_t count = 0;
  for (const FeatureMatrix* fm : log_mels) {
    if (fm->dims != n_mels) {
      fail(ErrorKind::kShape, "features have " + std::to_string(fm->dims) + " mels, model " +
                                  std::to_string(n_mels));
    }
    for (std::size_t t = 0; t < fm->frames; ++t) {
      for (std::size_t m = 0; m < n_mels; ++m) {
        const double v = fm->at(t, m);
        acc[m] += v;
        acc2[m] += v * v;
      }
    }
    count += fm->frames;
  }
  if (count == 0) fail(ErrorKind::kContract, "normalizer needs at least one frame");
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double mu = acc[m] / static_cast<double>(count);
    const double var = std::max(0.0, acc2[m] / static_cast<double>(count) - mu * mu);
    norm_mean_[m] = static_cast<float>(mu);
    norm_scale_[m] = static_cast<float>(1.0 / std::max(std::sqrt(var), 1e-3));
  }
}

void Model::set_normalizer(std::vector<float> mean, std::vector<float> scale) {
  const auto n_mels = static_cast<std::size_t>(spec_.n_mels);
  if (mean.size() != n_mels || scale.size() != n_mels) {
    fail(ErrorKind::kShape, "normalizer size does not match n_mels");
  }
  norm_mean_ = std::move(mean);
  norm_scale_ = std::move(scale);
}

std::vector<std::size_t> Model::window_starts(std::size_t frames) const {
  const auto w = static_cast<std::size_t>(spec_.window_frames);
  const auto hop = static_cast<std::size_t>(spec_.window_hop_frames);
  if (frames < w) {
    fail(ErrorKind::kTooShort, std::to_string(frames) + " frames, window needs " +
                                   std::to_string(w));
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + w <= frames; s += hop) starts.push_back(s);
  if (starts.back() + w < frames) starts.push_back(frames - w);
  return starts;
}

std::size_t Model::example_count(const FeatureMatrix& fm) const {
  if (spec_.is_sequence()) return window_starts(fm.frames).size();
  const auto p = static_cast<std::size_t>(spec_.context_frames);
  if (fm.frames < p) fail(ErrorKind::kTooShort, "clip shorter than context");
  return fm.frames - p + 1;
}

std::vector<float> Model::examples(const FeatureMatrix& fm) const {
  const auto n_mels = static_cast<std::size_t>(spec_.n_mels);
  if (fm.dims != n_mels) {
    fail(ErrorKind::kShape, "features have " + std::to_string(fm.dims) + " mels, model " +
                                std::to_string(n_mels));
  }
  const std::size_t size = spec_.example_size();
  std::vector<float> out;
  if (spec_.is_sequence()) {
    const auto w = static_cast<std::size_t>(spec_.window_frames);
    const auto starts = window_starts(fm.frames);
    out.resize(starts.size() * size);
    for (std::size_t e = 0; e < starts.size(); ++e) {
      float* ex = out.data() + e * size;
      for (std::size_t tau = 0; tau < w; ++tau) {
        for (std::size_t m = 0; m < n_mels; ++m) {
          ex[m * w + tau] = (fm.at(starts[e] + tau, m) - norm_mean_[m]) * norm_scale_[m];
        }
      }
    }
  } else {
    const FeatureMatrix stacked = stack_frames(fm, static_cast<std::size_t>(spec_.context_frames));
    out = stacked.data;
    for (std::size_t r = 0; r < stacked.frames; ++r) {
      for (std::size_t d = 0; d < size; ++d) {
        const std::size_t m = d % n_mels;
        float& v = out[r * size + d];
        v = (v - norm_mean_[m]) * norm_scale_[m];
      }
    }
  }
  return out;
}

Tensorf Model::batch(std::span<const float> examples, std::size_t count) const {
  const std::size_t size = spec_.example_size();
  if (examples.size() < count * size) fail(ErrorKind::kShape, "not enough example data");
  std::vector<float> values(examples.begin(),
                            examples.begin() + static_cast<std::ptrdiff_t>(count * size));
  if (spec_.is_sequence()) {
    return Tensorf::from({count, static_cast<std::size_t>(spec_.n_mels),
                          static_cast<std::size_t>(spec_.window_frames)},
                         std::move(values));
  }
  return Tensorf::from({count, size}, std::move(values));
}

namespace {
constexpr std::size_t kInferenceChunk = 64;
}  // namespace

std::pair<FeatureMatrix, FeatureMatrix> Model::reconstruct(const FeatureMatrix& fm) const {
  NoGradGuard no_grad;
  const std::vector<float> ex = examples(fm);
  const std::size_t size = spec_.example_size();
  const std::size_t count = ex.size() / size;
  std::vector<float> recon(ex.size());
  for (std::size_t first = 0; first < count; first += kInferenceChunk) {
    const std::size_t n = std::min(kInferenceChunk, count - first);
    const Tensorf x = batch(std::span<const float>(ex).subspan(first * size), n);
    const Output out = forward(x);
    std::copy(out.reconstruction.values().begin(), out.reconstruction.values().end(),
              recon.begin() + static_cast<std::ptrdiff_t>(first * size));
  }

  if (!spec_.is_sequence()) {
    FeatureMatrix observed(count, size, fm.frame_rate);
    FeatureMatrix rebuilt(count, size, fm.frame_rate);
    observed.data = ex;
    rebuilt.data = std::move(recon);
    return {std::move(observed), std::move(rebuilt)};
  }
  // Channel-major windows back to frame rows.
  const auto n_mels = static_cast<std::size_t>(spec_.n_mels);
  const auto w = static_cast<std::size_t>(spec_.window_frames);
  FeatureMatrix observed(count * w, n_mels, fm.frame_rate);
  FeatureMatrix rebuilt(count * w, n_mels, fm.frame_rate);
  for (std::size_t e = 0; e < count; ++e) {
    for (std::size_t tau = 0; tau < w; ++tau) {
      for (std::size_t m = 0; m < n_mels; ++m) {
        observed.at(e * w + tau, m) = ex[e * size + m * w + tau];
        rebuilt.at(e * w + tau, m) = recon[e * size + m * w + tau];
      }
    }
  }
  return {std::move(observed), std::move(rebuilt)};
}

std::vector<float> Model::latent_code(const FeatureMatrix& fm) const {
  NoGradGuard no_grad;
  const std::vector<float> ex = examples(fm);
  const std::size_t size = spec_.example_size();
  const std::size_t count = ex.size() / size;
  const auto latent = static_cast<std::size_t>(spec_.latent_dim);
  std::vector<double> acc(latent, 0.0);
  for (std::size_t first = 0; first < count; first += kInferenceChunk) {
    const std::size_t n = std::min(kInferenceChunk, count - first);
    const Output out = forward(batch(std::span<const float>(ex).subspan(first * size), n));
    const auto z = out.latent.values();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t d = 0; d < latent; ++d) acc[d] += z[r * latent + d];
    }
  }
  std::vector<float> code(latent);
  for (std::size_t d = 0; d < latent; ++d) {
    code[d] = static_cast<float>(acc[d] / static_cast<double>(count));
  }
  return code;
}

}  // namespace aad
