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

#include "aad/training.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "aad/errors.hpp"

namespace aad {

using nlohmann::json;

std::string_view to_string(LossKind kind) { return kind == LossKind::kVae ? "vae" : "mse"; }

LossKind parse_loss_kind(std::string_view name) {
  if (name == "vae") return LossKind::kVae;
  if (name == "mse") return LossKind::kMse;
  fail(ErrorKind::kConfiguration, "unknown loss kind '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 0) fail(ErrorKind::kConfiguration, "epochs must be >= 0");
  if (batch_size < 1) fail(ErrorKind::kConfiguration, "batch_size must be >= 1");
  if (!(lr > 0.0)) fail(ErrorKind::kConfiguration, "lr must be positive");
  if (!(validation_split >= 0.0 && validation_split < 1.0)) {
    fail(ErrorKind::kConfiguration, "validation_split must be in [0, 1)");
  }
}

namespace {

// Fisher-Yates with raw engine output, identical across standard libraries.
void shuffle_indices(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(v[i - 1], v[j]);
  }
}

std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kSplitStream = 0x5e11;
constexpr std::uint64_t kShuffleStream = 0x5a0f;
constexpr std::uint64_t kNoiseStream = 0x0015e;
constexpr std::uint64_t kEvalStream = 0xe7a1;

LossKind resolve_loss(const Model& model, const TrainConfig& config) {
  const LossKind kind =
      config.loss.value_or(model.spec().is_variational() ? LossKind::kVae : LossKind::kMse);
  if (kind == LossKind::kVae && !model.spec().is_variational()) {
    fail(ErrorKind::kConfiguration,
         "vae loss needs a variational model, got " + std::string(to_string(model.spec().kind)));
  }
  return kind;
}

LossTerms<float> batch_loss(const Model& model, const Tensorf& x, LossKind kind,
                            std::mt19937_64& noise) {
  const Model::Output out = model.forward(x, model.spec().is_variational() ? &noise : nullptr);
  if (kind == LossKind::kVae) return vae_loss(x, out.reconstruction, *out.distribution);
  return reconstruction_loss(x, out.reconstruction);
}

struct ExamplePool {
  std::vector<float> data;
  std::size_t count = 0;
};

ExamplePool pool_examples(const Model& model, const std::vector<const FeatureMatrix*>& clips) {
  ExamplePool pool;
  for (const FeatureMatrix* fm : clips) {
    std::vector<float> ex = model.examples(*fm);
    pool.data.insert(pool.data.end(), ex.begin(), ex.end());
  }
  pool.count = pool.data.size() / model.spec().example_size();
  return pool;
}

double pool_loss(const Model& model, const ExamplePool& pool, LossKind kind, std::uint64_t seed) {
  if (pool.count == 0) return std::numeric_limits<double>::quiet_NaN();
  NoGradGuard no_grad;
  std::mt19937_64 noise = seeded(seed, kEvalStream);
  const std::size_t size = model.spec().example_size();
  constexpr std::size_t kChunk = 64;
  double total = 0.0;
  for (std::size_t first = 0; first < pool.count; first += kChunk) {
    const std::size_t n = std::min(kChunk, pool.count - first);
    const Tensorf x = model.batch(std::span<const float>(pool.data).subspan(first * size), n);
    total += batch_loss(model, x, kind, noise).total.item() * static_cast<double>(n);
  }
  return total / static_cast<double>(pool.count);
}

}  // namespace

std::vector<std::size_t> validation_indices(std::size_t n_clips, double fraction,
                                            std::uint64_t seed) {
  auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n_clips) + 1e-9));
  if (fraction > 0.0 && n_val == 0 && n_clips >= 2) n_val = 1;
  if (n_val >= n_clips) n_val = n_clips > 0 ? n_clips - 1 : 0;
  std::vector<std::size_t> order(n_clips);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng = seeded(seed, kSplitStream);
  shuffle_indices(order, rng);
  order.resize(n_val);
  std::sort(order.begin(), order.end());
  return order;
}

double evaluate_loss(const Model& model, const std::vector<const FeatureMatrix*>& clips,
                     LossKind loss, std::uint64_t seed) {
  return pool_loss(model, pool_examples(model, clips), loss, seed);
}

TrainLog train(Model& model, const std::vector<TrainingClip>& clips, const TrainConfig& config) {
  config.validate();
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (clips[i].label != Label::kNormal) {
      fail(ErrorKind::kSemiSupervision, "training clip " + std::to_string(i) + " is labeled " +
                                            std::string(to_string(clips[i].label)) +
                                            "; only normal clips may be used for training");
    }
  }
  if (clips.empty()) fail(ErrorKind::kDatasetEmpty, "no training clips");
  const LossKind kind = resolve_loss(model, config);

  const std::vector<std::size_t> val_idx =
      validation_indices(clips.size(), config.validation_split, config.seed);
  std::vector<const FeatureMatrix*> train_fm, val_fm;
  for (std::size_t i = 0, v = 0; i < clips.size(); ++i) {
    if (v < val_idx.size() && val_idx[v] == i) {
      val_fm.push_back(clips[i].features);
      ++v;
    } else {
      train_fm.push_back(clips[i].features);
    }
  }

  model.fit_normalizer(train_fm);
  const ExamplePool train_pool = pool_examples(model, train_fm);
  const ExamplePool val_pool = pool_examples(model, val_fm);
  const std::size_t size = model.spec().example_size();

  TrainLog log;
  log.train_clips = train_fm.size();
  log.val_clips = val_fm.size();
  log.initial_loss = pool_loss(model, train_pool, kind, config.seed);
  log.best_val_loss = std::numeric_limits<double>::infinity();

  Adam<float> adam(model.parameters(), AdamConfig{config.lr});
  std::vector<std::size_t> order(train_pool.count);
  std::vector<float> batch_values;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng = seeded(config.seed, kShuffleStream, static_cast<std::uint64_t>(epoch));
    std::mt19937_64 noise = seeded(config.seed, kNoiseStream, static_cast<std::uint64_t>(epoch));
    shuffle_indices(order, shuffle_rng);

    double epoch_total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t first = 0; first < order.size(); first += config.batch_size, ++batch_index) {
      const std::size_t n = std::min(config.batch_size, order.size() - first);
      batch_values.resize(n * size);
      for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(train_pool.data.begin() + static_cast<std::ptrdiff_t>(order[first + r] * size),
                    size, batch_values.begin() + static_cast<std::ptrdiff_t>(r * size));
      }
      adam.zero_grad();
      const LossTerms<float> terms = batch_loss(model, model.batch(batch_values, n), kind, noise);
      const double value = terms.total.item();
      if (!std::isfinite(value)) {
        fail(ErrorKind::kDivergence, "non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_index));
      }
      backward(terms.total);
      adam.step();
      epoch_total += value * static_cast<double>(n);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = order.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : epoch_total / static_cast<double>(order.size());
    entry.val_loss = pool_loss(model, val_pool, kind, config.seed);
    entry.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    log.epochs.push_back(entry);

    if (val_pool.count > 0 && entry.val_loss < log.best_val_loss) {
      log.best_val_loss = entry.val_loss;
      log.best_epoch = epoch;
      if (!config.best_checkpoint_path.empty()) checkpoint_save(model, config.best_checkpoint_path);
    }
  }
  if (!config.checkpoint_path.empty()) checkpoint_save(model, config.checkpoint_path);
  return log;
}

void write_train_log_csv(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << "epoch,train_loss,val_loss,seconds\n" << std::setprecision(10);
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << e.train_loss << ',';
    if (std::isfinite(e.val_loss)) out << e.val_loss;
    out << ',' << e.seconds << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'A', 'A', 'D', 'M'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> values) {
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

void put_tensor(std::vector<std::uint8_t>& out, const Shape& shape, std::span<const float> values) {
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u32(out, static_cast<std::uint32_t>(d));
  put_floats(out, values);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void floats(std::span<float> out) {
    need(out.size() * 4);
    for (float& f : out) f = std::bit_cast<float>(u32());
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorKind::kFormat, "checkpoint truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> checkpoint_bytes(const Model& model) {
  json header = {{"spec", json::parse(model_spec_json(model.spec()))},
                 {"threshold", model.threshold ? json(*model.threshold) : json(nullptr)},
                 {"threshold_max_fpr", model.threshold_max_fpr},
                 {"tensors", model.parameters().size() + 2}};
  if (model.features) header["features"] = json::parse(feature_config_json(*model.features));
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const Tensorf& p : model.parameters()) put_tensor(out, p.shape(), p.values());
  put_tensor(out, {model.norm_mean().size()}, model.norm_mean());
  put_tensor(out, {model.norm_scale().size()}, model.norm_scale());
  return out;
}

void checkpoint_save(const Model& model, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = checkpoint_bytes(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

Model checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes, const ModelSpec* expected) {
  Reader in(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::kFormat, "not a model checkpoint (bad magic)");
  }
  in.text(4);
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kFormat, "checkpoint version " + std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion));
  }
  json header;
  try {
    header = json::parse(in.text(in.u32()));
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("checkpoint header: ") + e.what());
  }
  ModelSpec spec = model_spec_from_json(header.at("spec").dump());
  if (expected && !(spec == *expected)) {
    fail(ErrorKind::kSpecMismatch, "checkpoint holds a " + std::string(to_string(spec.kind)) +
                                       " model, expected " +
                                       std::string(to_string(expected->kind)));
  }

  Model model(spec);
  const std::size_t n_tensors = header.at("tensors").get<std::size_t>();
  if (n_tensors != model.parameters().size() + 2) {
    fail(ErrorKind::kSpecMismatch, "checkpoint tensor count does not match its spec");
  }
  auto read_shape = [&in]() {
    Shape shape(in.u32());
    for (auto& d : shape) d = in.u32();
    return shape;
  };
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    Tensorf p = model.parameters()[i];
    const Shape shape = read_shape();
    if (shape != p.shape()) {
      fail(ErrorKind::kSpecMismatch, "tensor " + model.parameter_names()[i] + " has shape " +
                                         shape_string(shape) + ", model expects " +
                                         shape_string(p.shape()));
    }
    in.floats(p.values());
  }
  std::vector<float> mean(static_cast<std::size_t>(spec.n_mels));
  std::vector<float> scale(mean.size());
  for (auto* v : {&mean, &scale}) {
    if (read_shape() != Shape{v->size()}) {
      fail(ErrorKind::kSpecMismatch, "normalizer size does not match n_mels");
    }
    in.floats(*v);
  }
  if (!in.done()) fail(ErrorKind::kFormat, "trailing bytes after checkpoint tensors");
  model.set_normalizer(std::move(mean), std::move(scale));
  if (!header.at("threshold").is_null()) model.threshold = header["threshold"].get<double>();
  model.threshold_max_fpr = header.value("threshold_max_fpr", 0.1);
  if (header.contains("features")) model.features = feature_config_from_json(header["features"].dump());
  return model;
}

Model checkpoint_load(const std::filesystem::path& path, const ModelSpec* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return checkpoint_from_bytes(bytes, expected);
}

}  // namespace aad
