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

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "aad/errors.hpp"
#include "aad/models.hpp"
#include "test_support.hpp"

using namespace aad;
using aad::testing::gradient_error;
using aad::testing::random_tensor;

namespace {

LatentDistribution<double> latent(std::vector<double> mu, std::vector<double> lv) {
  const std::size_t d = mu.size();
  return {Tensord::from({d}, std::move(mu), true), Tensord::from({d}, std::move(lv), true)};
}

// Index of the earliest input frame whose perturbation reaches the last output.
std::size_t earliest_influence(const TcnEncoder& enc, std::size_t frames, std::size_t channels) {
  std::vector<float> zeros(channels * frames, 0.0f);
  const Tensorf base = enc.forward(Tensorf::from({1, channels, frames}, zeros));
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<float> bumped = zeros;
    for (std::size_t c = 0; c < channels; ++c) bumped[c * frames + t] = 1.0f;
    const Tensorf y = enc.forward(Tensorf::from({1, channels, frames}, bumped));
    const std::size_t out_ch = y.dim(1);
    for (std::size_t c = 0; c < out_ch; ++c) {
      if (y.values()[c * frames + frames - 1] != base.values()[c * frames + frames - 1]) return t;
    }
  }
  return frames;
}

}  // namespace

TEST_CASE("receptive field formulas") {
  CHECK(receptive_field(3, 2).estimate == 8);
  CHECK(receptive_field(3, 2).exact == 8);
  CHECK(receptive_field(4, 3).estimate == 32);
  CHECK(receptive_field(4, 3).exact == 31);
  CHECK(receptive_field(5, 1).estimate == 0);
  CHECK(receptive_field(5, 1).exact == 1);
}

TEST_CASE("empirical receptive field of the plain stack") {
  for (auto [layers, kernel] : {std::pair{3, 2}, std::pair{4, 3}, std::pair{2, 1}}) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(layers * 10 + kernel));
    const TcnEncoder enc(2, 3, layers, kernel, rng, /*relu=*/false);
    const std::size_t frames = 64;
    const std::size_t first = earliest_influence(enc, frames, 2);
    CHECK(static_cast<std::int64_t>(frames - first) == receptive_field(layers, kernel).exact);
  }
}

TEST_CASE("tcn encoder is causal") {
  std::mt19937_64 rng(4);
  const TcnEncoder enc(3, 4, 4, 3, rng);
  std::normal_distribution<float> g;
  const std::size_t frames = 40;
  std::vector<float> x(3 * frames);
  for (auto& v : x) v = g(rng);
  const Tensorf base = enc.forward(Tensorf::from({1, 3, frames}, x));
  for (std::size_t t = 0; t + 1 < frames; ++t) {
    std::vector<float> bumped = x;
    for (std::size_t c = 0; c < 3; ++c) bumped[c * frames + t + 1] += 5.0f;
    const Tensorf y = enc.forward(Tensorf::from({1, 3, frames}, bumped));
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t s = 0; s <= t; ++s) {
        CHECK(y.values()[c * frames + s] == base.values()[c * frames + s]);
      }
    }
  }
}

TEST_CASE("parameter counts") {
  std::mt19937_64 rng(1);
  CHECK(param_count({he_uniform<float>({3, 2}, 3, rng), Tensorf::zeros({2})}) == 8);
  CHECK(param_count({he_uniform<float>({3, 2, 5}, 10, rng), Tensorf::zeros({3})}) == 33);

  ModelSpec mirror = default_model_spec(ModelKind::kDenseAe, 4, 1);
  mirror.hidden = {};
  mirror.latent_dim = 2;
  CHECK(Model(mirror).param_count() == 22);
}

TEST_CASE("forward shapes") {
  SUBCASE("dense ae 640 -> 128x4 -> 8") {
    const Model m(default_model_spec(ModelKind::kDenseAe, 128, 5));
    const Tensorf x = Tensorf::zeros({3, 640});
    CHECK(m.forward(x).reconstruction.shape() == x.shape());
    CHECK(m.forward(x).latent.shape() == Shape{3, 8});
  }
  for (ModelKind kind : {ModelKind::kCae, ModelKind::kCvae, ModelKind::kTcnCvae}) {
    ModelSpec spec = default_model_spec(kind, 64, 5);
    spec.tcn_channels = 16;
    const Model m(spec);
    const Tensorf x = Tensorf::zeros({2, 64, 32});
    const Model::Output out = m.forward(x);
    CHECK(out.reconstruction.shape() == x.shape());
    CHECK(out.distribution.has_value() == spec.is_variational());
  }
}

TEST_CASE("same seed gives the same initial parameters") {
  const ModelSpec spec = default_model_spec(ModelKind::kCvae, 16, 5);
  const Model a(spec), b(spec);
  REQUIRE(a.parameters().size() == b.parameters().size());
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto va = a.parameters()[i].values(), vb = b.parameters()[i].values();
    CHECK(std::equal(va.begin(), va.end(), vb.begin(), vb.end()));
  }
}

TEST_CASE("spec validation and json") {
  ModelSpec bad = default_model_spec(ModelKind::kCae, 64, 5);
  bad.window_frames = 20;  // not divisible by 2^3
  CHECK_THROWS_AS(Model{bad}, Error);
  CHECK_THROWS_AS(parse_model_kind("lstm"), Error);
  const ModelSpec spec = default_model_spec(ModelKind::kTcnCvae, 64, 5);
  CHECK(model_spec_from_json(model_spec_json(spec)) == spec);
}

TEST_CASE("reparameterize") {
  auto ld = latent({0.5, -1.0}, {0.3, -0.2});
  const Tensord zero = Tensord::zeros({2});
  const Tensord z0 = reparameterize(ld, zero);
  CHECK(z0.values()[0] == 0.5);
  CHECK(z0.values()[1] == -1.0);

  auto unit = latent({0.0, 0.0}, {0.0, 0.0});
  const Tensord n = Tensord::from({2}, {1.25, -0.75});
  const Tensord z = reparameterize(unit, n);
  CHECK(z.values()[0] == 1.25);
  CHECK(z.values()[1] == -0.75);

  std::mt19937_64 rng(3);
  auto mu = random_tensor({3}, rng);
  auto lv = random_tensor({3}, rng);
  auto eps = random_tensor({3}, rng);
  CHECK(gradient_error({mu, lv}, [&eps](const std::vector<Tensord>& v) {
          return sum(square(reparameterize(LatentDistribution<double>{v[0], v[1]}, eps)));
        }) < 1e-5);
}

TEST_CASE("reparameterized samples have mean mu") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  const double mu = 0.7, log_var = -0.4;
  const double sigma = std::exp(0.5 * log_var);
  auto ld = latent({mu}, {log_var});
  const std::size_t n = 100000;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += reparameterize(ld, Tensord::from({1}, {g(rng)})).values()[0];
  }
  CHECK(std::abs(acc / n - mu) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("vae loss hand cases") {
  const Tensord x = Tensord::from({1}, {0.0});
  LossTerms<double> t = vae_loss(x, x, latent({0.0}, {0.0}));
  CHECK(t.total.item() == 0.0);
  CHECK(t.kl == 0.0);

  t = vae_loss(x, x, latent({1.0}, {0.0}));
  CHECK(t.kl == 0.5);
  CHECK(t.total.item() == 0.5);

  t = vae_loss(x, Tensord::from({1}, {2.0}), latent({0.0}, {0.0}));
  CHECK(t.total.item() == 2.0);
  CHECK(t.reconstruction == 2.0);
}

TEST_CASE("vae loss gradients") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    auto x = random_tensor({2, 4}, rng);
    auto xh = random_tensor({2, 4}, rng);
    auto mu = random_tensor({2, 3}, rng);
    auto lv = random_tensor({2, 3}, rng);
    CHECK(gradient_error({x, xh, mu, lv}, [](const std::vector<Tensord>& v) {
            return vae_loss(v[0], v[1], LatentDistribution<double>{v[2], v[3]}).total;
          }) < 1e-5);
  }
}

TEST_CASE("closed-form KL matches a Monte-Carlo estimate") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 3; ++trial) {
    const std::size_t d = 4;
    std::vector<double> mu(d), lv(d);
    for (std::size_t i = 0; i < d; ++i) {
      mu[i] = u(rng);
      lv[i] = u(rng);
    }
    const Tensord x = Tensord::zeros({d});
    const double closed = vae_loss(x, x, latent(mu, lv)).kl;
    double mc = 0.0;
    const int n = 100000;
    for (int s = 0; s < n; ++s) {
      double log_ratio = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double e = g(rng);
        const double z = mu[i] + std::exp(0.5 * lv[i]) * e;
        log_ratio += -0.5 * lv[i] - 0.5 * e * e + 0.5 * z * z;
      }
      mc += log_ratio;
    }
    mc /= n;
    CHECK(std::abs(mc - closed) <= 0.02 * closed);
  }
}

TEST_CASE("KL is non-negative") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const Tensord x = Tensord::zeros({1});
  for (int i = 0; i < 200; ++i) CHECK(vae_loss(x, x, latent({u(rng)}, {u(rng)})).kl >= 0.0);
}

TEST_CASE("windows cover the clip") {
  ModelSpec spec = default_model_spec(ModelKind::kTcnCvae, 8, 5);
  const Model m(spec);
  CHECK(m.window_starts(32) == std::vector<std::size_t>{0});
  CHECK(m.window_starts(61) == std::vector<std::size_t>{0, 16, 29});
  CHECK(m.window_starts(64) == std::vector<std::size_t>{0, 16, 32});
  CHECK_THROWS_AS(m.window_starts(31), Error);
}

TEST_CASE("latent window is independent of later frames") {
  ModelSpec spec = default_model_spec(ModelKind::kTcnCvae, 8, 5);
  spec.tcn_layers = 3;
  spec.tcn_channels = 8;
  const Model m(spec);
  std::mt19937_64 rng(6);
  std::normal_distribution<float> g;
  FeatureMatrix fm(64, 8);
  for (auto& v : fm.data) v = g(rng);
  // The first window spans frames 0..31; frames after it must not move its code.
  const auto ex = m.examples(fm);
  FeatureMatrix later = fm;
  for (std::size_t t = 40; t < 64; ++t) {
    for (std::size_t c = 0; c < 8; ++c) later.at(t, c) += 3.0f;
  }
  const auto ex2 = m.examples(later);
  const std::size_t size = spec.example_size();
  const Tensorf a = m.forward(m.batch(ex, 1)).latent;
  const Tensorf b = m.forward(m.batch(std::span<const float>(ex2).first(size), 1)).latent;
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}
