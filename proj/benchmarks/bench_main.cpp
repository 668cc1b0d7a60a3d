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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "aad/audio_io.hpp"
#include "aad/dsp_features.hpp"
#include "aad/models.hpp"
#include "aad/pipeline.hpp"
#include "aad/scoring.hpp"
#include "aad/tensor.hpp"
#include "aad/tsne.hpp"

namespace {

aad::FeatureConfig small_features() {
  aad::FeatureConfig f;
  f.sample_rate = 16000;
  f.n_mels = 64;
  f.context_frames = 5;
  return f;
}

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 0.1f);
  std::vector<float> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

// Log-mel of one clip; arg is the clip length in seconds.
static void BM_LogMel(benchmark::State& state) {
  const aad::LogMelExtractor extractor(small_features());
  const auto samples = noise(static_cast<std::size_t>(state.range(0)) * 16000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(extractor.compute(samples));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 16000);
}
BENCHMARK(BM_LogMel)->Arg(2)->Arg(10);

static void BM_Conv1dCausal(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const std::size_t channels = static_cast<std::size_t>(state.range(0));
  const auto x = aad::Tensorf::from({16, channels, 32}, noise(16 * channels * 32, 3));
  const auto w = aad::he_uniform<float>({channels, channels, 3}, channels * 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(aad::conv1d_causal(x, w, 4));
}
BENCHMARK(BM_Conv1dCausal)->Arg(16)->Arg(64);

static void BM_Conv1dBackward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto x = aad::Tensorf::from({16, 64, 32}, noise(16 * 64 * 32, 3));
  auto w = aad::he_uniform<float>({64, 64, 3}, 192, rng);
  for (auto _ : state) {
    w.zero_grad();
    aad::backward(aad::sum(aad::square(aad::conv1d_causal(x, w, 2))));
  }
}
BENCHMARK(BM_Conv1dBackward);

static void BM_TsneExact(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  aad::Matrix x(n, 32);
  for (auto& v : x.data) v = g(rng);
  aad::EmbedConfig cfg;
  cfg.perplexity = 10;
  cfg.iterations = 100;
  for (auto _ : state) benchmark::DoNotOptimize(aad::tsne_embed(x, cfg));
}
BENCHMARK(BM_TsneExact)->Arg(100)->Arg(250)->Unit(benchmark::kMillisecond);

// One second of audio through the streaming scorer of a fresh TCN-CVAE.
static void BM_StreamScore(benchmark::State& state) {
  aad::Model model(aad::default_model_spec(aad::ModelKind::kTcnCvae, 64, 5));
  model.threshold = 1.0;
  const auto features = small_features();
  const auto samples = noise(16000 * 20, 5);
  for (auto _ : state) {
    aad::StreamScorer scorer(model, features, 2.0, 1.0);
    benchmark::DoNotOptimize(scorer.push(samples));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples.size()));
}
BENCHMARK(BM_StreamScore)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
