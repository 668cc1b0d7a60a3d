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
#include <vector>

#include "aad/audio_io.hpp"
#include "aad/dsp_features.hpp"

namespace aad {

struct EmbedConfig {
  int output_dims = 2;
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  std::uint64_t seed = 7;

  void validate(std::size_t n_points) const;
};

struct Affinities {
  Matrix joint;        // symmetric, sums to 1
  Matrix conditional;  // row i is P(j | i)
  std::vector<double> beta;     // 1 / (2 sigma_i^2)
  std::vector<double> entropy;  // natural-log entropy of each conditional row
};

// Gaussian affinities with per-row bandwidths found by bisection on the
// entropy (target log(perplexity), tolerance 1e-5, at most 200 steps).
// Duplicate rows receive a 1e-10 jitter first.
Affinities pairwise_affinities(const Matrix& x, double perplexity, std::uint64_t seed = 7);

struct Embedding {
  std::size_t n = 0;
  int dims = 2;
  std::vector<double> points;  // n x dims
  std::vector<Label> labels;
  std::vector<double> kl_history;  // KL(P || Q) before each update
  double final_kl = 0.0;           // after the last update

  double at(std::size_t i, int d) const { return points[i * static_cast<std::size_t>(dims) + d]; }
};

// Exact O(n^2) t-SNE.
Embedding tsne_embed(const Matrix& x, const EmbedConfig& config,
                     std::vector<Label> labels = {});

// Mean silhouette coefficient with Euclidean distances.
double silhouette(const std::vector<double>& points, std::size_t dims,
                  const std::vector<int>& labels);
double silhouette(const Embedding& e);

// Writes <stem>.csv and <stem>.svg (2-D) or <stem>_xy/_yz/_xz.svg (3-D).
// Returns the written paths.
std::vector<std::filesystem::path> emit_plot(const Embedding& e, const std::filesystem::path& stem);

}  // namespace aad
