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

#include "aad/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "aad/errors.hpp"

namespace aad {

void EmbedConfig::validate(std::size_t n_points) const {
  if (output_dims < 1 || output_dims > 3) {
    fail(ErrorKind::kConfiguration, "output_dims must be 1, 2 or 3");
  }
  if (n_points < 4) fail(ErrorKind::kConfiguration, "t-SNE needs at least 4 points");
  if (!(perplexity > 0.0) || !(perplexity < (static_cast<double>(n_points) - 1.0) / 3.0)) {
    fail(ErrorKind::kConfiguration, "perplexity " + std::to_string(perplexity) +
                                        " must be below (n - 1) / 3 = " +
                                        std::to_string((static_cast<double>(n_points) - 1.0) / 3.0));
  }
  if (iterations < 1) fail(ErrorKind::kConfiguration, "iterations must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorKind::kConfiguration, "learning_rate must be positive");
}

namespace {

std::mt19937_64 point_rng(std::uint64_t seed, std::size_t i, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32), stream};
  return std::mt19937_64(seq);
}

Matrix jitter_duplicates(const Matrix& x, std::uint64_t seed) {
  Matrix out = x;
  for (std::size_t i = 1; i < x.rows; ++i) {
    bool duplicate = false;
    for (std::size_t j = 0; j < i && !duplicate; ++j) {
      duplicate = std::equal(x.row(i).begin(), x.row(i).end(), x.row(j).begin());
    }
    if (!duplicate) continue;
    std::mt19937_64 rng = point_rng(seed, i, 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t d = 0; d < x.cols; ++d) out.at(i, d) += 1e-10 * gauss(rng);
  }
  return out;
}

Matrix squared_distances(const Matrix& x) {
  Matrix d(x.rows, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t j = i + 1; j < x.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) {
        const double diff = x.at(i, k) - x.at(j, k);
        s += diff * diff;
      }
      d.at(i, j) = d.at(j, i) = s;
    }
  }
  return d;
}

}  // namespace

Affinities pairwise_affinities(const Matrix& x, double perplexity, std::uint64_t seed) {
  const std::size_t n = x.rows;
  if (n < 4) fail(ErrorKind::kConfiguration, "t-SNE needs at least 4 points");
  const Matrix dist = squared_distances(jitter_duplicates(x, seed));
  const double target = std::log(perplexity);
  constexpr double kTolerance = 1e-5;
  constexpr int kMaxSteps = 200;
  // Squared-distance spread that the duplicate jitter alone can produce.
  const double resolution = 1e-16 * static_cast<double>(std::max<std::size_t>(x.cols, 1));

  Affinities out;
  out.conditional = Matrix(n, n);
  out.beta.assign(n, 1.0);
  out.entropy.assign(n, 0.0);
  std::vector<double> row(n);

  for (std::size_t i = 0; i < n; ++i) {
    // Shift by the nearest distance so the largest weight is exactly 1.
    double d_min = std::numeric_limits<double>::infinity();
    double d_max = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      d_min = std::min(d_min, dist.at(i, j));
      d_max = std::max(d_max, dist.at(i, j));
    }
    if (d_max - d_min <= resolution) {
      // Neighbours are indistinguishable: no bandwidth changes the row.
      for (std::size_t j = 0; j < n; ++j) {
        out.conditional.at(i, j) = j == i ? 0.0 : 1.0 / static_cast<double>(n - 1);
      }
      out.beta[i] = 0.0;
      out.entropy[i] = std::log(static_cast<double>(n - 1));
      continue;
    }
    double beta = 1.0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    double entropy = 0.0;
    bool converged = false;
    for (int step = 0; step < kMaxSteps; ++step) {
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          row[j] = 0.0;
          continue;
        }
        const double shifted = dist.at(i, j) - d_min;
        row[j] = std::exp(-beta * shifted);
        sum += row[j];
        weighted += shifted * row[j];
      }
      entropy = std::log(sum) + beta * weighted / sum;
      for (double& v : row) v /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < kTolerance) {
        converged = true;
        break;
      }
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = std::isinf(lo) ? beta * 0.5 : 0.5 * (beta + lo);
      }
    }
    if (!converged) {
      fail(ErrorKind::kNumeric, "perplexity bisection for point " + std::to_string(i) +
                                    " did not converge in " + std::to_string(kMaxSteps) +
                                    " steps (entropy " + std::to_string(entropy) + ")");
    }
    out.beta[i] = beta;
    out.entropy[i] = entropy;
    for (std::size_t j = 0; j < n; ++j) out.conditional.at(i, j) = row[j];
  }

  out.joint = Matrix(n, n);
  const double norm = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.joint.at(i, j) = (out.conditional.at(i, j) + out.conditional.at(j, i)) / norm;
    }
  }
  return out;
}

namespace {

// Student-t kernel values (1 + |yi - yj|^2)^-1 and their sum.
double student_kernel(const std::vector<double>& y, std::size_t n, std::size_t dims, Matrix& num) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num.at(i, i) = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        const double diff = y[i * dims + d] - y[j * dims + d];
        s += diff * diff;
      }
      const double v = 1.0 / (1.0 + s);
      num.at(i, j) = num.at(j, i) = v;
      total += 2.0 * v;
    }
  }
  return total;
}

double kl_divergence(const Matrix& p, const Matrix& num, double total) {
  constexpr double kFloor = 1e-12;
  double kl = 0.0;
  for (std::size_t i = 0; i < p.rows; ++i) {
    for (std::size_t j = 0; j < p.cols; ++j) {
      if (i == j) continue;
      const double pij = p.at(i, j);
      if (pij <= 0.0) continue;
      kl += pij * std::log(std::max(pij, kFloor) / std::max(num.at(i, j) / total, kFloor));
    }
  }
  return kl;
}

}  // namespace

Embedding tsne_embed(const Matrix& x, const EmbedConfig& config, std::vector<Label> labels) {
  const std::size_t n = x.rows;
  config.validate(n);
  if (!labels.empty() && labels.size() != n) {
    fail(ErrorKind::kShape, "labels do not match the number of points");
  }
  const auto dims = static_cast<std::size_t>(config.output_dims);
  const Matrix p = pairwise_affinities(x, config.perplexity, config.seed).joint;

  Embedding e;
  e.n = n;
  e.dims = config.output_dims;
  e.labels = labels.empty() ? std::vector<Label>(n, Label::kUnlabeled) : std::move(labels);
  e.points.resize(n * dims);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng = point_rng(config.seed, i, 2);
    std::normal_distribution<double> gauss(0.0, 1e-4);
    for (std::size_t d = 0; d < dims; ++d) e.points[i * dims + d] = gauss(rng);
  }

  std::vector<double> update(n * dims, 0.0), gains(n * dims, 1.0), grad(n * dims);
  Matrix num(n, n);
  constexpr double kMinGain = 0.01;
  auto& y = e.points;

  for (int it = 0; it < config.iterations; ++it) {
    const double exaggeration = it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double momentum = it < config.momentum_switch ? config.momentum : config.final_momentum;
    const double total = student_kernel(y, n, dims, num);
    e.kl_history.push_back(kl_divergence(p, num, total));

    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double mult =
            4.0 * (exaggeration * p.at(i, j) - num.at(i, j) / total) * num.at(i, j);
        for (std::size_t d = 0; d < dims; ++d) {
          grad[i * dims + d] += mult * (y[i * dims + d] - y[j * dims + d]);
        }
      }
    }
    for (std::size_t k = 0; k < grad.size(); ++k) {
      if (!std::isfinite(grad[k])) {
        fail(ErrorKind::kNumeric, "non-finite t-SNE gradient at iteration " + std::to_string(it));
      }
      const bool same_sign = (grad[k] > 0.0) == (update[k] > 0.0);
      gains[k] = same_sign ? gains[k] * 0.8 : gains[k] + 0.2;
      gains[k] = std::max(gains[k], kMinGain);
      update[k] = momentum * update[k] - config.learning_rate * gains[k] * grad[k];
      y[k] += update[k];
    }
    for (std::size_t d = 0; d < dims; ++d) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y[i * dims + d];
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y[i * dims + d] -= mean;
    }
  }
  e.final_kl = kl_divergence(p, num, student_kernel(y, n, dims, num));
  return e;
}

double silhouette(const std::vector<double>& points, std::size_t dims,
                  const std::vector<int>& labels) {
  const std::size_t n = labels.size();
  if (points.size() != n * dims) fail(ErrorKind::kShape, "points do not match labels");
  std::vector<int> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) fail(ErrorKind::kDegenerateEval, "silhouette needs two classes");

  double total = 0.0;
  std::vector<double> sum(classes.size());
  std::vector<std::size_t> count(classes.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        const double diff = points[i * dims + d] - points[j * dims + d];
        s += diff * diff;
      }
      const auto c = static_cast<std::size_t>(
          std::lower_bound(classes.begin(), classes.end(), labels[j]) - classes.begin());
      sum[c] += std::sqrt(s);
      ++count[c];
    }
    const auto own = static_cast<std::size_t>(
        std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());
    if (count[own] == 0) continue;  // singleton cluster scores 0
    const double a = sum[own] / static_cast<double>(count[own]);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if (c != own && count[c] > 0) b = std::min(b, sum[c] / static_cast<double>(count[c]));
    }
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

double silhouette(const Embedding& e) {
  std::vector<int> labels;
  for (Label l : e.labels) labels.push_back(static_cast<int>(l));
  return silhouette(e.points, static_cast<std::size_t>(e.dims), labels);
}

namespace {

constexpr const char* kNormalColor = "#1f77b4";
constexpr const char* kAnomalyColor = "#ff7f0e";
constexpr const char* kOtherColor = "#7f7f7f";

const char* label_color(Label l) {
  switch (l) {
    case Label::kNormal: return kNormalColor;
    case Label::kAnomaly: return kAnomalyColor;
    default: return kOtherColor;
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

std::string scatter_svg(const Embedding& e, int ax, int ay, const std::string& title) {
  constexpr double kSize = 480.0, kMargin = 30.0;
  auto coord = [&](std::size_t i, int axis) { return axis < e.dims ? e.at(i, axis) : 0.0; };
  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  for (std::size_t i = 0; i < e.n; ++i) {
    min_x = std::min(min_x, coord(i, ax));
    max_x = std::max(max_x, coord(i, ax));
    min_y = std::min(min_y, coord(i, ay));
    max_y = std::max(max_y, coord(i, ay));
  }
  const double span_x = max_x > min_x ? max_x - min_x : 1.0;
  const double span_y = max_y > min_y ? max_y - min_y : 1.0;
  const double inner = kSize - 2 * kMargin;

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
     << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kMargin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">"
     << title << "</text>\n";
  for (std::size_t i = 0; i < e.n; ++i) {
    const double px = kMargin + (coord(i, ax) - min_x) / span_x * inner;
    const double py = kSize - kMargin - (coord(i, ay) - min_y) / span_y * inner;
    os << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3\" fill=\""
       << label_color(e.labels[i]) << "\" class=\"" << to_string(e.labels[i]) << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::vector<std::filesystem::path> emit_plot(const Embedding& e,
                                             const std::filesystem::path& stem) {
  static const char* kAxes[] = {"x", "y", "z"};
  std::vector<std::filesystem::path> written;
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());

  std::ostringstream csv;
  for (int d = 0; d < e.dims; ++d) csv << kAxes[d] << ',';
  csv << "label\n" << std::setprecision(17);
  for (std::size_t i = 0; i < e.n; ++i) {
    for (int d = 0; d < e.dims; ++d) csv << e.at(i, d) << ',';
    csv << to_string(e.labels[i]) << '\n';
  }
  std::filesystem::path csv_path = stem;
  csv_path += ".csv";
  write_text(csv_path, csv.str());
  written.push_back(csv_path);

  auto svg = [&](int ax, int ay, const std::string& suffix) {
    std::filesystem::path path = stem;
    path += suffix + ".svg";
    const std::string title = std::string(kAxes[ax]) + "-" + kAxes[ay] + " (blue normal, orange anomaly)";
    write_text(path, scatter_svg(e, ax, ay, title));
    written.push_back(path);
  };
  if (e.dims == 3) {
    svg(0, 1, "_xy");
    svg(1, 2, "_yz");
    svg(0, 2, "_xz");
  } else {
    svg(0, 1, "");
  }
  return written;
}

}  // namespace aad
