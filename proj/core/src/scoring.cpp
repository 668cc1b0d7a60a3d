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

#include "aad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "aad/errors.hpp"

namespace aad {

std::string_view to_string(Decision decision) {
  return decision == Decision::kAnomaly ? "anomaly" : "normal";
}

double anomaly_score(const FeatureMatrix& observed, const FeatureMatrix& reconstructed) {
  if (observed.frames != reconstructed.frames || observed.dims != reconstructed.dims) {
    fail(ErrorKind::kShape, "observed " + std::to_string(observed.frames) + "x" +
                                std::to_string(observed.dims) + " vs reconstructed " +
                                std::to_string(reconstructed.frames) + "x" +
                                std::to_string(reconstructed.dims));
  }
  if (observed.frames == 0) fail(ErrorKind::kContract, "no frames to score");
  double total = 0.0;
  for (std::size_t t = 0; t < observed.frames; ++t) {
    double frame = 0.0;
    for (std::size_t d = 0; d < observed.dims; ++d) {
      const double diff = static_cast<double>(observed.at(t, d)) - reconstructed.at(t, d);
      frame += diff * diff;
    }
    total += frame;
  }
  return total / static_cast<double>(observed.frames);
}

double select_threshold(std::span<const double> normal_scores, double max_fpr) {
  if (normal_scores.empty()) fail(ErrorKind::kContract, "threshold needs normal scores");
  if (!(max_fpr > 0.0 && max_fpr < 1.0)) {
    fail(ErrorKind::kContract, "max_fpr must be in (0, 1)");
  }
  std::vector<double> sorted(normal_scores.begin(), normal_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // Guard the product against representation error (0.9 * 10 must be rank 9).
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - max_fpr) * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

Decision decide(double score, double tau) {
  return score > tau ? Decision::kAnomaly : Decision::kNormal;
}

double false_positive_rate(std::span<const double> normal_scores, double tau) {
  if (normal_scores.empty()) return 0.0;
  const auto above = std::count_if(normal_scores.begin(), normal_scores.end(),
                                   [tau](double s) { return s > tau; });
  return static_cast<double>(above) / static_cast<double>(normal_scores.size());
}

void write_score_csv(const std::filesystem::path& path, const std::vector<ScoreRecord>& records,
                     double tau) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << "clip_path,machine_type,machine_id,label,score,decision\n";
  out << std::setprecision(17);
  for (const auto& r : records) {
    out << r.clip << ',' << to_string(r.machine_type) << ',' << r.machine_id << ','
        << to_string(r.label) << ',' << r.score << ',' << to_string(decide(r.score, tau)) << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

std::vector<ScoreRecord> read_score_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<ScoreRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 6) fail(ErrorKind::kFormat, "score csv row: " + line);
    ScoreRecord r;
    r.clip = cols[0];
    r.machine_type = parse_machine_type(cols[1]);
    r.machine_id = std::stoi(cols[2]);
    r.label = parse_label(cols[3]);
    r.score = std::stod(cols[4]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace aad
