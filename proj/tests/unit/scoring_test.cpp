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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "aad/errors.hpp"
#include "aad/scoring.hpp"
#include "test_support.hpp"

using namespace aad;
using aad::testing::TempDir;

namespace {

FeatureMatrix matrix(std::size_t frames, std::size_t dims, std::vector<float> v) {
  FeatureMatrix fm(frames, dims);
  fm.data = std::move(v);
  return fm;
}

std::vector<double> iota_scores(int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

}  // namespace

TEST_CASE("anomaly score hand cases") {
  const FeatureMatrix a = matrix(1, 2, {1, 2});
  CHECK(anomaly_score(a, a) == 0.0);
  CHECK(anomaly_score(a, matrix(1, 2, {0, 0})) == 5.0);
  // Frame errors 2 and 4.
  CHECK(anomaly_score(matrix(2, 2, {1, 1, 2, 0}), matrix(2, 2, {0, 0, 0, 0})) == 3.0);
  CHECK_THROWS_AS(anomaly_score(a, matrix(2, 1, {0, 0})), Error);
}

TEST_CASE("anomaly score is non-negative") {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g;
  for (int i = 0; i < 50; ++i) {
    FeatureMatrix x(7, 3), y(7, 3);
    for (auto& v : x.data) v = g(rng);
    for (auto& v : y.data) v = g(rng);
    CHECK(anomaly_score(x, y) >= 0.0);
  }
}

TEST_CASE("nearest-rank threshold") {
  const auto ten = iota_scores(10);
  CHECK(select_threshold(ten, 0.10) == 9.0);
  CHECK(false_positive_rate(ten, 9.0) == doctest::Approx(0.10));
  const std::vector<double> same(8, 2.5);
  CHECK(select_threshold(same, 0.1) == 2.5);
  CHECK(false_positive_rate(same, 2.5) == 0.0);
  CHECK(select_threshold(iota_scores(4), 0.5) == 2.0);
  CHECK(false_positive_rate(iota_scores(4), 2.0) == 0.5);
  CHECK_THROWS_AS(select_threshold(std::vector<double>{}, 0.1), Error);
  CHECK_THROWS_AS(select_threshold(ten, 0.0), Error);
  CHECK_THROWS_AS(select_threshold(ten, 1.0), Error);
}

TEST_CASE("decision boundary") {
  CHECK(decide(3.0, 3.0) == Decision::kNormal);
  CHECK(decide(std::nextafter(3.0, 4.0), 3.0) == Decision::kAnomaly);
  CHECK(decide(9.5, select_threshold(iota_scores(10), 0.1)) == Decision::kAnomaly);
}

TEST_CASE("threshold guarantee on random score sets") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(1, 400);
  std::uniform_int_distribution<int> small(0, 9);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> s(static_cast<std::size_t>(size(rng)));
    const bool ties = trial % 3 == 0;
    for (auto& v : s) v = ties ? small(rng) : u(rng);
    for (double p : {0.01, 0.05, 0.1, 0.37}) {
      CHECK(false_positive_rate(s, select_threshold(s, p)) <= p);
    }
  }
}

TEST_CASE("monotone transforms keep decisions") {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> normal(60), test(40);
  for (auto& v : normal) v = e(rng);
  for (auto& v : test) v = e(rng) * 2.0;
  const double tau = select_threshold(normal, 0.1);
  auto f = [](double x) { return std::log1p(x) * 3.0 + 1.0; };
  std::vector<double> fn(normal.size());
  std::transform(normal.begin(), normal.end(), fn.begin(), f);
  const double ftau = select_threshold(fn, 0.1);
  for (double s : test) CHECK(decide(s, tau) == decide(f(s), ftau));
}

TEST_CASE("score csv round trip") {
  TempDir dir("scores");
  std::vector<ScoreRecord> records(2);
  records[0].clip = "fan/id_00/normal/a.wav";
  records[0].machine_type = MachineType::kFan;
  records[0].label = Label::kNormal;
  records[0].score = 1.25;
  records[1].clip = "fan/id_02/abnormal/b.wav";
  records[1].machine_type = MachineType::kFan;
  records[1].machine_id = 2;
  records[1].label = Label::kAnomaly;
  records[1].score = 7.5;
  write_score_csv(dir / "s.csv", records, 2.0);
  const auto back = read_score_csv(dir / "s.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].clip == records[1].clip);
  CHECK(back[1].machine_id == 2);
  CHECK(back[1].label == Label::kAnomaly);
  CHECK(back[1].score == 7.5);
}
