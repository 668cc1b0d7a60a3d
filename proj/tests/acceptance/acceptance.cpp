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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.
//
//   acceptance [--work DIR] [--only N[,N...]]
//
// Criteria 7 to 11 share one pipeline run under the work directory (a fresh
// temporary directory unless --work is given).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aad/audio_io.hpp"
#include "aad/cli.hpp"
#include "aad/dsp_features.hpp"
#include "aad/errors.hpp"
#include "aad/evaluation.hpp"
#include "aad/models.hpp"
#include "aad/scoring.hpp"
#include "aad/tsne.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace aad;
using aad::testing::gradient_error;
using aad::testing::random_tensor;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------
// 1. Gradients

Outcome gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  constexpr int kInstances = 20;
  constexpr double kTol = 1e-5;
  std::map<std::string, double> worst;
  auto record = [&](const std::string& op, double err) {
    worst[op] = std::max(worst[op], err);
  };
  // Linear read-out with fixed random weights so only the op is differentiated.
  auto readout = [](const Tensord& y, const Tensord& r) { return sum(mul(y, r)); };

  for (int k = 0; k < kInstances; ++k) {
    {
      auto x = random_tensor({3, 5}, rng), w = random_tensor({5, 4}, rng), b = random_tensor({4}, rng);
      auto r = random_tensor({3, 4}, rng);
      record("dense", gradient_error({x, w, b}, [&](const std::vector<Tensord>& v) {
               return readout(dense(v[0], v[1], v[2]), r);
             }));
    }
    for (std::size_t d : {1u, 2u, 4u}) {
      auto x = random_tensor({2, 3, 12}, rng), w = random_tensor({4, 3, 3}, rng);
      auto b = random_tensor({4}, rng), r = random_tensor({2, 4, 12}, rng);
      record("conv1d_causal d=" + std::to_string(d),
             gradient_error({x, w, b}, [&](const std::vector<Tensord>& v) {
               return readout(conv1d_causal(v[0], v[1], d, v[2]), r);
             }));
    }
    {
      auto x = random_tensor({7}, rng, -2.0, 2.0, 1e-3), r = random_tensor({7}, rng);
      record("relu", gradient_error({x}, [&](const std::vector<Tensord>& v) { return readout(relu(v[0]), r); }));
      record("sigmoid", gradient_error({x}, [&](const std::vector<Tensord>& v) { return readout(sigmoid(v[0]), r); }));
      record("tanh", gradient_error({x}, [&](const std::vector<Tensord>& v) { return readout(tanh(v[0]), r); }));
      record("exp", gradient_error({x}, [&](const std::vector<Tensord>& v) { return readout(exp(v[0]), r); }));
    }
    {
      auto x = random_tensor({3, 6}, rng), xh = random_tensor({3, 6}, rng);
      auto mu = random_tensor({3, 4}, rng), lv = random_tensor({3, 4}, rng);
      record("vae_loss", gradient_error({x, xh, mu, lv}, [](const std::vector<Tensord>& v) {
               return vae_loss(v[0], v[1], LatentDistribution<double>{v[2], v[3]}).total;
             }));
    }
    {
      auto mu = random_tensor({2, 5}, rng), lv = random_tensor({2, 5}, rng);
      auto eps = random_tensor({2, 5}, rng), r = random_tensor({2, 5}, rng);
      record("reparameterize", gradient_error({mu, lv}, [&](const std::vector<Tensord>& v) {
               return readout(reparameterize(LatentDistribution<double>{v[0], v[1]}, eps), r);
             }));
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome o{elapsed < 60.0, ""};
  double max_err = 0.0;
  for (const auto& [op, err] : worst) {
    if (!(err <= kTol)) {
      o.pass = false;
      o.detail += op + " err " + fmt(err) + "; ";
    }
    max_err = std::max(max_err, err);
  }
  o.detail += std::to_string(worst.size()) + " ops x " + std::to_string(kInstances) +
              " instances, max rel err " + fmt(max_err, 3) + ", " + fmt(elapsed, 3) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Causality

Outcome causality() {
  constexpr int kLayers = 4, kKernel = 3;
  constexpr std::size_t kIn = 3, kFrames = 64;
  std::mt19937_64 rng(31);
  const TcnEncoder enc(static_cast<int>(kIn), 8, kLayers, kKernel, rng);
  std::normal_distribution<float> g;
  std::vector<float> x(kIn * kFrames);
  for (auto& v : x) v = g(rng);
  const Tensorf base = enc.forward(Tensorf::from({1, kIn, kFrames}, x));
  const std::size_t out_ch = base.dim(1);
  std::size_t violations = 0;
  for (std::size_t t = 0; t + 1 < kFrames; ++t) {
    auto bumped = x;
    for (std::size_t c = 0; c < kIn; ++c) bumped[c * kFrames + t + 1] += 3.0f + g(rng);
    const Tensorf y = enc.forward(Tensorf::from({1, kIn, kFrames}, bumped));
    for (std::size_t c = 0; c < out_ch; ++c) {
      for (std::size_t s = 0; s <= t; ++s) {
        if (y.values()[c * kFrames + s] != base.values()[c * kFrames + s]) ++violations;
      }
    }
  }

  // Windowed latent codes of the full model: windows that end before the
  // perturbed frame keep their code.
  ModelSpec spec = default_model_spec(ModelKind::kTcnCvae, 16, 5);
  spec.tcn_layers = kLayers;
  spec.kernel = kKernel;
  spec.tcn_channels = 8;
  spec.window_frames = 16;
  spec.window_hop_frames = 8;
  const Model model(spec);
  FeatureMatrix fm(kFrames, 16);
  for (auto& v : fm.data) v = g(rng);
  const auto starts = model.window_starts(kFrames);
  auto codes = [&](const FeatureMatrix& m) {
    const auto ex = model.examples(m);
    return model.forward(model.batch(ex, starts.size())).latent;
  };
  const Tensorf z0 = codes(fm);
  const std::size_t latent = z0.dim(1);
  std::size_t latent_violations = 0;
  for (std::size_t t = 0; t + 1 < kFrames; ++t) {
    FeatureMatrix bumped = fm;
    for (std::size_t m = 0; m < 16; ++m) bumped.at(t + 1, m) += 2.0f;
    const Tensorf z = codes(bumped);
    for (std::size_t w = 0; w < starts.size(); ++w) {
      if (starts[w] + static_cast<std::size_t>(spec.window_frames) > t + 1) continue;
      for (std::size_t k = 0; k < latent; ++k) {
        if (z.values()[w * latent + k] != z0.values()[w * latent + k]) ++latent_violations;
      }
    }
  }

  // Empirical receptive field of the linear stack: earliest input frame that
  // moves the last output.
  std::mt19937_64 rng2(32);
  const TcnEncoder linear(1, 4, kLayers, kKernel, rng2, false);
  const std::vector<float> zeros(kFrames, 0.0f);
  const Tensorf ref = linear.forward(Tensorf::from({1, 1, kFrames}, zeros));
  std::size_t first = kFrames;
  for (std::size_t t = 0; t < kFrames && first == kFrames; ++t) {
    auto impulse = zeros;
    impulse[t] = 1.0f;
    const Tensorf y = linear.forward(Tensorf::from({1, 1, kFrames}, impulse));
    for (std::size_t c = 0; c < y.dim(1); ++c) {
      if (y.values()[c * kFrames + kFrames - 1] != ref.values()[c * kFrames + kFrames - 1]) {
        first = t;
        break;
      }
    }
  }
  const auto empirical = static_cast<std::int64_t>(kFrames - first);
  const ReceptiveField rf = receptive_field(kLayers, kKernel);
  Outcome o;
  o.pass = violations == 0 && latent_violations == 0 && empirical == rf.exact &&
           rf.exact == 1 + (kKernel - 1) * ((1 << kLayers) - 1);
  o.detail = "l=4 k=3: " + std::to_string(violations) + " output and " +
             std::to_string(latent_violations) + " latent changes before the perturbation; "
             "receptive field empirical " + std::to_string(empirical) + ", exact " +
             std::to_string(rf.exact) + ", 2^l(k-1) estimate " + std::to_string(rf.estimate);
  return o;
}

// ---------------------------------------------------------------------------
// 3. VAE loss

Outcome vae() {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> umu(-2.0, 2.0), ulv(-1.5, 1.5);
  std::normal_distribution<double> g;
  constexpr std::size_t kDims = 8;
  constexpr int kSamples = 100000;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> mu(kDims), lv(kDims);
    for (std::size_t i = 0; i < kDims; ++i) {
      mu[i] = umu(rng);
      lv[i] = ulv(rng);
    }
    const Tensord x = Tensord::zeros({kDims});
    const double closed =
        vae_loss(x, x, {Tensord::from({kDims}, mu), Tensord::from({kDims}, lv)}).kl;
    // E_q[log q(z) - log p(z)] with z drawn from q.
    double mc = 0.0;
    for (int s = 0; s < kSamples; ++s) {
      for (std::size_t i = 0; i < kDims; ++i) {
        const double e = g(rng);
        const double z = mu[i] + std::exp(0.5 * lv[i]) * e;
        mc += -0.5 * lv[i] - 0.5 * e * e + 0.5 * z * z;
      }
    }
    mc /= kSamples;
    worst = std::max(worst, std::abs(mc - closed) / closed);
  }

  const Tensord zero = Tensord::zeros({1});
  const Tensord one = Tensord::from({1}, {1.0});
  const Tensord two = Tensord::from({1}, {2.0});
  const LatentDistribution<double> prior{zero, zero};
  const bool kl_zero = vae_loss(zero, zero, prior).kl == 0.0;
  const LossTerms<double> h1 = vae_loss(zero, zero, prior);
  const LossTerms<double> h2 = vae_loss(zero, zero, {one, zero});
  const LossTerms<double> h3 = vae_loss(zero, two, prior);
  const bool hand = h1.total.item() == 0.0 && h2.kl == 0.5 && h2.total.item() == 0.5 &&
                    h3.total.item() == 2.0;
  Outcome o;
  o.pass = worst <= 0.02 && kl_zero && hand;
  o.detail = "max |MC - closed| / closed " + fmt(worst, 3) + " over 10 draws of 1e5 samples; KL(0,0) " +
             (kl_zero ? "= 0" : "!= 0") + "; hand cases " + (hand ? "match" : "differ");
  return o;
}

// ---------------------------------------------------------------------------
// 4. Metric oracle

double heaviside(double d) { return d > 0 ? 1.0 : (d == 0 ? 0.5 : 0.0); }

double brute_pauc(std::vector<double> normal, const std::vector<double>& anomaly, std::size_t k) {
  std::sort(normal.begin(), normal.end(), std::greater<>());
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (double a : anomaly) acc += heaviside(a - normal[i]);
  }
  return acc / (static_cast<double>(k) * static_cast<double>(anomaly.size()));
}

Outcome metrics() {
  std::mt19937_64 rng(34);
  std::uniform_int_distribution<int> count(1, 50), coarse(0, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  std::size_t exact_failures = 0, comparisons = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> n(static_cast<std::size_t>(count(rng))), a(static_cast<std::size_t>(count(rng)));
    const bool ties = trial % 2 == 0;
    for (auto& v : n) v = ties ? coarse(rng) : u(rng);
    for (auto& v : a) v = ties ? coarse(rng) + 1 : u(rng) + 0.25;
    const double auc = roc_auc(n, a);
    worst = std::max(worst, std::abs(auc - brute_pauc(n, a, n.size())));
    ++comparisons;
    if (pauc(n, a, 1.0) != auc) ++exact_failures;
    for (double p : {0.05, 0.1, 0.25, 0.5}) {
      const auto k = static_cast<std::size_t>(std::floor(p * static_cast<double>(n.size()) + 1e-9));
      if (k == 0) continue;
      worst = std::max(worst, std::abs(pauc(n, a, p) - brute_pauc(n, a, k)));
      ++comparisons;
    }
  }
  Outcome o;
  o.pass = worst <= 1e-12 && exact_failures == 0;
  o.detail = std::to_string(comparisons) + " comparisons on 1000 score sets, max deviation " +
             fmt(worst, 3) + ", pauc(p=1) != auc in " + std::to_string(exact_failures) + " sets";
  return o;
}

// ---------------------------------------------------------------------------
// 5. Threshold guarantee

Outcome thresholds() {
  std::mt19937_64 rng(35);
  std::uniform_int_distribution<int> size(10, 1000);
  std::lognormal_distribution<double> scores(0.0, 1.0);
  std::size_t bound = 0, tight = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> s(static_cast<std::size_t>(size(rng)));
    for (auto& v : s) v = scores(rng);
    const double n = static_cast<double>(s.size());
    for (double p : {0.01, 0.05, 0.1}) {
      const double fpr = false_positive_rate(s, select_threshold(s, p));
      if (!(fpr <= p)) ++bound;
      if (!(fpr > p - 2.0 / n)) ++tight;
    }
  }
  Outcome o;
  o.pass = bound == 0 && tight == 0;
  o.detail = "3000 selections: " + std::to_string(bound) + " above p, " + std::to_string(tight) +
             " below p - 2/N";
  return o;
}

// ---------------------------------------------------------------------------
// 6. Feature pipeline

Outcome features() {
  FeatureConfig c;
  c.sample_rate = 22050;
  c.n_fft = 1024;
  c.hop = 512;
  c.n_mels = 512;
  c.context_frames = 11;
  std::mt19937_64 rng(36);
  std::normal_distribution<float> g(0.0f, 0.05f);
  AudioClip clip;
  clip.sample_rate = 22050;
  clip.samples.resize(220500);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    clip.samples[i] = 0.2f * static_cast<float>(std::sin(2.0 * 3.14159265358979 * 440.0 * i / 22050.0)) + g(rng);
  }
  const FeatureMatrix fm = log_mel(clip, c);
  const FeatureMatrix stacked = stack_frames(fm, static_cast<std::size_t>(c.context_frames));

  AudioClip loud = clip;
  for (float& v : loud.samples) v *= 10.0f;
  const FeatureMatrix fl = log_mel(loud, c);
  const double floor_db = 10.0 * std::log10(c.log_floor);
  double shift_err = 0.0;
  for (std::size_t k = 0; k < fm.data.size(); ++k) {
    if (fm.data[k] <= floor_db + 1.0) continue;  // floored bins do not shift
    shift_err = std::max(shift_err, std::abs(static_cast<double>(fl.data[k] - fm.data[k]) - 20.0));
  }

  FeatureConfig sc = c;
  sc.n_mels = 64;
  StreamingFeatureExtractor stream(sc, 2.0, 1.0);
  std::size_t windows = 0, mismatches = 0;
  const LogMelExtractor offline(sc);
  std::uniform_int_distribution<std::size_t> chunk(1, 5000);
  for (std::size_t pos = 0; pos < clip.samples.size();) {
    const std::size_t len = std::min(chunk(rng), clip.samples.size() - pos);
    for (const auto& w : stream.push(std::span<const float>(clip.samples).subspan(pos, len))) {
      ++windows;
      const auto slice = std::span<const float>(clip.samples).subspan(w.start_sample, stream.window_samples());
      if (!(w.features == offline.compute(slice))) ++mismatches;
    }
    pos += len;
  }
  Outcome o;
  o.pass = fm.frames == 429 && stacked.dims == 5632 && shift_err <= 1e-3 && windows == 9 &&
           mismatches == 0;
  o.detail = std::to_string(fm.frames) + " frames, stacked dims " + std::to_string(stacked.dims) +
             ", 10x amplitude shift error " + fmt(shift_err, 3) + " dB, " + std::to_string(windows) +
             " streamed windows with " + std::to_string(mismatches) + " mismatches";
  return o;
}

// ---------------------------------------------------------------------------
// Pipeline criteria

struct Pipeline {
  fs::path work;
  fs::path config;
  std::vector<std::string> errors;

  fs::path dir(const std::string& run) const { return work / run; }

  int cli(const std::string& run, std::vector<std::string> args, std::string* out = nullptr,
          std::string* err_out = nullptr, const std::string& input = {}) {
    std::vector<std::string> full = {"--config", config.string(), "--output-dir", dir(run).string()};
    full.insert(full.end(), args.begin(), args.end());
    std::ostringstream os, es;
    std::istringstream is(input);
    const int code = cli::dispatch(full, os, es, is);
    if (out) *out = os.str();
    if (err_out) *err_out = es.str();
    if (code != 0) {
      std::string cmd;
      for (const auto& a : args) cmd += a + " ";
      errors.push_back(cmd + "-> " + std::to_string(code) + ": " + es.str());
    }
    return code;
  }

  // synth -> features -> train -> eval with the reference config.
  bool full_run(const std::string& run, double* seconds) {
    const auto t0 = Clock::now();
    const bool ok = cli(run, {"synth"}) == 0 && cli(run, {"features"}) == 0 &&
                    cli(run, {"train", "--model", "tcn_cvae"}) == 0 &&
                    cli(run, {"eval", "--model", "tcn_cvae", "--format", "json"}) == 0;
    if (seconds) *seconds = seconds_since(t0);
    return ok;
  }

  std::string last_error() const { return errors.empty() ? "" : errors.back(); }
};

Pipeline* g_pipeline = nullptr;
std::optional<bool> g_reference_ok;
double g_reference_seconds = 0.0;

bool reference_run() {
  if (!g_reference_ok) g_reference_ok = g_pipeline->full_run("a", &g_reference_seconds);
  return *g_reference_ok;
}

Outcome end_to_end() {
  if (!reference_run()) return {false, "pipeline failed: " + g_pipeline->last_error()};
  const EvalReport report = report_from_json(slurp(g_pipeline->dir("a") / "report_tcn_cvae.json"));
  double auc = 0.0, pa = 0.0;
  for (const auto& m : report.machines) {
    auc += m.avg_auc;
    pa += m.avg_pauc;
  }
  auc /= static_cast<double>(report.machines.size());
  pa /= static_cast<double>(report.machines.size());
  Outcome o;
  o.pass = auc >= 90.0 && pa >= 60.0 && g_reference_seconds <= 600.0;
  o.detail = "tcn_cvae test AUC " + fmt(auc) + "%, pAUC(0.05) " + fmt(pa) + "%, pipeline " +
             fmt(g_reference_seconds, 3) + " s";
  return o;
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  std::getline(ss, cell, '|');  // leading empty
  while (std::getline(ss, cell, '|')) {
    const auto b = cell.find_first_not_of(' ');
    const auto e = cell.find_last_not_of(' ');
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!cells.empty() && cells.back().empty()) cells.pop_back();
  return cells;
}

Outcome ladder() {
  if (!reference_run()) return {false, "pipeline failed: " + g_pipeline->last_error()};
  const std::vector<std::string> kinds = {"dense_ae", "cae", "cvae", "tcn_cvae"};
  for (std::size_t i = 0; i + 1 < kinds.size(); ++i) {
    if (g_pipeline->cli("a", {"train", "--model", kinds[i]}) != 0) {
      return {false, "training " + kinds[i] + " failed: " + g_pipeline->last_error()};
    }
  }
  std::vector<std::string> args = {"eval", "--format", "md"};
  for (const auto& k : kinds) args.insert(args.end(), {"--model", k});
  if (g_pipeline->cli("a", args) != 0) return {false, "eval failed: " + g_pipeline->last_error()};

  std::vector<std::string> lines;
  std::stringstream md(slurp(g_pipeline->dir("a") / "report.md"));
  for (std::string line; std::getline(md, line);) lines.push_back(line);
  std::vector<std::string> problems;
  if (lines.size() < 6) return {false, "report.md has " + std::to_string(lines.size()) + " lines"};
  const auto header = split_cells(lines[0]);
  if (header != std::vector<std::string>{"Model", "ID", "dense_ae", "cae", "cvae", "tcn_cvae"}) {
    problems.push_back("header '" + lines[0] + "'");
  }
  if (split_cells(lines[2]).front() != "Parameters") problems.push_back("no Parameters row");
  if (split_cells(lines[3]).front() != "Metric") problems.push_back("no Metric row");
  std::size_t rows = 0;
  std::string summary;
  for (std::size_t i = 4; i < lines.size(); ++i) {
    const auto cells = split_cells(lines[i]);
    if (cells.size() != 6) {
      problems.push_back("row " + std::to_string(i) + " has " + std::to_string(cells.size()) + " cells");
      continue;
    }
    ++rows;
    std::vector<double> auc, pa;
    std::vector<bool> auc_bold, pa_bold;
    for (std::size_t m = 2; m < 6; ++m) {
      std::stringstream cs(cells[m]);
      std::string a, p;
      cs >> a >> p;
      auto value = [](const std::string& s, std::vector<double>& v, std::vector<bool>& b) {
        const bool bold = s.size() > 4 && s.rfind("**", 0) == 0;
        b.push_back(bold);
        v.push_back(std::stod(bold ? s.substr(2, s.size() - 4) : s));
      };
      value(a, auc, auc_bold);
      value(p, pa, pa_bold);
    }
    auto bold_is_max = [](const std::vector<double>& v, const std::vector<bool>& b) {
      const double best = *std::max_element(v.begin(), v.end());
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (b[k] != (v[k] == best)) return false;
      }
      return true;
    };
    if (!bold_is_max(auc, auc_bold) || !bold_is_max(pa, pa_bold)) {
      problems.push_back("bold cells in row '" + lines[i] + "' are not the row maxima");
    }
    if (cells[1] == "Avg") {
      for (std::size_t m = 0; m < 4; ++m) summary += kinds[m] + " " + fmt(auc[m]) + "/" + fmt(pa[m]) + " ";
    }
  }
  Outcome o;
  o.pass = problems.empty() && rows >= 2;
  o.detail = std::to_string(rows) + " data rows, avg AUC/pAUC: " + summary;
  for (const auto& p : problems) o.detail += "; " + p;
  return o;
}

Outcome real_time() {
  if (!reference_run()) return {false, "pipeline failed: " + g_pipeline->last_error()};
  SynthConfig sc;
  sc.duration_s = 60.0;
  sc.sample_rate = 16000;
  const AudioClip clip = synth_clip(sc, Label::kNormal, 4242);
  std::string bytes(clip.samples.size() * sizeof(float), '\0');
  std::memcpy(bytes.data(), clip.samples.data(), bytes.size());
  std::string out, err;
  if (g_pipeline->cli("a", {"stream", "--model", "tcn_cvae"}, &out, &err, bytes) != 0) {
    return {false, "stream failed: " + g_pipeline->last_error()};
  }
  const auto at = err.find("rtf=");
  if (at == std::string::npos) return {false, "no rtf in '" + err + "'"};
  const double rtf = std::stod(err.substr(at + 4));
  const auto lines = static_cast<std::size_t>(std::count(out.begin(), out.end(), '\n'));
  Outcome o;
  o.pass = rtf < 0.5 && lines == 59;
  o.detail = "60 s stream, " + std::to_string(lines) + " windows, real-time factor " + fmt(rtf, 3);
  return o;
}

Matrix two_clusters(std::size_t per, std::size_t dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix x(2 * per, dims);
  for (std::size_t i = 0; i < 2 * per; ++i) {
    for (std::size_t d = 0; d < dims; ++d) x.at(i, d) = g(rng);
    if (i >= per) x.at(i, 0) += 50.0;
  }
  return x;
}

// Silhouette of an emitted embedding CSV (label in the last column).
std::optional<double> csv_silhouette(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  std::getline(in, line);
  const auto dims = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  std::vector<double> pts;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t d = 0; d < dims; ++d) {
      std::getline(ss, cell, ',');
      pts.push_back(std::stod(cell));
    }
    std::getline(ss, cell);
    labels.push_back(parse_label(cell) == Label::kAnomaly ? 1 : 0);
  }
  return silhouette(pts, dims, labels);
}

Outcome tsne() {
  std::vector<std::string> problems;
  const Matrix x = two_clusters(20, 64, 37);
  const Affinities aff = pairwise_affinities(x, 10.0);
  double calib = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double h = 0.0;
    for (std::size_t j = 0; j < x.rows; ++j) {
      const double p = aff.conditional.at(i, j);
      if (p > 0) h -= p * std::log(p);
    }
    calib = std::max(calib, std::abs(h - std::log(10.0)));
  }
  std::vector<Label> labels(40, Label::kNormal);
  std::fill(labels.begin() + 20, labels.end(), Label::kAnomaly);
  EmbedConfig ec;
  ec.perplexity = 10.0;
  const Embedding e = tsne_embed(x, ec, labels);
  const double s_clusters = silhouette(e);
  const bool kl_down = !e.kl_history.empty() && e.final_kl < e.kl_history.front();

  std::optional<double> s_raw, s_latent;
  if (reference_run() && g_pipeline->cli("a", {"embed", "--model", "tcn_cvae", "--space", "both"}) == 0) {
    s_raw = csv_silhouette(g_pipeline->dir("a") / "embed" / "tcn_cvae_raw.csv");
    s_latent = csv_silhouette(g_pipeline->dir("a") / "embed" / "tcn_cvae_latent.csv");
  } else {
    problems.push_back("embed failed: " + g_pipeline->last_error());
  }
  Outcome o;
  o.pass = calib <= 1e-5 && kl_down && s_clusters > 0.5 && s_raw && s_latent && *s_latent > *s_raw &&
           problems.empty();
  o.detail = "entropy error " + fmt(calib, 3) + ", KL " + fmt(e.kl_history.empty() ? 0 : e.kl_history.front()) +
             " -> " + fmt(e.final_kl) + ", cluster silhouette " + fmt(s_clusters) +
             ", normal/anomaly silhouette raw " + (s_raw ? fmt(*s_raw) : "n/a") + " vs latent " +
             (s_latent ? fmt(*s_latent) : "n/a");
  for (const auto& p : problems) o.detail += "; " + p;
  return o;
}

Outcome reproducibility() {
  if (!reference_run()) return {false, "pipeline failed: " + g_pipeline->last_error()};
  double seconds = 0.0;
  if (!g_pipeline->full_run("b", &seconds)) return {false, "second run failed: " + g_pipeline->last_error()};
  const fs::path a = g_pipeline->dir("a"), b = g_pipeline->dir("b");
  std::vector<fs::path> files = {"tcn_cvae.aadm", "tcn_cvae.best.aadm", "report_tcn_cvae.json"};
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& f : files) {
    ++compared;
    if (!fs::exists(a / f) || slurp(a / f) != slurp(b / f)) differing.push_back(f.string());
  }
  for (const char* sub : {"dataset", "features"}) {
    for (const auto& entry : fs::recursive_directory_iterator(b / sub)) {
      if (!entry.is_regular_file()) continue;
      const fs::path rel = fs::relative(entry.path(), b);
      ++compared;
      if (slurp(a / rel) != slurp(entry.path())) differing.push_back(rel.string());
    }
  }
  Outcome o;
  o.pass = differing.empty();
  o.detail = std::to_string(compared) + " files compared between two seeded runs, " +
             std::to_string(differing.size()) + " differ";
  for (std::size_t i = 0; i < std::min<std::size_t>(differing.size(), 5); ++i) o.detail += "; " + differing[i];
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string n; std::getline(ss, n, ',');) only.insert(std::stoi(n));
    } else {
      std::cerr << "usage: acceptance [--work DIR] [--only N[,N...]]\n";
      return 2;
    }
  }
  std::optional<aad::testing::TempDir> temp;
  if (work.empty()) {
    temp.emplace("acceptance");
    work = temp->path();
  } else {
    fs::remove_all(work / "a");
    fs::remove_all(work / "b");
    fs::create_directories(work);
  }
  Pipeline pipeline{work, fs::path(AAD_SOURCE_DIR) / "configs" / "small.json", {}};
  g_pipeline = &pipeline;

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient oracle", gradients},
      {"causality and receptive field", causality},
      {"VAE loss and KL", vae},
      {"AUC/pAUC brute-force oracle", metrics},
      {"threshold FPR guarantee", thresholds},
      {"feature pipeline", features},
      {"synthetic end-to-end", end_to_end},
      {"model ladder report", ladder},
      {"streaming real-time factor", real_time},
      {"t-SNE", tsne},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(number)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << number << ": " << criteria[i].first
              << " (" << o.detail << ") [" << fmt(seconds_since(t0), 3) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
