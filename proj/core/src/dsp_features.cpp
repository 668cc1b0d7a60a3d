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

#include "aad/dsp_features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "aad/errors.hpp"

namespace aad {

using nlohmann::json;

void FeatureConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorKind::kConfiguration, what); };
  if (sample_rate <= 0) bad("sample_rate must be positive");
  if (n_fft < 2) bad("n_fft must be >= 2");
  if (hop < 1 || hop > n_fft) bad("hop must be in [1, n_fft]");
  if (n_mels < 1) bad("n_mels must be >= 1");
  if (context_frames < 1 || context_frames % 2 == 0) bad("context_frames must be odd");
  if (fmin < 0) bad("fmin must be >= 0");
  if (!(fmin < resolved_fmax())) bad("fmin must be below fmax");
  if (resolved_fmax() > sample_rate / 2.0) bad("fmax must not exceed sample_rate / 2");
  if (!(log_floor > 0)) bad("log_floor must be positive");
  if (!(mel_break_hz > 0)) bad("mel_break_hz must be positive");
}

double hz_to_mel(double hz, double break_hz) {
  if (!(hz >= 0)) fail(ErrorKind::kDomain, "negative frequency " + std::to_string(hz));
  return 2595.0 * std::log10(1.0 + hz / break_hz);
}

double mel_to_hz(double mel, double break_hz) {
  return break_hz * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Matrix mel_filterbank(const FeatureConfig& config, int sample_rate) {
  FeatureConfig cfg = config;
  cfg.sample_rate = sample_rate;
  cfg.validate();

  const std::size_t n_bins = static_cast<std::size_t>(cfg.n_fft / 2 + 1);
  const auto n_mels = static_cast<std::size_t>(cfg.n_mels);
  const double mel_lo = hz_to_mel(cfg.fmin, cfg.mel_break_hz);
  const double mel_hi = hz_to_mel(cfg.resolved_fmax(), cfg.mel_break_hz);

  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                    static_cast<double>(n_mels + 1);
    edges[i] = mel_to_hz(mel, cfg.mel_break_hz);
  }
  edges.front() = cfg.fmin;
  edges.back() = cfg.resolved_fmax();

  Matrix fb(n_mels, n_bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m];
    const double center = edges[m + 1];
    const double hi = edges[m + 2];
    const double scale = cfg.slaney_norm ? 2.0 / (hi - lo) : 1.0;
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / cfg.n_fft;
      const double rise = (f - lo) / (center - lo);
      const double fall = (hi - f) / (hi - center);
      fb.at(m, k) = std::max(0.0, std::min(rise, fall)) * scale;
    }
  }

  if (cfg.strict_filterbank) {
    const auto empty = empty_filters(fb);
    if (!empty.empty()) {
      fail(ErrorKind::kConfiguration,
           "mel filter " + std::to_string(empty.front()) +
               " covers no FFT bin (n_mels too large for n_fft resolution)");
    }
  }
  return fb;
}

std::vector<std::size_t> empty_filters(const Matrix& filterbank) {
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < filterbank.rows; ++m) {
    const auto row = filterbank.row(m);
    if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) {
      out.push_back(m);
    }
  }
  return out;
}

std::vector<double> hann_window(std::size_t n) {
  // Periodic form, as used for spectral analysis.
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

void fft_inplace(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  if (n == 0 || (n & (n - 1)) != 0 || im.size() != n) {
    fail(ErrorKind::kContract, "fft size must be a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      const double wr = std::cos(angle * static_cast<double>(k));
      const double wi = std::sin(angle * static_cast<double>(k));
      for (std::size_t i = k; i < n; i += len) {
        const std::size_t j = i + half;
        const double tr = re[j] * wr - im[j] * wi;
        const double ti = re[j] * wi + im[j] * wr;
        re[j] = re[i] - tr;
        im[j] = im[i] - ti;
        re[i] += tr;
        im[i] += ti;
      }
    }
  }
}

std::size_t frame_count(std::size_t n_samples, const FeatureConfig& config) {
  const auto n_fft = static_cast<std::size_t>(config.n_fft);
  if (n_samples < n_fft) return 0;
  return 1 + (n_samples - n_fft) / static_cast<std::size_t>(config.hop);
}

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// One-sided power spectrum of a single windowed frame.
void frame_power(std::span<const float> segment, const std::vector<double>& window,
                 std::vector<double>& re, std::vector<double>& im,
                 std::span<double> out) {
  const std::size_t n = window.size();
  const std::size_t n_bins = n / 2 + 1;
  if (is_pow2(n)) {
    for (std::size_t i = 0; i < n; ++i) {
      re[i] = static_cast<double>(segment[i]) * window[i];
      im[i] = 0.0;
    }
    fft_inplace(re, im);
    for (std::size_t k = 0; k < n_bins; ++k) out[k] = re[k] * re[k] + im[k] * im[k];
    return;
  }
  for (std::size_t k = 0; k < n_bins; ++k) {
    double sr = 0.0, si = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = static_cast<double>(segment[i]) * window[i];
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) /
                       static_cast<double>(n);
      sr += v * std::cos(a);
      si += v * std::sin(a);
    }
    out[k] = sr * sr + si * si;
  }
}

}  // namespace

Matrix stft_power(std::span<const float> samples, const FeatureConfig& config) {
  config.validate();
  const auto n_fft = static_cast<std::size_t>(config.n_fft);
  if (samples.size() < n_fft) {
    fail(ErrorKind::kTooShort, "clip has " + std::to_string(samples.size()) +
                                   " samples, n_fft is " + std::to_string(n_fft));
  }
  const std::size_t frames = frame_count(samples.size(), config);
  const std::size_t n_bins = n_fft / 2 + 1;
  const auto window = hann_window(n_fft);
  std::vector<double> re(n_fft), im(n_fft);

  Matrix power(frames, n_bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto segment = samples.subspan(t * static_cast<std::size_t>(config.hop), n_fft);
    frame_power(segment, window, re, im,
                std::span<double>(power.data.data() + t * n_bins, n_bins));
  }
  return power;
}

Matrix stft_power(const AudioClip& clip, const FeatureConfig& config) {
  return stft_power(std::span<const float>(clip.samples), config);
}

LogMelExtractor::LogMelExtractor(const FeatureConfig& config)
    : config_(config), filterbank_(mel_filterbank(config, config.sample_rate)) {}

FeatureMatrix LogMelExtractor::compute(std::span<const float> samples) const {
  const Matrix power = stft_power(samples, config_);
  const std::size_t n_mels = filterbank_.rows;
  const std::size_t n_bins = filterbank_.cols;

  // Each triangle touches a contiguous bin range; skip the zeros.
  std::vector<std::pair<std::size_t, std::size_t>> support(n_mels, {0, 0});
  for (std::size_t m = 0; m < n_mels; ++m) {
    std::size_t lo = n_bins, hi = 0;
    for (std::size_t k = 0; k < n_bins; ++k) {
      if (filterbank_.at(m, k) != 0.0) {
        lo = std::min(lo, k);
        hi = k + 1;
      }
    }
    support[m] = lo < hi ? std::make_pair(lo, hi) : std::make_pair<std::size_t, std::size_t>(0, 0);
  }

  FeatureMatrix out(power.rows, n_mels,
                    static_cast<double>(config_.sample_rate) / config_.hop);
  for (std::size_t t = 0; t < power.rows; ++t) {
    const auto frame = power.row(t);
    for (std::size_t m = 0; m < n_mels; ++m) {
      double energy = 0.0;
      for (std::size_t k = support[m].first; k < support[m].second; ++k) {
        energy += filterbank_.at(m, k) * frame[k];
      }
      out.at(t, m) = static_cast<float>(10.0 * std::log10(std::max(energy, config_.log_floor)));
    }
  }
  return out;
}

FeatureMatrix log_mel(const AudioClip& clip, const FeatureConfig& config) {
  FeatureConfig cfg = config;
  cfg.sample_rate = clip.sample_rate;
  return LogMelExtractor(cfg).compute(clip.samples);
}

FeatureMatrix stack_frames(const FeatureMatrix& fm, std::size_t context) {
  if (context < 1) fail(ErrorKind::kContract, "context must be >= 1");
  if (fm.frames < context) {
    fail(ErrorKind::kTooShort, std::to_string(fm.frames) + " frames, need " +
                                   std::to_string(context));
  }
  FeatureMatrix out(fm.frames - context + 1, fm.dims * context, fm.frame_rate);
  for (std::size_t t = 0; t < out.frames; ++t) {
    std::copy(fm.data.begin() + static_cast<std::ptrdiff_t>(t * fm.dims),
              fm.data.begin() + static_cast<std::ptrdiff_t>((t + context) * fm.dims),
              out.data.begin() + static_cast<std::ptrdiff_t>(t * out.dims));
  }
  return out;
}

StreamingFeatureExtractor::StreamingFeatureExtractor(const FeatureConfig& config,
                                                     double window_s, double hop_s)
    : extractor_(config),
      window_samples_(static_cast<std::size_t>(std::llround(window_s * config.sample_rate))),
      hop_samples_(static_cast<std::size_t>(std::llround(hop_s * config.sample_rate))) {
  if (!(hop_s > 0) || hop_samples_ == 0) fail(ErrorKind::kContract, "hop_s must be positive");
  if (window_samples_ < static_cast<std::size_t>(config.n_fft)) {
    fail(ErrorKind::kContract, "window shorter than n_fft");
  }
}

std::vector<StreamingFeatureExtractor::Window> StreamingFeatureExtractor::push(
    std::span<const float> samples) {
  std::vector<Window> out;
  std::size_t consumed = 0;
  // Samples before next_start_ that were never buffered are skipped.
  const std::size_t buffer_end = buffer_start_ + buffer_.size();
  if (next_start_ > buffer_end) {
    const std::size_t skip = std::min(samples.size(), next_start_ - buffer_end);
    consumed = skip;
    buffer_start_ += skip;
  }
  buffer_.insert(buffer_.end(), samples.begin() + static_cast<std::ptrdiff_t>(consumed),
                 samples.end());

  const double rate = extractor_.config().sample_rate;
  while (next_start_ + window_samples_ <= buffer_start_ + buffer_.size()) {
    const std::size_t offset = next_start_ - buffer_start_;
    Window w;
    w.start_sample = next_start_;
    w.start_s = static_cast<double>(next_start_) / rate;
    w.features = extractor_.compute(
        std::span<const float>(buffer_.data() + offset, window_samples_));
    out.push_back(std::move(w));
    next_start_ += hop_samples_;
  }

  const std::size_t drop = std::min(buffer_.size(), next_start_ - buffer_start_);
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(drop));
  buffer_start_ += drop;
  return out;
}

std::vector<StreamingFeatureExtractor::Window> stream_windows(
    std::span<const float> samples, const FeatureConfig& config, double window_s,
    double hop_s) {
  StreamingFeatureExtractor probe(config, window_s, hop_s);
  LogMelExtractor extractor(config);
  std::vector<StreamingFeatureExtractor::Window> out;
  const std::size_t w = probe.window_samples();
  for (std::size_t start = 0; start + w <= samples.size(); start += probe.hop_samples()) {
    out.push_back({start, static_cast<double>(start) / config.sample_rate,
                   extractor.compute(samples.subspan(start, w))});
  }
  return out;
}

std::string feature_config_json(const FeatureConfig& c) {
  json j = {{"sample_rate", c.sample_rate}, {"n_fft", c.n_fft},
            {"hop", c.hop},                 {"n_mels", c.n_mels},
            {"context_frames", c.context_frames},
            {"fmin", c.fmin},               {"fmax", c.fmax},
            {"log_floor", c.log_floor},     {"mel_break_hz", c.mel_break_hz},
            {"slaney_norm", c.slaney_norm}, {"strict_filterbank", c.strict_filterbank}};
  return j.dump();
}

FeatureConfig feature_config_from_json(const std::string& text) {
  FeatureConfig c;
  const json j = json::parse(text);
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.n_fft = j.value("n_fft", c.n_fft);
  c.hop = j.value("hop", c.hop);
  c.n_mels = j.value("n_mels", c.n_mels);
  c.context_frames = j.value("context_frames", c.context_frames);
  c.fmin = j.value("fmin", c.fmin);
  c.fmax = j.value("fmax", c.fmax);
  c.log_floor = j.value("log_floor", c.log_floor);
  c.mel_break_hz = j.value("mel_break_hz", c.mel_break_hz);
  c.slaney_norm = j.value("slaney_norm", c.slaney_norm);
  c.strict_filterbank = j.value("strict_filterbank", c.strict_filterbank);
  return c;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) fail(ErrorKind::kFormat, "truncated feature cache");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_feature_cache(const std::filesystem::path& path, const FeatureMatrix& fm,
                         const FeatureConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  const json header = {{"dims", fm.dims},
                       {"frames", fm.frames},
                       {"frame_rate", fm.frame_rate},
                       {"config", json::parse(feature_config_json(config))}};
  const std::string text = header.dump();
  out.write("AADF", 4);
  put_u32(out, kFeatureCacheVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (float v : fm.data) {
    std::uint32_t raw;
    std::memcpy(&raw, &v, 4);
    put_u32(out, raw);
  }
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

FeatureMatrix read_feature_cache(const std::filesystem::path& path, FeatureConfig* config_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "AADF", 4) != 0) {
    fail(ErrorKind::kFormat, "bad feature cache magic in " + path.string());
  }
  const std::uint32_t version = get_u32(in);
  if (version != kFeatureCacheVersion) {
    fail(ErrorKind::kFormat, "unsupported feature cache version " + std::to_string(version));
  }
  const std::uint32_t len = get_u32(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) fail(ErrorKind::kFormat, "truncated feature cache header");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("feature cache header: ") + e.what());
  }
  FeatureMatrix fm(header.at("frames").get<std::size_t>(), header.at("dims").get<std::size_t>(),
                   header.value("frame_rate", 0.0));
  for (float& v : fm.data) {
    const std::uint32_t raw = get_u32(in);
    std::memcpy(&v, &raw, 4);
  }
  if (config_out) *config_out = feature_config_from_json(header.at("config").dump());
  return fm;
}

}  // namespace aad
