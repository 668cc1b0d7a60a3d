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

#include "aad/audio_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>

#include "aad/errors.hpp"

namespace aad {

namespace fs = std::filesystem;

std::string_view to_string(MachineType type) {
  switch (type) {
    case MachineType::kFan: return "fan";
    case MachineType::kPump: return "pump";
    case MachineType::kSlider: return "slider";
    case MachineType::kValve: return "valve";
    case MachineType::kSynthetic: return "synthetic";
  }
  return "unknown";
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::kNormal: return "normal";
    case Label::kAnomaly: return "anomaly";
    case Label::kUnlabeled: return "unlabeled";
  }
  return "unknown";
}

MachineType parse_machine_type(std::string_view name) {
  if (name == "fan") return MachineType::kFan;
  if (name == "pump") return MachineType::kPump;
  if (name == "slider") return MachineType::kSlider;
  if (name == "valve") return MachineType::kValve;
  if (name == "synthetic") return MachineType::kSynthetic;
  fail(ErrorKind::kFormat, "unknown machine type '" + std::string(name) + "'");
}

Label parse_label(std::string_view name) {
  if (name == "normal") return Label::kNormal;
  if (name == "abnormal" || name == "anomaly") return Label::kAnomaly;
  if (name == "unlabeled") return Label::kUnlabeled;
  fail(ErrorKind::kFormat, "unknown label '" + std::string(name) + "'");
}

namespace {

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace

AudioClip decode_wav(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail(ErrorKind::kFormat, "missing RIFF/WAVE header");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Some writers leave a bogus size on the trailing data chunk.
      if (std::memcmp(chunk, "data", 4) == 0) {
        data = bytes.data() + body;
        data_size = bytes.size() - body;
        break;
      }
      fail(ErrorKind::kFormat, "chunk extends past end of file");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) fail(ErrorKind::kFormat, "fmt chunk too small");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (size < 40) fail(ErrorKind::kFormat, "extensible fmt chunk too small");
        format = read_u16(chunk + 8 + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) fail(ErrorKind::kFormat, "no fmt chunk");
  if (data == nullptr) fail(ErrorKind::kFormat, "no data chunk");
  if (channels == 0) fail(ErrorKind::kFormat, "zero channels");
  if (rate == 0) fail(ErrorKind::kFormat, "zero sample rate");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    fail(ErrorKind::kUnsupported, "encoding format " + std::to_string(format) +
                                      " with " + std::to_string(bits) +
                                      " bits");
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t n_frames = data_size / frame_bytes;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + i * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        std::uint32_t raw = read_u32(p);
        float v;
        std::memcpy(&v, &raw, sizeof v);
        if (!std::isfinite(v)) fail(ErrorKind::kFormat, "non-finite sample");
        acc += v;
      }
    }
    clip.samples[i] = static_cast<float>(channels == 1 ? acc : acc / channels);
  }
  return clip;
}

AudioClip read_wav(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  AudioClip clip;
  try {
    clip = decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + " (" + path.string() + ")");
  }
  clip.source_path = path.string();
  return clip;
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip,
                                     WavEncoding encoding) {
  const std::uint16_t bits = encoding == WavEncoding::kPcm16 ? 16 : 32;
  const std::uint16_t format =
      encoding == WavEncoding::kPcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_size);
  for (float s : clip.samples) {
    if (encoding == WavEncoding::kPcm16) {
      const double scaled = std::round(static_cast<double>(s) * 32768.0);
      const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      put_u16(out, static_cast<std::uint16_t>(v));
    } else {
      std::uint32_t raw;
      std::memcpy(&raw, &s, sizeof raw);
      put_u32(out, raw);
    }
  }
  return out;
}

void write_wav(const fs::path& path, const AudioClip& clip,
               WavEncoding encoding) {
  if (clip.sample_rate <= 0) fail(ErrorKind::kContract, "sample_rate must be positive");
  const auto bytes = encode_wav(clip, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) fail(ErrorKind::kContract, "target_rate must be positive");
  if (clip.sample_rate <= 0) fail(ErrorKind::kContract, "clip sample_rate must be positive");
  AudioClip out = clip;
  if (target_rate == clip.sample_rate || clip.samples.empty()) {
    out.sample_rate = target_rate;
    return out;
  }

  const std::int64_t g = std::gcd<std::int64_t, std::int64_t>(clip.sample_rate, target_rate);
  const std::int64_t step_in = clip.sample_rate / g;
  const std::int64_t step_out = target_rate / g;
  const auto n_in = static_cast<std::int64_t>(clip.samples.size());
  const std::int64_t n_out = (n_in * step_out + step_in / 2) / step_in;

  out.sample_rate = target_rate;
  out.samples.assign(static_cast<std::size_t>(std::max<std::int64_t>(n_out, 1)), 0.0f);
  for (std::int64_t n = 0; n < static_cast<std::int64_t>(out.samples.size()); ++n) {
    const std::int64_t num = n * step_in;
    const std::int64_t idx = num / step_out;
    const double frac = static_cast<double>(num % step_out) / static_cast<double>(step_out);
    const double a = clip.samples[static_cast<std::size_t>(std::min(idx, n_in - 1))];
    const double b = clip.samples[static_cast<std::size_t>(std::min(idx + 1, n_in - 1))];
    out.samples[static_cast<std::size_t>(n)] = static_cast<float>(a + (b - a) * frac);
  }
  return out;
}

std::size_t DatasetIndex::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(),
      [label](const DatasetEntry& e) { return e.label == label; }));
}

namespace {

std::optional<int> parse_id_dir(const std::string& name) {
  if (name.size() < 4 || name.rfind("id_", 0) != 0) return std::nullopt;
  int id = 0;
  for (std::size_t i = 3; i < name.size(); ++i) {
    if (name[i] < '0' || name[i] > '9') return std::nullopt;
    id = id * 10 + (name[i] - '0');
  }
  return id;
}

std::vector<fs::path> sorted_children(const fs::path& dir, bool want_dirs) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (want_dirs ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

DatasetIndex scan_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) fail(ErrorKind::kIo, "not a directory: " + root.string());
  DatasetIndex index;
  index.root = root;
  for (const auto& type_dir : sorted_children(root, true)) {
    MachineType type;
    try {
      type = parse_machine_type(type_dir.filename().string());
    } catch (const Error&) {
      continue;
    }
    for (const auto& id_dir : sorted_children(type_dir, true)) {
      const auto id = parse_id_dir(id_dir.filename().string());
      if (!id) continue;
      for (const auto& label_dir : sorted_children(id_dir, true)) {
        const std::string name = label_dir.filename().string();
        if (name != "normal" && name != "abnormal") continue;
        const Label label = parse_label(name);
        for (const auto& file : sorted_children(label_dir, false)) {
          if (file.extension() != ".wav") continue;
          index.entries.push_back({type, *id, label, file});
        }
      }
    }
  }
  if (index.entries.empty()) {
    fail(ErrorKind::kDatasetEmpty, "no clips found under " + root.string());
  }
  return index;
}

AudioClip synth_clip(const SynthConfig& config, Label label,
                     std::uint64_t clip_seed, AnomalyArchetype* archetype_out) {
  if (config.duration_s <= 0) fail(ErrorKind::kContract, "duration must be positive");
  if (config.sample_rate <= 0) fail(ErrorKind::kContract, "sample_rate must be positive");

  std::mt19937_64 rng(clip_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double sr = config.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(config.duration_s * sr));
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  std::array<double, 3> freq{};
  std::array<double, 3> amp{};
  std::array<double, 3> phase{};
  constexpr std::array<double, 3> kBaseAmp{0.3, 0.2, 0.1};
  for (std::size_t h = 0; h < 3; ++h) {
    freq[h] = kSynthHarmonicsHz[h];
    amp[h] = kBaseAmp[h] * (0.9 + 0.2 * unit(rng));
    phase[h] = kTwoPi * unit(rng);
  }
  const double noise_std = 0.01;

  AnomalyArchetype archetype = AnomalyArchetype::kTransientBurst;
  double event_start = 0.0;
  double event_len = 0.0;
  if (label == Label::kAnomaly) {
    archetype = static_cast<AnomalyArchetype>(rng() % 3);
    switch (archetype) {
      case AnomalyArchetype::kTransientBurst:
        event_len = 0.12;
        break;
      case AnomalyArchetype::kDetunedHarmonic: {
        const std::size_t h = rng() % 3;
        freq[h] *= 1.06 + 0.04 * unit(rng);
        break;
      }
      case AnomalyArchetype::kDropout:
        event_len = std::min(0.3, 0.5 * config.duration_s);
        break;
    }
    const double room = std::max(0.0, config.duration_s - event_len);
    event_start = room * (0.1 + 0.8 * unit(rng));
  }
  if (archetype_out) *archetype_out = archetype;

  AudioClip clip;
  clip.sample_rate = config.sample_rate;
  clip.machine_type = MachineType::kSynthetic;
  clip.label = label;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    double tone = 0.0;
    for (std::size_t h = 0; h < 3; ++h) tone += amp[h] * std::sin(kTwoPi * freq[h] * t + phase[h]);
    double noise = noise_std * gauss(rng);
    if (label == Label::kAnomaly) {
      const bool inside = t >= event_start && t < event_start + event_len;
      if (archetype == AnomalyArchetype::kTransientBurst && inside) {
        noise += 0.3 * std::exp(-(t - event_start) / 0.04) * gauss(rng);
      } else if (archetype == AnomalyArchetype::kDropout && inside) {
        tone *= 0.05;
      }
    }
    clip.samples[i] = static_cast<float>(std::clamp(tone + noise, -1.0, 1.0));
  }
  return clip;
}

namespace {

std::string clip_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08d.wav", index);
  return buf;
}

std::string id_dir_name(int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "id_%02d", id);
  return buf;
}

int share(int total, int parts, int k) {
  return total / parts + (k < total % parts ? 1 : 0);
}

}  // namespace

DatasetIndex synth_generate(const SynthConfig& config, const fs::path& out_root) {
  if (config.n_normal < 0 || config.n_anomaly < 0) {
    fail(ErrorKind::kContract, "clip counts must be non-negative");
  }
  if (config.n_ids < 1) fail(ErrorKind::kContract, "n_ids must be >= 1");

  DatasetIndex index;
  index.root = out_root;
  for (int id = 0; id < config.n_ids; ++id) {
    const fs::path id_dir = out_root / "synthetic" / id_dir_name(id);
    for (Label label : {Label::kNormal, Label::kAnomaly}) {
      const int count = share(label == Label::kNormal ? config.n_normal : config.n_anomaly,
                              config.n_ids, id);
      const fs::path dir = id_dir / (label == Label::kNormal ? "normal" : "abnormal");
      fs::create_directories(dir);
      for (int k = 0; k < count; ++k) {
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                          static_cast<std::uint32_t>(config.seed >> 32),
                          static_cast<std::uint32_t>(id),
                          static_cast<std::uint32_t>(label == Label::kNormal ? 0 : 1),
                          static_cast<std::uint32_t>(k)};
        std::uint64_t clip_seed = 0;
        std::array<std::uint32_t, 2> words{};
        seq.generate(words.begin(), words.end());
        clip_seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];

        AudioClip clip = synth_clip(config, label, clip_seed);
        clip.machine_id = id;
        const fs::path path = dir / clip_name(k);
        write_wav(path, clip, config.encoding);
        index.entries.push_back({MachineType::kSynthetic, id, label, path});
      }
    }
  }
  // Same ordering as scan_dataset.
  std::sort(index.entries.begin(), index.entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.path < b.path; });
  return index;
}

}  // namespace aad
