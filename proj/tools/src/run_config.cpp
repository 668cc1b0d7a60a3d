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

#include <string>

#include "aad/cli.hpp"
#include "aad/errors.hpp"

namespace aad::cli {

using nlohmann::json;

std::filesystem::path RunConfig::resolved_dataset_root() const {
  return dataset_root.empty() ? output_dir / "dataset" : dataset_root;
}

namespace {

const char* encoding_name(WavEncoding e) { return e == WavEncoding::kPcm16 ? "pcm16" : "float32"; }

WavEncoding parse_encoding(const std::string& name) {
  if (name == "pcm16") return WavEncoding::kPcm16;
  if (name == "float32") return WavEncoding::kFloat32;
  fail(ErrorKind::kConfiguration, "unknown wav encoding '" + name + "'");
}

json sections(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const EvalConfig& e = c.eval;
  const EmbedConfig& m = c.embed;
  const SynthConfig& s = c.synth;
  return {
      {"seed", c.seed},
      {"dataset_root", c.dataset_root.string()},
      {"output_dir", c.output_dir.string()},
      {"workers", c.workers},
      {"features", json::parse(feature_config_json(c.features))},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"lr", t.lr},
        {"validation_split", t.validation_split},
        {"loss", t.loss ? json(std::string(to_string(*t.loss))) : json("auto")}}},
      {"threshold", {{"max_fpr", c.threshold.max_fpr}}},
      {"eval",
       {{"p", e.p}, {"pauc_ceil", e.pauc_ceil}, {"test_normal_fraction", e.test_normal_fraction}}},
      {"embed",
       {{"output_dims", m.output_dims},
        {"perplexity", m.perplexity},
        {"iterations", m.iterations},
        {"learning_rate", m.learning_rate},
        {"early_exaggeration", m.early_exaggeration},
        {"exaggeration_iterations", m.exaggeration_iterations},
        {"momentum", m.momentum},
        {"final_momentum", m.final_momentum},
        {"momentum_switch", m.momentum_switch}}},
      {"synth",
       {{"n_normal", s.n_normal},
        {"n_anomaly", s.n_anomaly},
        {"n_ids", s.n_ids},
        {"duration_s", s.duration_s},
        {"sample_rate", s.sample_rate},
        {"encoding", encoding_name(s.encoding)}}},
      {"stream",
       {{"window_s", c.stream.window_s},
        {"hop_s", c.stream.hop_s},
        {"chunk_samples", c.stream.chunk_samples},
        {"queue_chunks", c.stream.queue_chunks}}},
  };
}

// Rejects keys that the defaults do not know about, so typos fail loudly.
void check_keys(const json& given, const json& known, const std::string& where) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!known.contains(key)) fail(ErrorKind::kConfiguration, "unknown config key '" + path + "'");
    if (value.is_object() && known[key].is_object()) check_keys(value, known[key], path);
  }
}

json model_keys() {
  return json::parse(model_spec_json(default_model_spec(ModelKind::kTcnCvae)));
}

}  // namespace

json default_config_json() {
  RunConfig defaults;
  json j = sections(defaults);
  j["model"] = {{"kind", std::string(to_string(ModelKind::kTcnCvae))}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  json known = default_config_json();
  known["model"] = model_keys();
  check_keys(j, known, "");

  const RunConfig d;
  RunConfig c;
  try {
    c.seed = j.value("seed", d.seed);
    c.dataset_root = j.value("dataset_root", d.dataset_root.string());
    c.output_dir = j.value("output_dir", d.output_dir.string());
    c.workers = j.value("workers", d.workers);
    c.features = feature_config_from_json(j.value("features", json::object()).dump());

    json model = j.value("model", json::object());
    model["n_mels"] = c.features.n_mels;
    model["context_frames"] = c.features.context_frames;
    model["seed"] = c.seed;
    c.model = model_spec_from_json(model.dump());

    const json t = j.value("train", json::object());
    c.train.epochs = t.value("epochs", d.train.epochs);
    c.train.batch_size = t.value("batch_size", d.train.batch_size);
    c.train.lr = t.value("lr", d.train.lr);
    c.train.validation_split = t.value("validation_split", d.train.validation_split);
    const std::string loss = t.value("loss", std::string("auto"));
    if (loss != "auto") c.train.loss = parse_loss_kind(loss);
    c.train.seed = c.seed;

    c.threshold.max_fpr = j.value("threshold", json::object()).value("max_fpr", d.threshold.max_fpr);

    const json e = j.value("eval", json::object());
    c.eval.p = e.value("p", d.eval.p);
    c.eval.pauc_ceil = e.value("pauc_ceil", d.eval.pauc_ceil);
    c.eval.test_normal_fraction = e.value("test_normal_fraction", d.eval.test_normal_fraction);

    const json m = j.value("embed", json::object());
    c.embed.output_dims = m.value("output_dims", d.embed.output_dims);
    c.embed.perplexity = m.value("perplexity", d.embed.perplexity);
    c.embed.iterations = m.value("iterations", d.embed.iterations);
    c.embed.learning_rate = m.value("learning_rate", d.embed.learning_rate);
    c.embed.early_exaggeration = m.value("early_exaggeration", d.embed.early_exaggeration);
    c.embed.exaggeration_iterations = m.value("exaggeration_iterations", d.embed.exaggeration_iterations);
    c.embed.momentum = m.value("momentum", d.embed.momentum);
    c.embed.final_momentum = m.value("final_momentum", d.embed.final_momentum);
    c.embed.momentum_switch = m.value("momentum_switch", d.embed.momentum_switch);
    c.embed.seed = c.seed;

    const json s = j.value("synth", json::object());
    c.synth.n_normal = s.value("n_normal", d.synth.n_normal);
    c.synth.n_anomaly = s.value("n_anomaly", d.synth.n_anomaly);
    c.synth.n_ids = s.value("n_ids", d.synth.n_ids);
    c.synth.duration_s = s.value("duration_s", d.synth.duration_s);
    c.synth.sample_rate = s.value("sample_rate", d.synth.sample_rate);
    c.synth.encoding = parse_encoding(s.value("encoding", std::string(encoding_name(d.synth.encoding))));
    c.synth.seed = c.seed;

    const json st = j.value("stream", json::object());
    c.stream.window_s = st.value("window_s", d.stream.window_s);
    c.stream.hop_s = st.value("hop_s", d.stream.hop_s);
    c.stream.chunk_samples = st.value("chunk_samples", d.stream.chunk_samples);
    c.stream.queue_chunks = st.value("queue_chunks", d.stream.queue_chunks);
  } catch (const json::exception& ex) {
    fail(ErrorKind::kConfiguration, std::string("config value: ") + ex.what());
  }
  c.features.validate();
  c.model.validate();
  c.train.validate();
  if (c.stream.chunk_samples == 0 || c.stream.queue_chunks == 0) {
    fail(ErrorKind::kConfiguration, "stream chunk_samples and queue_chunks must be positive");
  }
  return c;
}

json run_config_to_json(const RunConfig& config) {
  json j = sections(config);
  json model = json::parse(model_spec_json(config.model));
  model.erase("n_mels");
  model.erase("context_frames");
  model.erase("seed");
  j["model"] = std::move(model);
  return j;
}

RunConfig resolve_config(const json& file, const json& flags) {
  if (!file.is_null() && !file.is_object()) {
    fail(ErrorKind::kConfiguration, "config file must hold a JSON object");
  }
  json merged = default_config_json();
  // Changing the model kind resets the per-kind architecture defaults.
  for (const json* layer : {&file, &flags}) {
    if (layer->is_object() && layer->contains("model") && (*layer)["model"].contains("kind")) {
      merged["model"] = json::object();
    }
    if (layer->is_object()) merged.merge_patch(*layer);
  }
  return run_config_from_json(merged);
}

}  // namespace aad::cli
