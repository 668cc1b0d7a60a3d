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

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aad/cli.hpp"
#include "aad/errors.hpp"
#include "test_support.hpp"

using namespace aad;
using aad::testing::TempDir;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args, const std::string& input = {}) {
  std::ostringstream out, err;
  std::istringstream in(input);
  Run r;
  r.code = cli::dispatch(args, out, err, in);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::size_t count_wavs(const std::filesystem::path& root) {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.path().extension() == ".wav") ++n;
  }
  return n;
}

// A small synthetic dataset with a trained dense autoencoder.
struct TrainedFixture {
  TempDir dir{"cli"};
  std::vector<std::string> base;
  TrainedFixture() {
    base = {"--output-dir", dir.path().string()};
    auto synth = base;
    synth.insert(synth.end(), {"synth", "--n-normal", "20", "--n-anomaly", "4", "--duration-s", "1"});
    REQUIRE(run(synth).code == 0);
    auto train = base;
    train.insert(train.end(), {"train", "--model", "dense_ae", "--epochs", "2", "--feature-rate",
                               "16000", "--n-mels", "16"});
    const Run r = run(train);
    INFO(r.err);
    REQUIRE(r.code == 0);
  }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"synth", "--no-such-flag"}).code == cli::kExitUsage);
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"train", "--model", "lstm"}).code != cli::kExitOk);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("config precedence") {
  const json file = {{"features", {{"n_mels", 32}}}, {"train", {{"epochs", 3}}}};
  const json flags = {{"features", {{"n_mels", 16}}}};
  const cli::RunConfig both = cli::resolve_config(file, flags);
  CHECK(both.features.n_mels == 16);
  CHECK(both.train.epochs == 3);
  CHECK(both.model.n_mels == 16);
  const cli::RunConfig file_only = cli::resolve_config(file, json::object());
  CHECK(file_only.features.n_mels == 32);
  const cli::RunConfig none = cli::resolve_config(json::object(), json::object());
  CHECK(none.features.n_mels == FeatureConfig{}.n_mels);
  CHECK(none.train.epochs == TrainConfig{}.epochs);
}

TEST_CASE("seed reaches every section") {
  const cli::RunConfig c = cli::resolve_config({{"seed", 99}}, json::object());
  CHECK(c.model.seed == 99);
  CHECK(c.train.seed == 99);
  CHECK(c.embed.seed == 99);
  CHECK(c.synth.seed == 99);
}

TEST_CASE("model kind selects its own defaults") {
  const cli::RunConfig c = cli::resolve_config({{"model", {{"kind", "dense_ae"}}}}, json::object());
  CHECK(c.model.kind == ModelKind::kDenseAe);
  CHECK(c.model.hidden == default_model_spec(ModelKind::kDenseAe).hidden);
  CHECK(c.model.latent_dim == default_model_spec(ModelKind::kDenseAe).latent_dim);
}

TEST_CASE("bad config keys are rejected") {
  try {
    cli::resolve_config({{"features", {{"n_mel", 32}}}}, json::object());
    FAIL("expected configuration error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfiguration);
  }
}

TEST_CASE("config round trip") {
  const cli::RunConfig c = cli::resolve_config(json::object(), json::object());
  const json j = cli::run_config_to_json(c);
  CHECK(cli::run_config_to_json(cli::run_config_from_json(j)) == j);
}

TEST_CASE("config file from the environment and from --config") {
  TempDir dir("env");
  const auto env_cfg = dir / "env.json";
  const auto flag_cfg = dir / "flag.json";
  write_text(env_cfg, json{{"output_dir", (dir / "a").string()},
                           {"synth", {{"n_normal", 3}, {"n_anomaly", 1}, {"duration_s", 0.25}}}}
                          .dump());
  write_text(flag_cfg, json{{"output_dir", (dir / "b").string()},
                            {"synth", {{"n_normal", 2}, {"n_anomaly", 0}, {"duration_s", 0.25}}}}
                           .dump());
  ::setenv(cli::kConfigEnv, env_cfg.c_str(), 1);
  CHECK(run({"synth"}).code == 0);
  CHECK(count_wavs(dir / "a") == 4);
  CHECK(run({"--config", flag_cfg.string(), "synth"}).code == 0);
  CHECK(count_wavs(dir / "b") == 2);
  // Flags still win over the file.
  CHECK(run({"synth", "--n-normal", "5", "--output-dir", (dir / "c").string()}).code == 0);
  CHECK(count_wavs(dir / "c") == 6);
  ::unsetenv(cli::kConfigEnv);

  write_text(dir / "broken.json", "{ not json");
  CHECK(run({"--config", (dir / "broken.json").string(), "synth"}).code == cli::kExitPipelineError);
}

TEST_CASE("pipeline errors exit with 1") {
  TempDir dir("missing");
  const Run r = run({"--dataset", (dir / "nowhere").string(), "--output-dir", dir.path().string(),
                     "eval", "--model", "dense_ae"});
  CHECK(r.code == cli::kExitPipelineError);
  CHECK(r.err.rfind("aad: ", 0) == 0);
}

TEST_CASE("train, eval, score and stream") {
  TrainedFixture fx;
  const auto out_dir = fx.dir.path();
  CHECK(std::filesystem::exists(out_dir / "dense_ae.aadm"));
  CHECK(std::filesystem::exists(out_dir / "dense_ae_train_log.csv"));
  CHECK(count_lines(slurp(out_dir / "dense_ae_train_log.csv")) == 3);

  SUBCASE("eval echoes p") {
    auto args = fx.base;
    args.insert(args.end(), {"eval", "--model", "dense_ae", "--p", "0.05", "--format", "json",
                             "--format", "md"});
    const Run r = run(args);
    INFO(r.err);
    REQUIRE(r.code == 0);
    const json report = json::parse(slurp(out_dir / "report_dense_ae.json"));
    CHECK(report.at("p").get<double>() == 0.05);
    CHECK(std::filesystem::exists(out_dir / "report_dense_ae.md"));
    CHECK(r.out.find("| Model |") != std::string::npos);
  }

  SUBCASE("score writes one row per test clip") {
    auto args = fx.base;
    args.insert(args.end(), {"score", "--model", "dense_ae", "--all"});
    REQUIRE(run(args).code == 0);
    CHECK(count_lines(slurp(out_dir / "dense_ae_scores.csv")) == 1 + 24);
  }

  SUBCASE("stream scores every window of a piped clip") {
    std::vector<float> samples(10 * 16000);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = 0.1f * static_cast<float>((i * 7919) % 101) / 101.0f;
    std::string bytes(samples.size() * 4, '\0');
    std::memcpy(bytes.data(), samples.data(), bytes.size());
    auto args = fx.base;
    args.insert(args.end(), {"stream", "--model", "dense_ae"});
    const Run r = run(args, bytes);
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(count_lines(r.out) == 9);
    CHECK(r.out.rfind("0.000, ", 0) == 0);
    CHECK(r.err.find("windows=9") != std::string::npos);
    CHECK(r.err.find("rtf=") != std::string::npos);
  }
}
