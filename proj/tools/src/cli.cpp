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

#include "aad/cli.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "aad/errors.hpp"
#include "aad/pipeline.hpp"

namespace aad::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Collects options that were given on the command line into a JSON merge
// patch, leaving everything else to the config file and the defaults.
class FlagPatch {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& pointer,
                   const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    entries_.push_back({opt, [value, pointer](json& patch) {
                          patch[json::json_pointer(pointer)] = *value;
                        }});
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& flag, const std::string& pointer,
                        const std::string& help) {
    CLI::Option* opt = app->add_flag(flag, help);
    entries_.push_back({opt, [pointer](json& patch) { patch[json::json_pointer(pointer)] = true; }});
    return opt;
  }

  json patch() const {
    json out = json::object();
    for (const auto& e : entries_) {
      if (e.option->count() > 0) e.write(out);
    }
    return out;
  }

 private:
  struct Entry {
    CLI::Option* option;
    std::function<void(json&)> write;
  };
  std::vector<Entry> entries_;
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfiguration, "config " + path.string() + ": " + e.what());
  }
}

struct Context {
  RunConfig config;
  std::ostream& out;
  std::ostream& err;
  std::istream& in;
};

fs::path checkpoint_for(const RunConfig& c, ModelKind kind) {
  return c.output_dir / (std::string(to_string(kind)) + ".aadm");
}

fs::path features_dir(const RunConfig& c) { return c.output_dir / "features"; }

Model load_model(const RunConfig& c, const std::string& checkpoint) {
  return checkpoint_load(checkpoint.empty() ? checkpoint_for(c, c.model.kind) : fs::path(checkpoint));
}

// Feature settings a checkpoint was trained with, falling back to the config.
FeatureConfig model_features(const Model& model, const RunConfig& c) {
  return model.features ? *model.features : c.features;
}

std::vector<FeatureMatrix> load_clip_features(const RunConfig& c,
                                              const std::vector<DatasetEntry>& entries,
                                              const fs::path& root,
                                              const LogMelExtractor& extractor) {
  std::vector<FeatureMatrix> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    out.push_back(load_features(e.path, extractor,
                                feature_cache_path(features_dir(c), root, e.path)));
  }
  return out;
}

int run_synth(Context& ctx) {
  const fs::path root = ctx.config.resolved_dataset_root();
  const DatasetIndex index = synth_generate(ctx.config.synth, root);
  ctx.out << "wrote " << index.entries.size() << " clips (" << index.count(Label::kNormal)
          << " normal, " << index.count(Label::kAnomaly) << " anomaly) to " << root.string()
          << '\n';
  return kExitOk;
}

int run_features(Context& ctx) {
  const RunConfig& c = ctx.config;
  const DatasetIndex index = scan_dataset(c.resolved_dataset_root());
  const LogMelExtractor extractor(c.features);
  const std::size_t workers = std::max<std::size_t>(
      1, c.workers > 0 ? static_cast<std::size_t>(c.workers) : std::thread::hardware_concurrency());

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto work = [&]() {
    for (std::size_t i = next++; i < index.entries.size(); i = next++) {
      try {
        const auto& e = index.entries[i];
        const fs::path target = feature_cache_path(features_dir(c), index.root, e.path);
        fs::create_directories(target.parent_path());
        write_feature_cache(target, clip_features(e.path, extractor), c.features);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = index.entries.size();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(workers, index.entries.size()); ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  ctx.out << "cached features for " << index.entries.size() << " clips in "
          << features_dir(c).string() << '\n';
  return kExitOk;
}

int run_train(Context& ctx) {
  const RunConfig& c = ctx.config;
  const DatasetIndex index = scan_dataset(c.resolved_dataset_root());
  const DatasetSplit split = split_dataset(index, c.eval.test_normal_fraction);
  const LogMelExtractor extractor(c.features);
  const std::vector<FeatureMatrix> features = load_clip_features(c, split.train, index.root, extractor);

  std::vector<TrainingClip> clips;
  for (std::size_t i = 0; i < features.size(); ++i) {
    clips.push_back({&features[i], split.train[i].label});
  }

  fs::create_directories(c.output_dir);
  const std::string name(to_string(c.model.kind));
  TrainConfig tc = c.train;
  tc.checkpoint_path = checkpoint_for(c, c.model.kind);
  tc.best_checkpoint_path = c.output_dir / (name + ".best.aadm");

  Model model(c.model);
  model.features = c.features;
  const TrainLog log = train(model, clips, tc);
  write_train_log_csv(c.output_dir / (name + "_train_log.csv"), log);

  // Threshold from held-out normal clips; the training clips when none are held out.
  std::vector<std::size_t> calib = validation_indices(clips.size(), tc.validation_split, tc.seed);
  if (calib.empty()) {
    calib.resize(clips.size());
    for (std::size_t i = 0; i < calib.size(); ++i) calib[i] = i;
  }
  std::vector<double> scores;
  for (std::size_t i : calib) scores.push_back(clip_score(model, features[i]));
  const double tau = calibrate_threshold(model, scores, c.threshold.max_fpr);
  checkpoint_save(model, tc.checkpoint_path);

  ctx.out << name << ": " << log.epochs.size() << " epochs on " << log.train_clips
          << " clips, loss " << log.initial_loss << " -> "
          << (log.epochs.empty() ? log.initial_loss : log.epochs.back().train_loss)
          << ", threshold " << tau << " (max_fpr " << c.threshold.max_fpr << ")\n";
  ctx.out << "checkpoint " << tc.checkpoint_path.string() << '\n';
  return kExitOk;
}

int run_score(Context& ctx, const std::string& checkpoint, bool all_clips) {
  const RunConfig& c = ctx.config;
  const Model model = load_model(c, checkpoint);
  if (!model.threshold) fail(ErrorKind::kContract, "checkpoint has no calibrated threshold");
  const DatasetIndex index = scan_dataset(c.resolved_dataset_root());
  const std::vector<DatasetEntry> entries =
      all_clips ? index.entries : split_dataset(index, c.eval.test_normal_fraction).test;
  const LogMelExtractor extractor(model_features(model, c));
  const auto records = score_entries(model, entries, extractor, features_dir(c), index.root);

  fs::create_directories(c.output_dir);
  const fs::path path = c.output_dir / (std::string(to_string(model.spec().kind)) + "_scores.csv");
  write_score_csv(path, records, *model.threshold);
  std::size_t flagged = 0;
  for (const auto& r : records) flagged += decide(r.score, *model.threshold) == Decision::kAnomaly;
  ctx.out << "scored " << records.size() << " clips, " << flagged << " flagged, threshold "
          << *model.threshold << " -> " << path.string() << '\n';
  return kExitOk;
}

int run_eval(Context& ctx, const std::vector<std::string>& kinds,
             const std::vector<std::string>& checkpoints, const std::vector<std::string>& formats) {
  const RunConfig& c = ctx.config;
  std::vector<fs::path> paths;
  for (const auto& k : kinds) paths.push_back(checkpoint_for(c, parse_model_kind(k)));
  for (const auto& p : checkpoints) paths.emplace_back(p);
  if (paths.empty()) paths.push_back(checkpoint_for(c, c.model.kind));

  const DatasetIndex index = scan_dataset(c.resolved_dataset_root());
  EvalConfig ec = c.eval;
  ec.feature_cache_dir = features_dir(c);
  fs::create_directories(c.output_dir);

  std::vector<EvalReport> reports;
  for (const auto& path : paths) {
    const Model model = checkpoint_load(path);
    EvalReport report = evaluate_dataset(model, index, model_features(model, c), ec);
    const std::string stem = "report_" + report.model;
    for (const auto& f : formats) {
      if (f == "json") emit_report(report, ReportFormat::kJson, c.output_dir / (stem + ".json"));
      if (f == "csv") emit_report(report, ReportFormat::kCsv, c.output_dir / (stem + ".csv"));
      if (f == "md") emit_report(report, ReportFormat::kMarkdown, c.output_dir / (stem + ".md"));
    }
    reports.push_back(std::move(report));
  }
  const std::string table = report_markdown(reports);
  if (reports.size() > 1) {
    std::ofstream md(c.output_dir / "report.md", std::ios::binary);
    if (!md) fail(ErrorKind::kIo, "cannot write report.md");
    md << table;
  }
  ctx.out << table;
  return kExitOk;
}

int run_embed(Context& ctx, const std::string& checkpoint, const std::string& space,
              std::size_t max_points) {
  const RunConfig& c = ctx.config;
  const Model model = load_model(c, checkpoint);
  const DatasetIndex index = scan_dataset(c.resolved_dataset_root());
  std::vector<DatasetEntry> entries = index.entries;
  if (max_points > 0 && entries.size() > max_points) {
    // Evenly spaced subsample keeps the normal/anomaly mix.
    std::vector<DatasetEntry> picked;
    for (std::size_t i = 0; i < max_points; ++i) picked.push_back(entries[i * entries.size() / max_points]);
    entries = std::move(picked);
  }
  const LogMelExtractor extractor(model_features(model, c));
  const std::vector<FeatureMatrix> features = load_clip_features(c, entries, index.root, extractor);

  std::vector<Label> labels;
  for (const auto& e : entries) labels.push_back(e.label);
  const fs::path dir = c.output_dir / "embed";
  const std::string name(to_string(model.spec().kind));

  auto embed_space = [&](const std::string& which) {
    std::vector<std::vector<float>> rows;
    for (const auto& fm : features) {
      rows.push_back(which == "raw" ? raw_clip_vector(model, fm) : model.latent_code(fm));
    }
    Matrix x(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(rows[i].begin(), rows[i].end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * x.cols));
    }
    const Embedding e = tsne_embed(x, c.embed, labels);
    const auto files = emit_plot(e, dir / (name + "_" + which));
    ctx.out << which << ": " << x.rows << " points, " << x.cols << " dims, KL "
            << e.kl_history.front() << " -> " << e.final_kl << ", silhouette " << silhouette(e)
            << '\n';
    for (const auto& f : files) ctx.out << "  " << f.string() << '\n';
  };
  if (space == "raw" || space == "both") embed_space("raw");
  if (space == "latent" || space == "both") embed_space("latent");
  return kExitOk;
}

// Bounded single-producer single-consumer queue of sample chunks.
class ChunkQueue {
 public:
  explicit ChunkQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(std::vector<float> chunk) {
    std::unique_lock<std::mutex> lock(mutex_);
    not_full_.wait(lock, [&] { return queue_.size() < capacity_ || closed_; });
    if (closed_) return;
    queue_.push_back(std::move(chunk));
    not_empty_.notify_one();
  }

  std::optional<std::vector<float>> pop() {
    std::unique_lock<std::mutex> lock(mutex_);
    not_empty_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    std::vector<float> chunk = std::move(queue_.front());
    queue_.pop_front();
    not_full_.notify_one();
    return chunk;
  }

  void close() {
    std::lock_guard<std::mutex> lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<std::vector<float>> queue_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
};

int run_stream(Context& ctx, const std::string& checkpoint, const std::string& input) {
  const RunConfig& c = ctx.config;
  const Model model = load_model(c, checkpoint);
  StreamScorer scorer(model, model_features(model, c), c.stream.window_s, c.stream.hop_s);

  std::ifstream file;
  std::istream* source = &ctx.in;
  if (input != "-") {
    file.open(input, std::ios::binary);
    if (!file) fail(ErrorKind::kIo, "cannot open " + input);
    source = &file;
  }

  ChunkQueue queue(c.stream.queue_chunks);
  std::exception_ptr reader_error;
  std::thread reader([&] {
    try {
      std::vector<char> bytes(c.stream.chunk_samples * 4);
      while (*source) {
        source->read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        const auto got = static_cast<std::size_t>(source->gcount()) / 4;
        if (got == 0) break;
        std::vector<float> chunk(got);
        for (std::size_t i = 0; i < got; ++i) {
          std::uint32_t bits = 0;
          for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
          }
          chunk[i] = std::bit_cast<float>(bits);
        }
        queue.push(std::move(chunk));
      }
    } catch (...) {
      reader_error = std::current_exception();
    }
    queue.close();
  });

  std::size_t windows = 0;
  try {
    ctx.out << std::fixed;
    while (auto chunk = queue.pop()) {
      for (const auto& r : scorer.push(*chunk)) {
        ctx.out << std::setprecision(3) << r.timestamp_s << ", " << std::setprecision(9) << r.score
                << ", " << to_string(r.decision) << '\n';
        ++windows;
      }
    }
  } catch (...) {
    queue.close();
    reader.join();
    throw;
  }
  reader.join();
  if (reader_error) std::rethrow_exception(reader_error);
  ctx.out.flush();
  ctx.err << "windows=" << windows << " audio_s=" << scorer.audio_seconds()
          << " processing_s=" << scorer.processing_seconds()
          << " rtf=" << scorer.real_time_factor() << '\n';
  return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             std::istream& in) {
  CLI::App app{"Acoustic anomaly detection pipeline", "aad"};
  app.require_subcommand(1);
  app.fallthrough();

  FlagPatch flags;
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (default: $AAD_CONFIG)");
  flags.add<std::string>(&app, "--output-dir,-o", "/output_dir", "Output directory");
  flags.add<std::string>(&app, "--dataset", "/dataset_root", "Dataset root");
  flags.add<std::uint64_t>(&app, "--seed", "/seed", "Master seed");
  flags.add<int>(&app, "--workers", "/workers", "Worker threads for feature extraction");

  auto feature_flags = [&](CLI::App* sub) {
    flags.add<int>(sub, "--feature-rate", "/features/sample_rate", "Feature sample rate (Hz)");
    flags.add<int>(sub, "--n-fft", "/features/n_fft", "FFT size");
    flags.add<int>(sub, "--hop", "/features/hop", "STFT hop (samples)");
    flags.add<int>(sub, "--n-mels", "/features/n_mels", "Mel bands");
    flags.add<int>(sub, "--context-frames", "/features/context_frames", "Stacked context frames");
  };

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic machine-sound dataset");
  flags.add<int>(synth, "--n-normal", "/synth/n_normal", "Normal clips");
  flags.add<int>(synth, "--n-anomaly", "/synth/n_anomaly", "Anomalous clips");
  flags.add<int>(synth, "--n-ids", "/synth/n_ids", "Machine ids");
  flags.add<double>(synth, "--duration-s", "/synth/duration_s", "Clip length (s)");
  flags.add<int>(synth, "--sample-rate", "/synth/sample_rate", "Clip sample rate (Hz)");
  flags.add<std::string>(synth, "--encoding", "/synth/encoding", "pcm16 or float32")
      ->check(CLI::IsMember({"pcm16", "float32"}));

  CLI::App* features = app.add_subcommand("features", "Cache log-mel features (AADF)");
  feature_flags(features);

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model on normal clips");
  feature_flags(train_cmd);
  flags.add<std::string>(train_cmd, "--model", "/model/kind", "dense_ae, cae, cvae or tcn_cvae");
  flags.add<int>(train_cmd, "--epochs", "/train/epochs", "Epochs");
  flags.add<std::size_t>(train_cmd, "--batch-size", "/train/batch_size", "Batch size");
  flags.add<double>(train_cmd, "--lr", "/train/lr", "Adam learning rate");
  flags.add<double>(train_cmd, "--validation-split", "/train/validation_split", "Held-out fraction");
  flags.add<std::string>(train_cmd, "--loss", "/train/loss", "auto, mse or vae")
      ->check(CLI::IsMember({"auto", "mse", "vae"}));
  flags.add<double>(train_cmd, "--max-fpr", "/threshold/max_fpr", "Threshold false-positive budget");
  flags.add<int>(train_cmd, "--latent-dim", "/model/latent_dim", "Latent size");
  flags.add<int>(train_cmd, "--tcn-channels", "/model/tcn_channels", "TCN channels");
  flags.add<int>(train_cmd, "--tcn-layers", "/model/tcn_layers", "TCN layers");

  std::string checkpoint;
  CLI::App* score = app.add_subcommand("score", "Score clips and write the score CSV");
  flags.add<std::string>(score, "--model", "/model/kind", "Model kind (selects the checkpoint)");
  score->add_option("--checkpoint", checkpoint, "Checkpoint path");
  bool all_clips = false;
  score->add_flag("--all", all_clips, "Score every clip, not only the test split");

  CLI::App* eval = app.add_subcommand("eval", "AUC / pAUC report");
  std::vector<std::string> eval_models, eval_checkpoints;
  std::vector<std::string> formats{"json"};
  eval->add_option("--model", eval_models, "Model kinds to evaluate (repeatable)")
      ->check(CLI::IsMember({"dense_ae", "cae", "cvae", "tcn_cvae"}));
  eval->add_option("--checkpoint", eval_checkpoints, "Checkpoint paths (repeatable)");
  eval->add_option("--format", formats, "json, csv and/or md")
      ->check(CLI::IsMember({"json", "csv", "md"}));
  flags.add<double>(eval, "--p", "/eval/p", "pAUC false-positive bound");
  flags.add_flag(eval, "--pauc-ceil", "/eval/pauc_ceil", "Round the pAUC normal count up");

  CLI::App* embed = app.add_subcommand("embed", "t-SNE of raw features and latent codes");
  flags.add<std::string>(embed, "--model", "/model/kind", "Model kind (selects the checkpoint)");
  embed->add_option("--checkpoint", checkpoint, "Checkpoint path");
  std::string space = "both";
  embed->add_option("--space", space, "raw, latent or both")
      ->check(CLI::IsMember({"raw", "latent", "both"}));
  std::size_t max_points = 0;
  embed->add_option("--max-points", max_points, "Cap on embedded clips (0: every clip)");
  flags.add<int>(embed, "--dims", "/embed/output_dims", "Output dimensions (1-3)");
  flags.add<double>(embed, "--perplexity", "/embed/perplexity", "Perplexity");
  flags.add<int>(embed, "--iterations", "/embed/iterations", "Gradient iterations");

  CLI::App* stream = app.add_subcommand("stream", "Score raw f32 LE mono samples in sliding windows");
  flags.add<std::string>(stream, "--model", "/model/kind", "Model kind (selects the checkpoint)");
  stream->add_option("--checkpoint", checkpoint, "Checkpoint path");
  std::string input = "-";
  stream->add_option("--input", input, "Sample file, '-' for standard input");
  flags.add<double>(stream, "--window-s", "/stream/window_s", "Window length (s)");
  flags.add<double>(stream, "--hop-s", "/stream/hop_s", "Window hop (s)");

  std::vector<std::string> argv_store{"aad"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (config_path.empty()) {
      if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') {
        config_path = env;
      }
    }
    const json file = config_path.empty() ? json::object() : read_json_file(config_path);
    Context ctx{resolve_config(file, flags.patch()), out, err, in};

    if (synth->parsed()) return run_synth(ctx);
    if (features->parsed()) return run_features(ctx);
    if (train_cmd->parsed()) return run_train(ctx);
    if (score->parsed()) return run_score(ctx, checkpoint, all_clips);
    if (eval->parsed()) return run_eval(ctx, eval_models, eval_checkpoints, formats);
    if (embed->parsed()) return run_embed(ctx, checkpoint, space, max_points);
    if (stream->parsed()) return run_stream(ctx, checkpoint, input);
  } catch (const Error& e) {
    err << "aad: " << e.what() << '\n';
    return kExitPipelineError;
  } catch (const std::exception& e) {
    err << "aad: " << e.what() << '\n';
    return kExitPipelineError;
  }
  return kExitUsage;
}

}  // namespace aad::cli
