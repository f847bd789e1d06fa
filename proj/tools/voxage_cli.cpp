// Copyright 2026 The Voxage Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// voxage command line. Every subcommand builds an options object from its
// flags and hands it to the C API.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "voxage/voxage.h"

namespace {

using nlohmann::json;

constexpr int kUsageExit = 2;

struct Failure {
  voxage_status status;
  std::string message;
};

void check(voxage_status s) {
  if (s != VOXAGE_OK) throw Failure{s, voxage_last_error()};
}

void print_progress(const char* line, void*) {
  std::fprintf(stderr, "%s\n", line);
}

json take_json(char* text) {
  json j = json::parse(text);
  voxage_free(text);
  return j;
}

// Adds `flag` to `target[key]` only when it was given, so library defaults
// (and presets) apply otherwise.
struct Optional {
  CLI::Option* option;
  std::function<void(json&)> write;
};

template <class T>
Optional optional_flag(CLI::App* app, const std::string& name, T& storage,
                       const std::string& key, const std::string& help) {
  CLI::Option* opt = app->add_option(name, storage, help);
  return {opt, [opt, &storage, key](json& target) {
            if (opt->count()) target[key] = storage;
          }};
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Flags shared by train-vann and evaluate.
struct DataFlags {
  std::string task = "band";
  std::string manifest;
  std::string scheme = "ab";
  int train_count = 160;
  int test_count = 80;
  std::uint64_t data_seed = 11;
  int segments_per_entry = 4;

  void add(CLI::App* app) {
    app->add_option("--task", task, "band, fusion or manifest")
        ->check(CLI::IsMember({"band", "fusion", "manifest"}))
        ->capture_default_str();
    app->add_option("--manifest", manifest, "manifest with train/test splits");
    app->add_option("--scheme", scheme, "age bins: decade10, quarter25 or ab")
        ->check(CLI::IsMember({"decade10", "quarter25", "ab"}))
        ->capture_default_str();
    app->add_option("--train-count", train_count, "synthetic training samples")
        ->capture_default_str();
    app->add_option("--test-count", test_count, "synthetic test samples")
        ->capture_default_str();
    app->add_option("--data-seed", data_seed, "synthetic data seed")->capture_default_str();
    app->add_option("--segments-per-entry", segments_per_entry,
                    "0.24 s segments taken from each manifest clip")
        ->capture_default_str();
  }

  json to_json() const {
    json j = {{"task", task},
              {"scheme", scheme},
              {"train_count", train_count},
              {"test_count", test_count},
              {"data_seed", data_seed},
              {"segments_per_entry", segments_per_entry}};
    if (!manifest.empty()) j["manifest"] = manifest;
    if (task == "manifest" && manifest.empty()) {
      throw CLI::ValidationError("--manifest", "required with --task manifest");
    }
    return j;
  }
};

volatile std::sig_atomic_t g_signal = 0;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voice aging toolkit: ingestion, training, evaluation, transform, serving",
               "voxage"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(voxage_version()));

  // ---- ingest
  auto* ingest = app.add_subcommand("ingest", "Build a manifest from a corpus tree");
  std::string corpus, common_voice, clips_dir, manifest_out, stratify;
  int cap = 15, test_size = 0;
  std::uint64_t split_seed = 1;
  bool speaker_disjoint = false;
  auto* corpus_opt = ingest->add_option("--corpus", corpus, "speaker/video directory tree");
  auto* cv_opt = ingest->add_option("--common-voice", common_voice, "Common Voice TSV");
  corpus_opt->excludes(cv_opt);
  ingest->add_option("--clips-dir", clips_dir, "directory prefixed to Common Voice clips");
  ingest->add_option("--out", manifest_out, "manifest path")->required();
  ingest->add_option("--cap", cap, "videos kept per speaker")->capture_default_str();
  ingest->add_option("--test-size", test_size, "entries held out for test (0: none)")
      ->capture_default_str();
  ingest->add_option("--seed", split_seed, "split seed")->capture_default_str();
  ingest->add_option("--stratify", stratify, "stratify the split by this age scheme")
      ->check(CLI::IsMember({"decade10", "quarter25", "ab"}));
  ingest->add_flag("--speaker-disjoint", speaker_disjoint,
                   "hold out whole speakers");

  // ---- stats
  auto* stats = app.add_subcommand("stats", "Summarize a manifest");
  std::string stats_manifest, stats_csv;
  stats->add_option("--manifest", stats_manifest, "manifest path")->required();
  stats->add_option("--csv", stats_csv, "write the CSV report here");

  // ---- train-vann
  auto* train_vann = app.add_subcommand("train-vann", "Train an age classifier");
  DataFlags vann_data;
  vann_data.add(train_vann);
  std::string modality = "audio", vann_out, vann_log;
  int filters = 16, kernel = 5, stride = 2, dense = 128, fusion = 128, mfb_factors = 4,
      mfb_output = 128, vann_epochs = 40, vann_batch = 32;
  double vann_lr = 1e-3, leaky = 0.2;
  std::uint64_t vann_seed = 1;
  train_vann->add_option("--modality", modality, "audio, visual, av-cat or av-mfb")
      ->check(CLI::IsMember({"audio", "visual", "av-cat", "av-mfb"}))
      ->capture_default_str();
  train_vann->add_option("--filters", filters, "conv filters")->capture_default_str();
  train_vann->add_option("--kernel", kernel, "conv kernel")->capture_default_str();
  train_vann->add_option("--stride", stride, "conv stride")->capture_default_str();
  train_vann->add_option("--dense", dense, "branch feature width")->capture_default_str();
  train_vann->add_option("--fusion", fusion, "av-cat hidden width")->capture_default_str();
  train_vann->add_option("--mfb-factors", mfb_factors, "MFB factors k")->capture_default_str();
  train_vann->add_option("--mfb-output", mfb_output, "MFB output o")->capture_default_str();
  train_vann->add_option("--leaky", leaky, "leaky ReLU slope")->capture_default_str();
  train_vann->add_option("--epochs", vann_epochs, "epochs")->capture_default_str();
  train_vann->add_option("--batch-size", vann_batch, "minibatch size")->capture_default_str();
  train_vann->add_option("--lr", vann_lr, "Adam learning rate")->capture_default_str();
  train_vann->add_option("--seed", vann_seed, "init and shuffle seed")->capture_default_str();
  train_vann->add_option("--out", vann_out, "checkpoint path");
  train_vann->add_option("--log", vann_log, "training log path");

  // ---- evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a classifier or baseline");
  DataFlags eval_data;
  eval_data.add(evaluate);
  std::string method = "vann", eval_model, confusion = "confusion.csv";
  int knn_k = 5, svm_epochs = 20;
  double svm_c = 1.0;
  std::uint64_t svm_seed = 1;
  evaluate->add_option("--method", method, "vann, knn or svm")
      ->check(CLI::IsMember({"vann", "knn", "svm"}))
      ->capture_default_str();
  evaluate->add_option("--model", eval_model, "vann checkpoint");
  evaluate->add_option("--k", knn_k, "kNN neighbours")->capture_default_str();
  evaluate->add_option("--svm-c", svm_c, "SVM C")->capture_default_str();
  evaluate->add_option("--svm-epochs", svm_epochs, "SVM epochs")->capture_default_str();
  evaluate->add_option("--svm-seed", svm_seed, "SVM shuffle seed")->capture_default_str();
  evaluate->add_option("--confusion", confusion, "confusion matrix CSV path")
      ->capture_default_str();

  // ---- train-cyclegan
  auto* train_gan = app.add_subcommand("train-cyclegan", "Train the voice transform");
  bool toy = false;
  int toy_count = 32, gan_segments = 4;
  std::string gan_manifest, gan_out, gan_log, snapshot_dir;
  int gen_channels = 0, down_blocks = 0, res_blocks = 0, disc_channels = 0, gan_epochs = 0,
      gan_batch = 0;
  double lambda_cycle = 0, gan_lr = 0, beta1 = 0;
  std::uint64_t gan_seed = 0;
  std::vector<int> snapshot_epochs;
  train_gan->add_flag("--toy", toy, "train on the toy pitched-band domains");
  train_gan->add_option("--toy-count", toy_count, "images per toy domain")
      ->capture_default_str();
  train_gan->add_option("--manifest", gan_manifest, "manifest whose A/B entries form the domains");
  train_gan->add_option("--segments-per-entry", gan_segments, "segments per manifest clip")
      ->capture_default_str();
  train_gan->add_option("--out", gan_out, "checkpoint path");
  train_gan->add_option("--log", gan_log, "loss report path");
  train_gan->add_option("--snapshot-dir", snapshot_dir, "directory for sample PNGs");
  std::vector<Optional> gan_config = {
      optional_flag(train_gan, "--gen-channels", gen_channels, "gen_channels",
                    "generator width (default 32; toy 4)"),
      optional_flag(train_gan, "--down-blocks", down_blocks, "down_blocks",
                    "downsampling blocks (default 2)"),
      optional_flag(train_gan, "--res-blocks", res_blocks, "res_blocks",
                    "residual blocks (default 4)"),
      optional_flag(train_gan, "--disc-channels", disc_channels, "disc_channels",
                    "discriminator width (default 64; toy 4)"),
      optional_flag(train_gan, "--lambda-cycle", lambda_cycle, "lambda_cycle",
                    "cycle loss weight (default 10)"),
      optional_flag(train_gan, "--lr", gan_lr, "learning_rate",
                    "Adam learning rate (default 2e-4)"),
      optional_flag(train_gan, "--beta1", beta1, "beta1", "Adam beta1 (default 0.5)"),
      optional_flag(train_gan, "--epochs", gan_epochs, "epochs", "epochs (default 50)"),
      optional_flag(train_gan, "--batch-size", gan_batch, "batch_size",
                    "minibatch size (default 1)"),
      optional_flag(train_gan, "--seed", gan_seed, "seed", "seed (default 1)"),
      optional_flag(train_gan, "--snapshot-epochs", snapshot_epochs, "snapshot_epochs",
                    "epochs that write snapshots (default 1 41)"),
  };

  // ---- transform
  auto* transform = app.add_subcommand("transform", "Age or de-age a WAV file");
  std::string in_wav, out_wav, direction = "older", gan_model, spectrogram_dir;
  int gl_iters = 32;
  transform->add_option("--in", in_wav, "input WAV")->required();
  transform->add_option("--out", out_wav, "output WAV")->required();
  transform->add_option("--model", gan_model, "CycleGAN checkpoint")->required();
  transform->add_option("--direction", direction, "older or younger")
      ->check(CLI::IsMember({"older", "younger"}))
      ->capture_default_str();
  transform->add_option("--gl-iters", gl_iters, "Griffin-Lim iterations")
      ->capture_default_str();
  transform->add_option("--spectrogram-dir", spectrogram_dir,
                        "write input/output spectrogram PNGs here");

  // ---- serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::string host = "127.0.0.1", checkpoint_dir;
  int port = 8080, serve_gl_iters = 32;
  std::size_t max_upload = 2 * 1024 * 1024;
  double max_seconds = 30.0;
  serve->add_option("--host", host, "bind address")->capture_default_str();
  serve->add_option("--port", port, "port (0: any free port)")->capture_default_str();
  serve->add_option("--checkpoint-dir", checkpoint_dir,
                    "checkpoint directory (default: $VOXAGE_CHECKPOINT_DIR)");
  serve->add_option("--max-upload-bytes", max_upload, "upload limit")->capture_default_str();
  serve->add_option("--max-seconds", max_seconds, "clip length limit")->capture_default_str();
  serve->add_option("--gl-iters", serve_gl_iters, "Griffin-Lim iterations")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageExit;
  }

  try {
    char* result = nullptr;
    if (*ingest) {
      json o = {{"out", manifest_out},
                {"cap_per_speaker", cap},
                {"test_size", test_size},
                {"seed", split_seed},
                {"speaker_disjoint", speaker_disjoint}};
      if (!corpus.empty()) o["corpus_root"] = corpus;
      if (!common_voice.empty()) o["common_voice"] = common_voice;
      if (!clips_dir.empty()) o["clips_dir"] = clips_dir;
      if (!stratify.empty()) o["stratify"] = stratify;
      check(voxage_ingest(o.dump().c_str(), print_progress, nullptr, &result));
      const json r = take_json(result);
      std::cout << "entries " << r["entries"] << "\nvideos " << r["videos_retained"]
                << "\ntest " << r["test_entries"] << "\nwarnings "
                << r["warnings"].size() << "\n";
    } else if (*stats) {
      json o = {{"manifest", stats_manifest}};
      if (!stats_csv.empty()) o["csv"] = stats_csv;
      check(voxage_stats(o.dump().c_str(), &result));
      std::cout << take_json(result)["summary"].get<std::string>();
    } else if (*train_vann) {
      json o = {{"data", vann_data.to_json()},
                {"config",
                 {{"modality", modality},
                  {"conv_filters", filters},
                  {"conv_kernel", kernel},
                  {"conv_stride", stride},
                  {"dense_width", dense},
                  {"fusion_width", fusion},
                  {"mfb_factors", mfb_factors},
                  {"mfb_output", mfb_output},
                  {"leaky_alpha", leaky},
                  {"epochs", vann_epochs},
                  {"batch_size", vann_batch},
                  {"learning_rate", vann_lr},
                  {"seed", vann_seed}}}};
      if (!vann_out.empty()) o["out"] = vann_out;
      if (!vann_log.empty()) o["log"] = vann_log;
      check(voxage_train_vann(o.dump().c_str(), print_progress, nullptr, &result));
      std::cout << "accuracy " << fixed(take_json(result)["final_accuracy"]) << "\n";
    } else if (*evaluate) {
      json o = {{"data", eval_data.to_json()},
                {"method", method},
                {"knn_k", knn_k},
                {"svm", {{"c", svm_c}, {"epochs", svm_epochs}, {"seed", svm_seed}}},
                {"confusion_csv", confusion}};
      if (!eval_model.empty()) o["model"] = eval_model;
      check(voxage_evaluate(o.dump().c_str(), &result));
      const json r = take_json(result);
      std::cout << "accuracy " << fixed(r["accuracy"]) << "\n";
      for (std::size_t i = 0; i < r["labels"].size(); ++i) {
        std::cout << "class " << r["labels"][i].get<std::string>() << " "
                  << fixed(r["per_class_accuracy"][i]) << "\n";
      }
      if (!confusion.empty()) std::cout << "confusion " << confusion << "\n";
    } else if (*train_gan) {
      json config = json::object();
      for (const Optional& f : gan_config) f.write(config);
      json o = {{"toy", toy},
                {"toy_count", toy_count},
                {"segments_per_entry", gan_segments},
                {"config", config}};
      if (!gan_manifest.empty()) o["manifest"] = gan_manifest;
      if (!gan_out.empty()) o["out"] = gan_out;
      if (!gan_log.empty()) o["log"] = gan_log;
      if (!snapshot_dir.empty()) o["snapshot_dir"] = snapshot_dir;
      check(voxage_train_cyclegan(o.dump().c_str(), print_progress, nullptr, &result));
      std::cout << take_json(result)["tsv"].get<std::string>();
    } else if (*transform) {
      json o = {{"model", gan_model},
                {"in", in_wav},
                {"out", out_wav},
                {"direction", direction},
                {"griffin_lim_iterations", gl_iters}};
      if (!spectrogram_dir.empty()) o["spectrogram_dir"] = spectrogram_dir;
      check(voxage_transform_file(o.dump().c_str(), &result));
      const json r = take_json(result);
      std::cout << "wrote " << out_wav << " (" << r["samples"] << " samples)\n";
    } else if (*serve) {
      const json o = {{"max_upload_bytes", max_upload},
                      {"max_seconds", max_seconds},
                      {"griffin_lim_iterations", serve_gl_iters}};
      voxage_service* service = nullptr;
      check(voxage_service_create(checkpoint_dir.empty() ? nullptr : checkpoint_dir.c_str(),
                                  o.dump().c_str(), &service));
      int bound = 0;
      const voxage_status bind_status = voxage_service_bind(service, host.c_str(), port, &bound);
      if (bind_status != VOXAGE_OK) {
        const Failure f{bind_status, voxage_last_error()};
        voxage_service_free(service);
        throw f;
      }
      std::signal(SIGINT, [](int s) { g_signal = s; });
      std::signal(SIGTERM, [](int s) { g_signal = s; });
      check(voxage_service_start(service));
      std::cout << "listening on http://" << host << ":" << bound << std::endl;
      while (!g_signal) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      voxage_service_stop(service);
      voxage_service_free(service);
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << voxage_status_name(f.status) << "): " << f.message << "\n";
    return 1;
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kUsageExit;
  }
  return 0;
}
