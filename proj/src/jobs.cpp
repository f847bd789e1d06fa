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

#include "voxage/jobs.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "voxage/error.hpp"

namespace voxage {

namespace fs = std::filesystem;

namespace {

void say(const ProgressFn& progress, const std::string& line) {
  if (progress) progress(line);
}

void write_text(const std::string& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Leading segments of one clip, as mel spectrograms.
std::vector<MelSpectrogram> clip_mels(const std::string& path, int limit) {
  const AudioClip clip = resample(read_wav_file(path), kSampleRate);
  std::vector<MelSpectrogram> out;
  for (const AudioClip& seg : segment(clip)) {
    if (static_cast<int>(out.size()) >= limit) break;
    out.push_back(mel_spectrogram(seg));
  }
  return out;
}

std::vector<std::vector<float>> audio_matrix(const Dataset& d) {
  std::vector<std::vector<float>> x;
  x.reserve(d.size());
  for (const Sample& s : d.samples) {
    if (s.audio.empty()) fail(ErrorCode::kValidation, "baselines need audio features");
    x.push_back(s.audio);
  }
  return x;
}

std::vector<int> label_vector(const Dataset& d) {
  std::vector<int> y;
  for (const Sample& s : d.samples) y.push_back(s.label);
  return y;
}

}  // namespace

// ---------------------------------------------------------------------------
// ingest / stats

IngestResult run_ingest(const IngestOptions& options, const ProgressFn& progress) {
  if (options.out.empty()) fail(ErrorCode::kValidation, "ingest needs an output path");
  if (options.corpus_root.empty() == options.common_voice.empty()) {
    fail(ErrorCode::kValidation, "give exactly one of a corpus root or a Common Voice TSV");
  }
  IngestResult result;
  std::vector<ManifestEntry> entries;
  if (!options.corpus_root.empty()) {
    const Corpus corpus = scan_corpus(options.corpus_root);
    ManifestBuild built =
        build_manifest(corpus.speakers, corpus.videos, options.cap_per_speaker);
    entries = std::move(built.entries);
    result.videos_retained = built.videos_retained;
    result.warnings = corpus.warnings;
    result.warnings.insert(result.warnings.end(), built.warnings.begin(),
                           built.warnings.end());
  } else {
    const auto bytes = read_file(options.common_voice);
    const CommonVoiceTable table = parse_common_voice(std::string(bytes.begin(), bytes.end()));
    for (const RowError& e : table.errors) {
      result.warnings.push_back("line " + std::to_string(e.line) + ": " + e.message);
    }
    for (const CommonVoiceRow& row : table.rows) {
      if (!row.labeled()) continue;
      ManifestEntry e;
      e.audio_path = options.clips_dir.empty()
                         ? row.clip_path
                         : (fs::path(options.clips_dir) / row.clip_path).string();
      e.age = *row.age;
      // The validated TSV carries no stable speaker column we rely on; each
      // clip stands in for its own speaker.
      e.speaker_id = fs::path(row.clip_path).stem().string();
      e.gender = row.gender;
      entries.push_back(std::move(e));
    }
  }
  for (const std::string& w : result.warnings) say(progress, "warning: " + w);

  if (options.test_size > 0) {
    SplitOptions split;
    split.test_size = options.test_size;
    split.seed = options.seed;
    split.speaker_disjoint = options.speaker_disjoint;
    if (!options.stratify.empty()) split.stratify = parse_scheme(options.stratify);
    split_holdout(entries, split);
  }
  for (const ManifestEntry& e : entries) result.test_entries += e.split == Split::kTest;
  write_manifest(options.out, entries);
  result.entries = entries.size();
  say(progress, "wrote " + std::to_string(entries.size()) + " entries to " + options.out);
  return result;
}

StatsResult run_stats(const std::string& manifest, const std::string& csv_out) {
  StatsResult r;
  r.stats = dataset_stats(read_manifest(manifest));
  r.csv = r.stats.to_csv();
  r.summary = r.stats.summary();
  if (!csv_out.empty()) write_text(csv_out, r.csv);
  return r;
}

// ---------------------------------------------------------------------------
// Datasets

DataSplit load_data(const DataOptions& options, Modality modality) {
  DataSplit out;
  const bool audio = modality != Modality::kVisual;
  const bool visual = modality != Modality::kAudio;
  if (options.task == "band" || options.task == "fusion") {
    if (options.train_count < 2 || options.test_count < 1) {
      fail(ErrorCode::kValidation, "synthetic tasks need at least 2 train and 1 test samples");
    }
    const bool fusion = options.task == "fusion";
    if (!fusion && visual) {
      fail(ErrorCode::kValidation, "the band task has no visual input");
    }
    const auto make = fusion ? make_fusion_task : make_band_task;
    out.train = make(options.train_count, options.data_seed);
    out.test = make(options.test_count, options.data_seed + 1);
    for (Dataset* d : {&out.train, &out.test}) {
      for (Sample& s : d->samples) {
        if (!audio) s.audio.clear();
        if (!visual) s.visual.clear();
      }
    }
    // Synthetic labels are binary; reuse the A/B scheme so checkpoints load
    // anywhere a real A/B classifier would.
    out.scheme = scheme_name(AgeScheme::kAb);
    out.labels = scheme_labels(AgeScheme::kAb);
    return out;
  }
  if (options.task != "manifest") {
    fail(ErrorCode::kValidation,
         "unknown task '" + options.task + "' (expected band, fusion or manifest)");
  }

  const AgeScheme scheme = parse_scheme(options.scheme);
  out.scheme = options.scheme;
  out.labels = scheme_labels(scheme);
  out.train.num_classes = out.test.num_classes = scheme_classes(scheme);
  for (const ManifestEntry& e : read_manifest(options.manifest)) {
    if (e.split == Split::kUnassigned) {
      fail(ErrorCode::kValidation,
           "manifest has unassigned entries; ingest with a test size first");
    }
    const auto bin = age_to_bin(e.age, scheme);
    if (!bin) continue;
    Dataset& d = e.split == Split::kTest ? out.test : out.train;
    std::vector<float> face;
    if (visual) {
      if (e.face_path.empty()) {
        fail(ErrorCode::kValidation, "entry " + e.audio_path + " has no face crop");
      }
      const auto bytes = read_file(e.face_path);
      face = visual_features(decode_image(bytes));
    }
    if (!audio) {
      d.samples.push_back({{}, std::move(face), *bin, e.speaker_id});
      continue;
    }
    for (const MelSpectrogram& mel : clip_mels(e.audio_path, options.segments_per_entry)) {
      d.samples.push_back({audio_features(mel), face, *bin, e.speaker_id});
    }
  }
  if (out.train.samples.empty() || out.test.samples.empty()) {
    fail(ErrorCode::kValidation, "manifest yields an empty train or test set");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classifiers

TrainVannResult run_train_vann(const TrainVannOptions& options,
                               const ProgressFn& progress) {
  VannConfig cfg = options.config;
  DataSplit data = load_data(options.data, cfg.modality);
  cfg.num_classes = data.train.num_classes;
  auto model = build_vann(cfg);
  ClassifierTrainer trainer(*model, data.train, data.test);
  trainer.run(cfg.epochs, [&](const EpochRecord& r) {
    say(progress, "epoch " + std::to_string(r.epoch) + " loss " + fixed(r.train_loss) +
                      " acc " + fixed(r.test_acc));
  });
  TrainVannResult result;
  result.log = trainer.log();
  result.final_accuracy = result.log.empty() ? 0.0 : result.log.back().test_acc;
  if (!options.out.empty()) save_vann(options.out, *model, data.scheme);
  if (!options.log.empty()) write_text(options.log, format_training_log(result.log));
  return result;
}

EvalResult run_evaluate(const EvaluateOptions& options) {
  EvalResult result;
  if (options.method == "vann") {
    if (options.model.empty()) fail(ErrorCode::kValidation, "vann evaluation needs --model");
    LoadedVann loaded = load_vann(options.model);
    const DataSplit data = load_data(options.data, loaded.model->config().modality);
    if (data.test.num_classes != loaded.model->config().num_classes) {
      fail(ErrorCode::kDimension, "model and data disagree on the number of classes");
    }
    result = evaluate(*loaded.model, data.test, data.labels);
  } else if (options.method == "knn" || options.method == "svm") {
    const DataSplit data = load_data(options.data, Modality::kAudio);
    const auto x_test = audio_matrix(data.test);
    std::vector<int> predicted;
    if (options.method == "knn") {
      KnnClassifier knn(options.knn_k);
      knn.fit(audio_matrix(data.train), label_vector(data.train));
      for (const auto& x : x_test) predicted.push_back(knn.predict(x));
    } else {
      const LinearSvm svm = LinearSvm::train(audio_matrix(data.train),
                                             label_vector(data.train),
                                             data.train.num_classes, options.svm);
      for (const auto& x : x_test) predicted.push_back(svm.predict(x));
    }
    result = evaluate_predictions(label_vector(data.test), predicted,
                                  data.test.num_classes, data.labels);
  } else {
    fail(ErrorCode::kValidation,
         "unknown method '" + options.method + "' (expected vann, knn or svm)");
  }
  if (!options.confusion_csv.empty()) {
    write_text(options.confusion_csv, result.confusion.to_csv());
  }
  return result;
}

// ---------------------------------------------------------------------------
// CycleGAN

CycleGanConfig toy_cyclegan_config() {
  CycleGanConfig cfg;
  cfg.gen_channels = 4;
  cfg.res_blocks = 4;
  cfg.disc_channels = 4;
  cfg.batch_size = 1;
  return cfg;
}

std::vector<LossEntry> run_train_cyclegan(const TrainCycleGanOptions& options,
                                          const ProgressFn& progress) {
  options.config.validate();
  DomainPair domains;
  if (options.toy) {
    domains = make_toy_domains(options.toy_count, options.config.seed);
  } else {
    if (options.manifest.empty()) {
      fail(ErrorCode::kValidation, "give --toy or a manifest of A/B speakers");
    }
    const ScaleConfig scale;
    for (const ManifestEntry& e : read_manifest(options.manifest)) {
      const auto bin = age_to_bin(e.age, AgeScheme::kAb);
      if (!bin) continue;
      auto& dest = *bin == 0 ? domains.domain_a : domains.domain_b;
      for (const MelSpectrogram& mel : clip_mels(e.audio_path, options.segments_per_entry)) {
        dest.push_back(encode_spectrogram(mel, scale));
      }
    }
  }
  say(progress, "domains: " + std::to_string(domains.domain_a.size()) + " A, " +
                    std::to_string(domains.domain_b.size()) + " B");

  CycleGan model(options.config);
  CycleGanTrainer trainer(model, domains);
  if (!options.snapshot_dir.empty()) fs::create_directories(options.snapshot_dir);
  const auto report = trainer.run(
      options.config.epochs, options.snapshot_dir, [&](const LossEntry& e) {
        say(progress, "epoch " + std::to_string(e.epoch) + " d_a " + fixed(e.d_a) +
                          " d_b " + fixed(e.d_b) + " g " + fixed(e.g) + " f " +
                          fixed(e.f) + " cycle " + fixed(e.cycle()));
      });
  if (!options.out.empty()) save_cyclegan(options.out, model);
  if (!options.log.empty()) write_text(options.log, format_loss_report(report));
  return report;
}

std::size_t run_transform(const TransformOptions& options) {
  if (options.model.empty() || options.in.empty() || options.out.empty()) {
    fail(ErrorCode::kValidation, "transform needs a model, an input and an output");
  }
  const auto model = load_cyclegan(options.model);
  const AudioClip clip = read_wav_file(options.in);
  const TransformResult r =
      transform_audio_detailed(*model, clip, parse_direction(options.direction),
                               options.griffin_lim_iterations);
  write_wav_file(r.audio, options.out);
  if (!options.spectrogram_dir.empty()) {
    fs::create_directories(options.spectrogram_dir);
    for (std::size_t i = 0; i < r.output_images.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%03zu", i);
      const fs::path dir(options.spectrogram_dir);
      const auto in_png = save_png(r.input_images[i]);
      const auto out_png = save_png(r.output_images[i]);
      write_file((dir / (std::string("in_") + name + ".png")).string(), in_png);
      write_file((dir / (std::string("out_") + name + ".png")).string(), out_png);
    }
  }
  return r.audio.size();
}

}  // namespace voxage
