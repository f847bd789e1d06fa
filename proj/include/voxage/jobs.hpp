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

// End-to-end jobs behind the command line: each one reads files, runs a
// module operation and writes its artifacts.

#ifndef VOXAGE_JOBS_HPP_
#define VOXAGE_JOBS_HPP_

#include <functional>
#include <string>
#include <vector>

#include "voxage/cyclegan.hpp"
#include "voxage/ingest.hpp"
#include "voxage/models.hpp"

namespace voxage {

using ProgressFn = std::function<void(const std::string&)>;

// ---------------------------------------------------------------------------
// ingest / stats

struct IngestOptions {
  std::string corpus_root;    // speaker/video tree; or
  std::string common_voice;   // a Common Voice TSV
  std::string clips_dir;      // prefix for Common Voice clip paths
  std::string out;            // manifest path
  int cap_per_speaker = 15;
  int test_size = 0;          // 0 leaves every entry unassigned
  std::uint64_t seed = 1;
  std::string stratify;       // scheme name or empty
  bool speaker_disjoint = false;
};

struct IngestResult {
  std::size_t entries = 0;
  int videos_retained = 0;
  std::size_t test_entries = 0;
  std::vector<std::string> warnings;
};

IngestResult run_ingest(const IngestOptions& options, const ProgressFn& progress = {});

struct StatsResult {
  DatasetStats stats;
  std::string csv;
  std::string summary;
};

/// Writes the CSV to `csv_out` when it is not empty.
StatsResult run_stats(const std::string& manifest, const std::string& csv_out = "");

// ---------------------------------------------------------------------------
// Datasets

/// "band" and "fusion" are the synthetic tasks; "manifest" reads entries.
struct DataOptions {
  std::string task = "band";
  std::string manifest;
  std::string scheme = "ab";
  int train_count = 160;
  int test_count = 80;
  std::uint64_t data_seed = 11;
  int segments_per_entry = 4;  // manifest clips: leading 0.24 s segments used
};

struct DataSplit {
  Dataset train;
  Dataset test;
  std::vector<std::string> labels;
  std::string scheme;
};

/// Manifest entries must already carry train/test assignments. Entries whose
/// age falls outside the scheme are skipped.
DataSplit load_data(const DataOptions& options, Modality modality);

// ---------------------------------------------------------------------------
// Classifiers

struct TrainVannOptions {
  DataOptions data;
  VannConfig config;
  std::string out;  // checkpoint path; empty skips saving
  std::string log;  // training log path; empty skips
};

struct TrainVannResult {
  std::vector<EpochRecord> log;
  double final_accuracy = 0.0;
};

TrainVannResult run_train_vann(const TrainVannOptions& options,
                               const ProgressFn& progress = {});

struct EvaluateOptions {
  DataOptions data;
  std::string method = "vann";  // vann, knn or svm
  std::string model;            // vann checkpoint
  int knn_k = 5;
  SvmConfig svm;
  std::string confusion_csv;    // empty skips
};

EvalResult run_evaluate(const EvaluateOptions& options);

// ---------------------------------------------------------------------------
// CycleGAN

/// Small widths that train the toy domains in minutes.
CycleGanConfig toy_cyclegan_config();

struct TrainCycleGanOptions {
  CycleGanConfig config;
  bool toy = false;
  int toy_count = 32;      // images per toy domain
  std::string manifest;    // otherwise: A/B speakers from a manifest
  int segments_per_entry = 4;
  std::string out;         // checkpoint; empty skips
  std::string log;         // loss report; empty skips
  std::string snapshot_dir;
};

std::vector<LossEntry> run_train_cyclegan(const TrainCycleGanOptions& options,
                                          const ProgressFn& progress = {});

struct TransformOptions {
  std::string model;
  std::string in;
  std::string out;
  std::string direction = "older";
  int griffin_lim_iterations = 32;
  std::string spectrogram_dir;  // empty skips the per-segment PNGs
};

/// Returns the number of samples written.
std::size_t run_transform(const TransformOptions& options);

}  // namespace voxage

#endif  // VOXAGE_JOBS_HPP_
