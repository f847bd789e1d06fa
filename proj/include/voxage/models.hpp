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

// Age classifiers (VANN family) and the kNN / linear SVM baselines.

#ifndef VOXAGE_MODELS_HPP_
#define VOXAGE_MODELS_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "voxage/audio.hpp"
#include "voxage/codec.hpp"
#include "voxage/nn/checkpoint.hpp"
#include "voxage/nn/layers.hpp"

namespace voxage {

// ---------------------------------------------------------------------------
// Age bins

enum class AgeScheme { kDecade10, kQuarter25, kAb };

std::string scheme_name(AgeScheme scheme);
/// Accepts "decade10", "quarter25", "ab"; anything else is a validation error.
AgeScheme parse_scheme(const std::string& name);
int scheme_classes(AgeScheme scheme);
std::vector<std::string> scheme_labels(AgeScheme scheme);

/// Class index, or nullopt when the scheme excludes the age (ab: 26-60).
/// Negative ages are a range error.
std::optional<int> age_to_bin(double age, AgeScheme scheme);

// ---------------------------------------------------------------------------
// Inputs

inline constexpr int kAudioFeatures = kMelBands * kMelFrames;
inline constexpr int kVisualFeatures = 3 * kImageSize * kImageSize;

/// Log-mel scaled into [0, 1] over the codec's amplitude range, band-major.
std::vector<float> audio_features(const MelSpectrogram& mel,
                                  const ScaleConfig& cfg = {});
/// Face crop resized to 128x128, channel-major, pixel / 255.
std::vector<float> visual_features(const RgbImage& face);

struct Sample {
  std::vector<float> audio;   // kAudioFeatures or empty
  std::vector<float> visual;  // kVisualFeatures or empty
  int label = -1;             // -1: unlabeled
  std::string speaker_id;
};

struct Dataset {
  std::vector<Sample> samples;
  int num_classes = 0;

  std::size_t size() const { return samples.size(); }
};

// ---------------------------------------------------------------------------
// VANN

enum class Modality { kAudio, kVisual, kAvCat, kAvMfb };

std::string modality_name(Modality modality);
Modality parse_modality(const std::string& name);

struct VannConfig {
  Modality modality = Modality::kAudio;
  int num_classes = 2;
  int conv_filters = 16;
  int conv_kernel = 5;
  int conv_stride = 2;
  int dense_width = 128;   // penultimate feature width of each branch
  int fusion_width = 128;  // hidden width after concatenation (av-cat)
  int mfb_factors = 4;     // k
  int mfb_output = 128;    // o
  double leaky_alpha = 0.2;
  int epochs = 40;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;
  std::string to_json() const;
  static VannConfig from_json(const std::string& text);
};

/// Concatenates [N,D1] and [N,D2] branch features.
nn::Variable fuse_cat(const nn::Variable& audio, const nn::Variable& visual);
/// Factorized bilinear pooling: project both inputs to k*o, multiply
/// elementwise, sum-pool groups of k, signed square root, L2 normalize.
nn::Variable fuse_mfb(const nn::Variable& audio, const nn::Variable& visual,
                      const nn::Variable& audio_proj,
                      const nn::Variable& visual_proj, int factors);

/// One conv -> norm -> leaky -> dense -> norm -> leaky feature extractor.
struct VannBranch {
  nn::Conv2d conv;
  nn::FeatureNorm conv_norm;
  nn::Dense fc;
  nn::FeatureNorm fc_norm;
  int channels = 1;
  float alpha = 0.2f;

  static VannBranch create(nn::Store& store, const std::string& prefix,
                           int channels, const VannConfig& cfg);
  nn::Variable operator()(const nn::Variable& x, bool training) const;
};

class VannModel {
 public:
  explicit VannModel(VannConfig config);

  const VannConfig& config() const { return config_; }
  nn::Store& store() { return store_; }
  const nn::Store& store() const { return store_; }

  /// Logits [N, K] for one batch.
  nn::Variable logits(const std::vector<const Sample*>& batch, bool training);
  /// Softmax probabilities [N, K] in inference mode.
  nn::Tensor<float> predict_proba(const std::vector<const Sample*>& batch);

  bool uses_audio() const;
  bool uses_visual() const;

 private:
  VannConfig config_;
  nn::Store store_;
  std::optional<VannBranch> audio_;
  std::optional<VannBranch> visual_;
  nn::Dense fusion_;
  std::optional<nn::FeatureNorm> fusion_norm_;
  nn::Parameter<float>* mfb_audio_ = nullptr;
  nn::Parameter<float>* mfb_visual_ = nullptr;
  nn::Dense head_;
};

std::unique_ptr<VannModel> build_vann(const VannConfig& config);

/// Parameters plus a `<path>.json` sidecar holding the config and scheme.
void save_vann(const std::string& path, const VannModel& model,
               const std::string& scheme);
struct LoadedVann {
  std::unique_ptr<VannModel> model;
  std::string scheme;
};
LoadedVann load_vann(const std::string& path);

// ---------------------------------------------------------------------------
// Training and evaluation

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_acc = 0.0;
};

/// Line-delimited log: "epoch\ttrain_loss\ttest_acc" header, one row per epoch.
std::string format_training_log(const std::vector<EpochRecord>& log);

class ClassifierTrainer {
 public:
  /// Train must contain every class (else a stratification error).
  ClassifierTrainer(VannModel& model, const Dataset& train, const Dataset& test);

  /// Runs one epoch and appends to the log.
  EpochRecord run_epoch();
  void run(int epochs, const std::function<void(const EpochRecord&)>& on_epoch = {});

  /// Mean loss of the next minibatch without updating anything.
  double peek_next_loss();

  int epochs_done() const { return epoch_; }
  const std::vector<EpochRecord>& log() const { return log_; }

  /// Model parameters, optimizer state and epoch counter.
  void save_state(const std::string& path) const;
  void load_state(const std::string& path);

 private:
  std::vector<std::size_t> epoch_order(int epoch) const;
  nn::Variable batch_loss(const std::vector<std::size_t>& order, std::size_t begin,
                          std::size_t end, bool training);

  VannModel& model_;
  const Dataset& train_;
  const Dataset& test_;
  nn::Adam<float> adam_;
  int epoch_ = 0;
  std::vector<EpochRecord> log_;
};

/// K x K counts, rows = truth, columns = prediction.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::string> labels;
  std::vector<long> counts;

  explicit ConfusionMatrix(int k = 0, std::vector<std::string> names = {});
  void add(int truth, int predicted);
  long at(int truth, int predicted) const {
    return counts[static_cast<std::size_t>(truth) * num_classes + predicted];
  }
  long total() const;
  long trace() const;
  double accuracy() const;
  std::vector<double> per_class_accuracy() const;
  /// Header row and column of class labels.
  std::string to_csv() const;
};

struct EvalResult {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

/// Unlabeled samples are a validation error.
EvalResult evaluate(VannModel& model, const Dataset& test,
                    const std::vector<std::string>& labels = {});

// ---------------------------------------------------------------------------
// Baselines on flattened mel features

class KnnClassifier {
 public:
  explicit KnnClassifier(int k = 5) : k_(k) {}
  void fit(std::vector<std::vector<float>> features, std::vector<int> labels);
  /// Majority vote of the k nearest (Euclidean); ties go to the smaller summed
  /// distance, then the lower class index.
  int predict(const std::vector<float>& query) const;

 private:
  int k_;
  std::vector<std::vector<float>> features_;
  std::vector<int> labels_;
};

struct SvmConfig {
  double c = 1.0;
  int epochs = 20;
  std::uint64_t seed = 1;
};

/// One-vs-rest linear SVM trained with Pegasos stochastic subgradient steps.
class LinearSvm {
 public:
  /// A training set with fewer than two classes is a degenerate error.
  static LinearSvm train(const std::vector<std::vector<float>>& features,
                         const std::vector<int>& labels, int num_classes,
                         const SvmConfig& config = {});
  int predict(const std::vector<float>& x) const;
  std::vector<double> margins(const std::vector<float>& x) const;

  int num_classes() const { return static_cast<int>(bias_.size()); }
  const std::vector<double>& bias() const { return bias_; }

 private:
  int dim_ = 0;
  std::vector<std::vector<double>> weights_;
  std::vector<double> bias_;
};

/// Accuracy and confusion of any per-sample predictor.
EvalResult evaluate_predictions(const std::vector<int>& truth,
                                const std::vector<int>& predicted, int num_classes,
                                const std::vector<std::string>& labels = {});

// ---------------------------------------------------------------------------
// Synthetic tasks

/// One 0.24 s clip of band-limited tones plus noise: low band (150-700 Hz)
/// when `high` is false, high band (2500-6000 Hz) otherwise.
AudioClip synthetic_band_clip(bool high, Rng& rng);

/// Audio-only task: label 0 = low band, 1 = high band; balanced.
Dataset make_band_task(int count, std::uint64_t seed);

/// Two-modality task whose label is XOR(audio band bit, visual bit). The
/// visual bit is a bright upper or lower half of the face image, so neither
/// modality alone carries label information.
Dataset make_fusion_task(int count, std::uint64_t seed);

}  // namespace voxage

#endif  // VOXAGE_MODELS_HPP_
