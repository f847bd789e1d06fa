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


#include "voxage/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "voxage/error.hpp"

namespace voxage {

using nn::Shape;
using nn::Tensor;
using nn::Variable;

// ---------------------------------------------------------------------------
// Age bins

std::string scheme_name(AgeScheme scheme) {
  switch (scheme) {
    case AgeScheme::kDecade10: return "decade10";
    case AgeScheme::kQuarter25: return "quarter25";
    case AgeScheme::kAb: return "ab";
  }
  return "?";
}

AgeScheme parse_scheme(const std::string& name) {
  if (name == "decade10") return AgeScheme::kDecade10;
  if (name == "quarter25") return AgeScheme::kQuarter25;
  if (name == "ab") return AgeScheme::kAb;
  fail(ErrorCode::kValidation,
       "unknown age scheme '" + name + "' (expected decade10, quarter25 or ab)");
}

int scheme_classes(AgeScheme scheme) {
  switch (scheme) {
    case AgeScheme::kDecade10: return 7;
    case AgeScheme::kQuarter25: return 4;
    case AgeScheme::kAb: return 2;
  }
  return 0;
}

std::vector<std::string> scheme_labels(AgeScheme scheme) {
  switch (scheme) {
    case AgeScheme::kDecade10:
      return {"<20", "20-29", "30-39", "40-49", "50-59", "60-69", ">=70"};
    case AgeScheme::kQuarter25:
      return {"<=25", "26-50", "51-75", ">75"};
    case AgeScheme::kAb:
      return {"A", "B"};
  }
  return {};
}

std::optional<int> age_to_bin(double age, AgeScheme scheme) {
  if (!(age >= 0.0)) fail(ErrorCode::kRange, "age must be non-negative");
  switch (scheme) {
    case AgeScheme::kDecade10:
      if (age < 20) return 0;
      if (age >= 70) return 6;
      return static_cast<int>(age / 10) - 1;
    case AgeScheme::kQuarter25:
      if (age <= 25) return 0;
      if (age <= 50) return 1;
      if (age <= 75) return 2;
      return 3;
    case AgeScheme::kAb:
      if (age <= 25) return 0;
      if (age > 60) return 1;
      return std::nullopt;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Inputs

std::vector<float> audio_features(const MelSpectrogram& mel, const ScaleConfig& cfg) {
  const double lo = std::log(cfg.amp_floor);
  const double span = std::log(cfg.amp_ceil) - lo;
  std::vector<float> out(mel.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = (std::log(std::max(mel.values[i], cfg.amp_floor)) - lo) / span;
    out[i] = static_cast<float>(std::min(v, 1.0));
  }
  return out;
}

std::vector<float> visual_features(const RgbImage& face) {
  const RgbImage img = resize_image(face, kImageSize, kImageSize);
  std::vector<float> out(kVisualFeatures);
  const int plane = kImageSize * kImageSize;
  for (int i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      out[static_cast<std::size_t>(c) * plane + i] = img.data[3 * i + c] / 255.0f;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config

std::string modality_name(Modality modality) {
  switch (modality) {
    case Modality::kAudio: return "audio";
    case Modality::kVisual: return "visual";
    case Modality::kAvCat: return "av-cat";
    case Modality::kAvMfb: return "av-mfb";
  }
  return "?";
}

Modality parse_modality(const std::string& name) {
  if (name == "audio") return Modality::kAudio;
  if (name == "visual") return Modality::kVisual;
  if (name == "av-cat") return Modality::kAvCat;
  if (name == "av-mfb") return Modality::kAvMfb;
  fail(ErrorCode::kValidation, "unknown modality '" + name +
                                   "' (expected audio, visual, av-cat or av-mfb)");
}

void VannConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) fail(ErrorCode::kRange, std::string("vann config: ") + what + " must be > 0");
  };
  positive(num_classes, "num_classes");
  positive(conv_filters, "conv_filters");
  positive(conv_kernel, "conv_kernel");
  positive(conv_stride, "conv_stride");
  positive(dense_width, "dense_width");
  positive(fusion_width, "fusion_width");
  positive(mfb_factors, "mfb_factors");
  positive(mfb_output, "mfb_output");
  positive(epochs, "epochs");
  if (batch_size < 2) fail(ErrorCode::kRange, "vann config: batch_size must be >= 2");
  if (!(learning_rate > 0)) fail(ErrorCode::kRange, "vann config: learning_rate must be > 0");
}

std::string VannConfig::to_json() const {
  nlohmann::ordered_json j;
  j["modality"] = modality_name(modality);
  j["num_classes"] = num_classes;
  j["conv_filters"] = conv_filters;
  j["conv_kernel"] = conv_kernel;
  j["conv_stride"] = conv_stride;
  j["dense_width"] = dense_width;
  j["fusion_width"] = fusion_width;
  j["mfb_factors"] = mfb_factors;
  j["mfb_output"] = mfb_output;
  j["leaky_alpha"] = leaky_alpha;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["seed"] = seed;
  return j.dump();
}

VannConfig VannConfig::from_json(const std::string& text) {
  VannConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.modality = parse_modality(j.at("modality").get<std::string>());
    c.num_classes = j.at("num_classes").get<int>();
    c.conv_filters = j.value("conv_filters", c.conv_filters);
    c.conv_kernel = j.value("conv_kernel", c.conv_kernel);
    c.conv_stride = j.value("conv_stride", c.conv_stride);
    c.dense_width = j.value("dense_width", c.dense_width);
    c.fusion_width = j.value("fusion_width", c.fusion_width);
    c.mfb_factors = j.value("mfb_factors", c.mfb_factors);
    c.mfb_output = j.value("mfb_output", c.mfb_output);
    c.leaky_alpha = j.value("leaky_alpha", c.leaky_alpha);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("vann config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Fusion

Variable fuse_cat(const Variable& audio, const Variable& visual) {
  return nn::concat_features(audio, visual);
}

Variable fuse_mfb(const Variable& audio, const Variable& visual,
                  const Variable& audio_proj, const Variable& visual_proj, int factors) {
  if (factors < 1) fail(ErrorCode::kRange, "fuse_mfb: factors must be >= 1");
  if (audio.shape().size() != 2 || visual.shape().size() != 2 ||
      audio.shape()[0] != visual.shape()[0]) {
    fail(ErrorCode::kDimension, "fuse_mfb: inputs must be [N, D] with equal N");
  }
  const Variable pa = nn::matmul(audio, audio_proj);
  const Variable pv = nn::matmul(visual, visual_proj);
  if (pa.shape() != pv.shape() || pa.shape()[1] % factors != 0) {
    fail(ErrorCode::kDimension, "fuse_mfb: projections must both be [N, k*o]");
  }
  return nn::l2_normalize(nn::signed_sqrt(nn::group_sum(nn::mul(pa, pv), factors)));
}

// ---------------------------------------------------------------------------
// VANN

namespace {

int conv_out(int size, const VannConfig& cfg) {
  return (size + 2 * (cfg.conv_kernel / 2) - cfg.conv_kernel) / cfg.conv_stride + 1;
}

Variable stack_inputs(const std::vector<const Sample*>& batch, bool visual) {
  const int channels = visual ? 3 : 1;
  const std::size_t per = visual ? kVisualFeatures : kAudioFeatures;
  Tensor<float> t(Shape{static_cast<int>(batch.size()), channels, kImageSize, kImageSize});
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& src = visual ? batch[n]->visual : batch[n]->audio;
    if (src.size() != per) {
      fail(ErrorCode::kDimension, std::string("vann: sample is missing ") +
                                      (visual ? "visual" : "audio") + " input");
    }
    std::copy(src.begin(), src.end(), t.data() + n * per);
  }
  return Variable(std::move(t));
}

}  // namespace

VannBranch VannBranch::create(nn::Store& store, const std::string& prefix, int channels,
                              const VannConfig& cfg) {
  VannBranch b;
  b.channels = channels;
  b.alpha = static_cast<float>(cfg.leaky_alpha);
  b.conv = nn::Conv2d::create(store, prefix + "conv", channels, cfg.conv_filters,
                              cfg.conv_kernel, cfg.conv_stride, cfg.conv_kernel / 2,
                              /*with_bias=*/false, cfg.seed);
  b.conv_norm = nn::FeatureNorm::create(store, prefix + "conv_norm", cfg.conv_filters);
  const int side = conv_out(kImageSize, cfg);
  b.fc = nn::Dense::create(store, prefix + "fc", cfg.conv_filters * side * side,
                           cfg.dense_width, true, cfg.seed);
  b.fc_norm = nn::FeatureNorm::create(store, prefix + "fc_norm", cfg.dense_width);
  return b;
}

Variable VannBranch::operator()(const Variable& x, bool training) const {
  Variable h = nn::leaky_relu(conv_norm(conv(x), training), alpha);
  return nn::leaky_relu(fc_norm(fc(nn::flatten(h)), training), alpha);
}

VannModel::VannModel(VannConfig config) : config_(std::move(config)) {
  config_.validate();
  const VannConfig& c = config_;
  if (uses_audio()) audio_ = VannBranch::create(store_, "audio/", 1, c);
  if (uses_visual()) visual_ = VannBranch::create(store_, "visual/", 3, c);
  int head_in = c.dense_width;
  if (c.modality == Modality::kAvCat) {
    fusion_ = nn::Dense::create(store_, "fusion/fc", 2 * c.dense_width, c.fusion_width,
                                true, c.seed);
    fusion_norm_ = nn::FeatureNorm::create(store_, "fusion/norm", c.fusion_width);
    head_in = c.fusion_width;
  } else if (c.modality == Modality::kAvMfb) {
    const Shape proj{c.dense_width, c.mfb_factors * c.mfb_output};
    const auto scheme = nn::InitScheme::uniform_fan_in(c.dense_width);
    mfb_audio_ = store_.add("mfb/audio_proj",
                            nn::init_param(c.seed, "mfb/audio_proj", proj, scheme));
    mfb_visual_ = store_.add("mfb/visual_proj",
                             nn::init_param(c.seed, "mfb/visual_proj", proj, scheme));
    head_in = c.mfb_output;
  }
  head_ = nn::Dense::create(store_, "head", head_in, c.num_classes, true, c.seed);
}

bool VannModel::uses_audio() const { return config_.modality != Modality::kVisual; }
bool VannModel::uses_visual() const { return config_.modality != Modality::kAudio; }

Variable VannModel::logits(const std::vector<const Sample*>& batch, bool training) {
  if (batch.empty()) fail(ErrorCode::kDimension, "vann: empty batch");
  Variable fa, fv;
  if (audio_) fa = (*audio_)(stack_inputs(batch, false), training);
  if (visual_) fv = (*visual_)(stack_inputs(batch, true), training);
  const float alpha = static_cast<float>(config_.leaky_alpha);
  switch (config_.modality) {
    case Modality::kAudio: return head_(fa);
    case Modality::kVisual: return head_(fv);
    case Modality::kAvCat:
      return head_(nn::leaky_relu((*fusion_norm_)(fusion_(fuse_cat(fa, fv)), training), alpha));
    case Modality::kAvMfb:
      return head_(fuse_mfb(fa, fv, mfb_audio_->var, mfb_visual_->var, config_.mfb_factors));
  }
  return {};
}

Tensor<float> VannModel::predict_proba(const std::vector<const Sample*>& batch) {
  return nn::softmax_rows(logits(batch, false).value());
}

std::unique_ptr<VannModel> build_vann(const VannConfig& config) {
  return std::make_unique<VannModel>(config);
}

namespace {

void write_sidecar(const std::string& path, const VannConfig& config,
                   const std::string& scheme) {
  nlohmann::ordered_json j;
  j["kind"] = "vann";
  j["scheme"] = scheme;
  j["config"] = nlohmann::json::parse(config.to_json());
  const std::string text = j.dump(2) + "\n";
  write_file(path + ".json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                       text.size()));
}

}  // namespace

void save_vann(const std::string& path, const VannModel& model, const std::string& scheme) {
  nn::save_checkpoint(path, nn::export_parameters(model.store()));
  write_sidecar(path, model.config(), scheme);
}

LoadedVann load_vann(const std::string& path) {
  const auto bytes = read_file(path + ".json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (j.at("kind").get<std::string>() != "vann") {
      fail(ErrorCode::kSchema, "checkpoint sidecar is not a vann model");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("vann sidecar: ") + e.what());
  }
  LoadedVann out;
  out.scheme = j.value("scheme", std::string("ab"));
  out.model = build_vann(VannConfig::from_json(j.at("config").dump()));
  nn::import_parameters(out.model->store(), nn::load_checkpoint(path));
  return out;
}

// ---------------------------------------------------------------------------
// Training

std::string format_training_log(const std::vector<EpochRecord>& log) {
  std::ostringstream out;
  out << "epoch\ttrain_loss\ttest_acc\n";
  out.precision(9);
  for (const auto& r : log) out << r.epoch << '\t' << r.train_loss << '\t' << r.test_acc << '\n';
  return out.str();
}

ClassifierTrainer::ClassifierTrainer(VannModel& model, const Dataset& train,
                                     const Dataset& test)
    : model_(model),
      train_(train),
      test_(test),
      adam_(model.store().trainable(),
            nn::AdamConfig{model.config().learning_rate, 0.9, 0.999, 1e-8}) {
  const int k = model.config().num_classes;
  if (train.samples.empty()) fail(ErrorCode::kValidation, "training set is empty");
  std::vector<int> seen(k, 0);
  for (const Sample& s : train.samples) {
    if (s.label < 0) fail(ErrorCode::kValidation, "training set has unlabeled samples");
    if (s.label >= k) fail(ErrorCode::kRange, "label outside the model's class range");
    seen[s.label] = 1;
  }
  for (int c = 0; c < k; ++c) {
    if (!seen[c]) {
      fail(ErrorCode::kStratification,
           "class " + std::to_string(c) + " is absent from the training split");
    }
  }
}

std::vector<std::size_t> ClassifierTrainer::epoch_order(int epoch) const {
  std::vector<std::size_t> order(train_.samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(model_.config().seed ^ 0x7261696eULL).split(static_cast<std::uint64_t>(epoch));
  rng.shuffle(std::span(order));
  return order;
}

Variable ClassifierTrainer::batch_loss(const std::vector<std::size_t>& order,
                                       std::size_t begin, std::size_t end, bool training) {
  std::vector<const Sample*> batch;
  std::vector<int> labels;
  for (std::size_t i = begin; i < end; ++i) {
    batch.push_back(&train_.samples[order[i]]);
    labels.push_back(train_.samples[order[i]].label);
  }
  return nn::cross_entropy(model_.logits(batch, training), labels);
}

EpochRecord ClassifierTrainer::run_epoch() {
  ++epoch_;
  const auto order = epoch_order(epoch_);
  const std::size_t bs = static_cast<std::size_t>(model_.config().batch_size);
  double loss_sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += bs) {
    const std::size_t end = std::min(begin + bs, order.size());
    if (end - begin < 2) break;  // batch statistics need two samples
    adam_.zero_grad();
    Variable loss = batch_loss(order, begin, end, true);
    nn::backward(loss);
    adam_.step();
    loss_sum += static_cast<double>(loss.value().item()) * static_cast<double>(end - begin);
    counted += end - begin;
  }
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.train_loss = counted ? loss_sum / static_cast<double>(counted) : 0.0;
  rec.test_acc = test_.samples.empty() ? 0.0 : evaluate(model_, test_).accuracy;
  log_.push_back(rec);
  return rec;
}

void ClassifierTrainer::run(int epochs, const std::function<void(const EpochRecord&)>& on_epoch) {
  for (int e = 0; e < epochs; ++e) {
    const EpochRecord rec = run_epoch();
    if (on_epoch) on_epoch(rec);
  }
}

double ClassifierTrainer::peek_next_loss() {
  // Training-mode normalization updates running statistics; restore them.
  std::vector<Tensor<float>> buffers;
  const auto params = model_.store().all();
  for (auto* p : params) {
    if (!p->trainable) buffers.push_back(p->value());
  }
  const auto order = epoch_order(epoch_ + 1);
  const std::size_t end = std::min<std::size_t>(order.size(), model_.config().batch_size);
  const double loss = batch_loss(order, 0, end, true).value().item();
  std::size_t i = 0;
  for (auto* p : params) {
    if (!p->trainable) p->value() = buffers[i++];
  }
  return loss;
}

void ClassifierTrainer::save_state(const std::string& path) const {
  auto entries = nn::export_parameters(model_.store());
  nn::export_adam(adam_, "opt/", entries);
  entries.push_back({"trainer/epoch", Tensor<float>::scalar(static_cast<float>(epoch_))});
  nn::save_checkpoint(path, entries);
  write_sidecar(path, model_.config(), "");
}

void ClassifierTrainer::load_state(const std::string& path) {
  const auto entries = nn::load_checkpoint(path);
  nn::import_parameters(model_.store(), entries);
  nn::import_adam(adam_, "opt/", entries);
  const auto* epoch = nn::find_entry(entries, "trainer/epoch");
  if (epoch == nullptr) fail(ErrorCode::kFormat, "checkpoint has no trainer state");
  epoch_ = static_cast<int>(epoch->tensor.item());
  log_.clear();
}

// ---------------------------------------------------------------------------
// Evaluation

ConfusionMatrix::ConfusionMatrix(int k, std::vector<std::string> names)
    : num_classes(k), labels(std::move(names)), counts(static_cast<std::size_t>(k) * k, 0) {
  if (labels.empty()) {
    for (int c = 0; c < k; ++c) labels.push_back(std::to_string(c));
  }
  if (static_cast<int>(labels.size()) != k) {
    fail(ErrorCode::kDimension, "confusion matrix: label count mismatch");
  }
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= num_classes || predicted < 0 || predicted >= num_classes) {
    fail(ErrorCode::kRange, "confusion matrix: class out of range");
  }
  ++counts[static_cast<std::size_t>(truth) * num_classes + predicted];
}

long ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0L);
}

long ConfusionMatrix::trace() const {
  long t = 0;
  for (int c = 0; c < num_classes; ++c) t += at(c, c);
  return t;
}

double ConfusionMatrix::accuracy() const {
  const long n = total();
  return n ? static_cast<double>(trace()) / static_cast<double>(n) : 0.0;
}

std::vector<double> ConfusionMatrix::per_class_accuracy() const {
  std::vector<double> out(num_classes, 0.0);
  for (int t = 0; t < num_classes; ++t) {
    long row = 0;
    for (int p = 0; p < num_classes; ++p) row += at(t, p);
    out[t] = row ? static_cast<double>(at(t, t)) / static_cast<double>(row) : 0.0;
  }
  return out;
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream out;
  out << "truth\\predicted";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (int t = 0; t < num_classes; ++t) {
    out << labels[t];
    for (int p = 0; p < num_classes; ++p) out << ',' << at(t, p);
    out << '\n';
  }
  return out.str();
}

EvalResult evaluate_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                                int num_classes, const std::vector<std::string>& labels) {
  if (truth.size() != predicted.size()) {
    fail(ErrorCode::kDimension, "evaluate: prediction count mismatch");
  }
  EvalResult r{0.0, ConfusionMatrix(num_classes, labels)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0) fail(ErrorCode::kValidation, "evaluate: unlabeled entry");
    r.confusion.add(truth[i], predicted[i]);
  }
  r.accuracy = r.confusion.accuracy();
  return r;
}

EvalResult evaluate(VannModel& model, const Dataset& test, const std::vector<std::string>& labels) {
  std::vector<int> truth, predicted;
  constexpr std::size_t kChunk = 64;
  for (std::size_t begin = 0; begin < test.samples.size(); begin += kChunk) {
    const std::size_t end = std::min(begin + kChunk, test.samples.size());
    std::vector<const Sample*> batch;
    for (std::size_t i = begin; i < end; ++i) {
      if (test.samples[i].label < 0) fail(ErrorCode::kValidation, "evaluate: unlabeled entry");
      batch.push_back(&test.samples[i]);
      truth.push_back(test.samples[i].label);
    }
    const Tensor<float> probs = model.predict_proba(batch);
    const int k = probs.dim(1);
    for (std::size_t n = 0; n < batch.size(); ++n) {
      const float* row = probs.data() + n * k;
      predicted.push_back(static_cast<int>(std::max_element(row, row + k) - row));
    }
  }
  return evaluate_predictions(truth, predicted, model.config().num_classes, labels);
}

// ---------------------------------------------------------------------------
// kNN

void KnnClassifier::fit(std::vector<std::vector<float>> features, std::vector<int> labels) {
  if (features.empty()) fail(ErrorCode::kValidation, "knn: empty training set");
  if (features.size() != labels.size()) fail(ErrorCode::kDimension, "knn: label count mismatch");
  if (k_ < 1) fail(ErrorCode::kRange, "knn: k must be >= 1");
  for (const auto& f : features) {
    if (f.size() != features[0].size()) fail(ErrorCode::kDimension, "knn: ragged features");
  }
  features_ = std::move(features);
  labels_ = std::move(labels);
}

int KnnClassifier::predict(const std::vector<float>& query) const {
  if (features_.empty()) fail(ErrorCode::kState, "knn: not fitted");
  if (query.size() != features_[0].size()) fail(ErrorCode::kDimension, "knn: query dimension");
  std::vector<std::pair<double, std::size_t>> dist(features_.size());
  for (std::size_t i = 0; i < features_.size(); ++i) {
    double acc = 0.0;
    for (std::size_t d = 0; d < query.size(); ++d) {
      const double diff = static_cast<double>(features_[i][d]) - query[d];
      acc += diff * diff;
    }
    dist[i] = {std::sqrt(acc), i};
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::map<int, std::pair<int, double>> votes;  // class -> (count, summed distance)
  for (std::size_t i = 0; i < k; ++i) {
    auto& v = votes[labels_[dist[i].second]];
    ++v.first;
    v.second += dist[i].first;
  }
  int best = -1;
  std::pair<int, double> best_vote{-1, 0.0};
  for (const auto& [label, vote] : votes) {  // ascending class order
    if (vote.first > best_vote.first ||
        (vote.first == best_vote.first && vote.second < best_vote.second)) {
      best = label;
      best_vote = vote;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Linear SVM

LinearSvm LinearSvm::train(const std::vector<std::vector<float>>& features,
                           const std::vector<int>& labels, int num_classes,
                           const SvmConfig& config) {
  if (features.empty() || features.size() != labels.size()) {
    fail(ErrorCode::kValidation, "svm: need one label per training vector");
  }
  if (!(config.c > 0) || config.epochs < 1) fail(ErrorCode::kRange, "svm: bad C or epochs");
  std::vector<int> present(num_classes, 0);
  for (int l : labels) {
    if (l < 0 || l >= num_classes) fail(ErrorCode::kRange, "svm: label out of range");
    present[l] = 1;
  }
  if (std::accumulate(present.begin(), present.end(), 0) < 2) {
    fail(ErrorCode::kDegenerate, "svm: training set contains a single class");
  }
  const std::size_t n = features.size();
  const std::size_t dim = features[0].size();
  for (const auto& f : features) {
    if (f.size() != dim) fail(ErrorCode::kDimension, "svm: ragged features");
  }

  LinearSvm svm;
  svm.dim_ = static_cast<int>(dim);
  svm.weights_.assign(num_classes, std::vector<double>(dim, 0.0));
  svm.bias_.assign(num_classes, 0.0);
  const double lambda = 1.0 / (static_cast<double>(n) * config.c);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const Rng base(config.seed);
  long t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = base.split(static_cast<std::uint64_t>(epoch));
    rng.shuffle(std::span(order));
    for (std::size_t idx : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double shrink = 1.0 - eta * lambda;
      const double bias_step = 0.1 / std::sqrt(static_cast<double>(t));
      const auto& x = features[idx];
      for (int c = 0; c < num_classes; ++c) {
        auto& w = svm.weights_[c];
        const double y = labels[idx] == c ? 1.0 : -1.0;
        double margin = svm.bias_[c];
        for (std::size_t d = 0; d < dim; ++d) margin += w[d] * x[d];
        const bool violated = y * margin < 1.0;
        for (std::size_t d = 0; d < dim; ++d) {
          w[d] = shrink * w[d] + (violated ? eta * y * x[d] : 0.0);
        }
        if (violated) svm.bias_[c] += bias_step * y;
      }
    }
  }
  return svm;
}

std::vector<double> LinearSvm::margins(const std::vector<float>& x) const {
  if (static_cast<int>(x.size()) != dim_) fail(ErrorCode::kDimension, "svm: input dimension");
  std::vector<double> out(bias_);
  for (std::size_t c = 0; c < out.size(); ++c) {
    for (int d = 0; d < dim_; ++d) out[c] += weights_[c][d] * x[d];
  }
  return out;
}

int LinearSvm::predict(const std::vector<float>& x) const {
  const auto m = margins(x);
  return static_cast<int>(std::max_element(m.begin(), m.end()) - m.begin());
}

// ---------------------------------------------------------------------------
// Synthetic tasks

AudioClip synthetic_band_clip(bool high, Rng& rng) {
  AudioClip clip;
  clip.samples.assign(kSegmentSamples, 0.0f);
  const double lo = high ? 2500.0 : 150.0;
  const double hi = high ? 6000.0 : 700.0;
  for (int tone = 0; tone < 3; ++tone) {
    const double hz = rng.uniform(lo, hi);
    const double amp = rng.uniform(0.05, 0.2);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int i = 0; i < kSegmentSamples; ++i) {
      clip.samples[i] += static_cast<float>(
          amp * std::sin(2.0 * std::numbers::pi * hz * i / kSampleRate + phase));
    }
  }
  for (float& s : clip.samples) s += static_cast<float>(rng.uniform(-0.01, 0.01));
  return clip;
}

Dataset make_band_task(int count, std::uint64_t seed) {
  Dataset ds;
  ds.num_classes = 2;
  const Rng base(seed);
  for (int i = 0; i < count; ++i) {
    Rng rng = base.split(static_cast<std::uint64_t>(i));
    Sample s;
    s.label = i % 2;
    s.audio = audio_features(mel_spectrogram(synthetic_band_clip(s.label == 1, rng)));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset make_fusion_task(int count, std::uint64_t seed) {
  Dataset ds;
  ds.num_classes = 2;
  const Rng base(seed);
  const int plane = kImageSize * kImageSize;
  for (int i = 0; i < count; ++i) {
    Rng rng = base.split(static_cast<std::uint64_t>(i));
    const int audio_bit = i % 2;
    const int visual_bit = (i / 2) % 2;
    Sample s;
    s.label = audio_bit ^ visual_bit;
    s.audio = audio_features(mel_spectrogram(synthetic_band_clip(audio_bit == 1, rng)));
    s.visual.resize(kVisualFeatures);
    const double tint[3] = {rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0)};
    for (int c = 0; c < 3; ++c) {
      for (int p = 0; p < plane; ++p) {
        const bool upper = p / kImageSize < kImageSize / 2;
        const bool bright = upper == (visual_bit == 0);
        const double base_level = bright ? 0.7 * tint[c] : 0.15;
        s.visual[static_cast<std::size_t>(c) * plane + p] =
            static_cast<float>(std::clamp(base_level + rng.uniform(-0.1, 0.1), 0.0, 1.0));
      }
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace voxage
