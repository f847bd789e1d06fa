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

// Voice-aging CycleGAN over RGB-coded mel spectrogram images, and the
// audio -> aged audio transform built on it.

#ifndef VOXAGE_CYCLEGAN_HPP_
#define VOXAGE_CYCLEGAN_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "voxage/audio.hpp"
#include "voxage/codec.hpp"
#include "voxage/nn/layers.hpp"

namespace voxage {

struct CycleGanConfig {
  int gen_channels = 32;   // width after the first downsampling block
  int down_blocks = 2;     // stride-2 blocks; each doubles the width
  int res_blocks = 4;
  int disc_channels = 64;  // width of the first discriminator layer
  double lambda_cycle = 10.0;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  int epochs = 50;
  int batch_size = 1;
  std::uint64_t seed = 1;
  std::vector<int> snapshot_epochs = {1, 41};

  void validate() const;
  std::string to_json() const;
  static CycleGanConfig from_json(const std::string& text);
};

// ---------------------------------------------------------------------------
// Image <-> tensor

/// pixel / 127.5 - 1 per channel; result [1, 3, 128, 128].
nn::Tensor<float> image_to_tensor(const RgbSpectrogram& img);
/// Stacks images into [N, 3, 128, 128].
nn::Tensor<float> images_to_tensor(const std::vector<const RgbSpectrogram*>& imgs);
/// Inverse of image_to_tensor for batch entry `index`; values are clamped to
/// [-1, 1] and rounded to the nearest byte.
RgbSpectrogram tensor_to_image(const nn::Tensor<float>& t, int index = 0,
                               const ScaleConfig& cfg = {});

// ---------------------------------------------------------------------------
// Networks

/// Stride-2 conv blocks, residual blocks, as many resize-conv upsampling
/// blocks and a tanh head. Output shape equals input shape.
struct Generator {
  std::vector<nn::Conv2d> down;
  std::vector<nn::InstanceNorm> down_norm;
  std::vector<std::array<nn::Conv2d, 2>> res;
  std::vector<std::array<nn::InstanceNorm, 2>> res_norm;
  std::vector<nn::Conv2d> up;
  std::vector<nn::InstanceNorm> up_norm;
  nn::Conv2d head;

  static Generator create(nn::Store& store, const std::string& prefix,
                          const CycleGanConfig& cfg);
  nn::Variable operator()(const nn::Variable& x) const;
};

/// Patch discriminator: three stride-2 and one stride-1 4x4 conv layers,
/// then a 4x4 scoring conv. A 128x128 input gives a 14x14 realness map.
struct Discriminator {
  std::vector<nn::Conv2d> layers;
  std::vector<nn::InstanceNorm> norms;  // none on the first layer
  nn::Conv2d head;

  static Discriminator create(nn::Store& store, const std::string& prefix,
                              const CycleGanConfig& cfg);
  nn::Variable operator()(const nn::Variable& x) const;
};

inline constexpr int kPatchGrid = 14;

enum class Direction { kOlder, kYounger };
std::string direction_name(Direction d);
/// "older" or "younger"; anything else is a validation error.
Direction parse_direction(const std::string& name);

/// G: young (A) -> old (B); F: old -> young. Parameters live under the
/// "G/", "F/", "D_A/" and "D_B/" name groups.
class CycleGan {
 public:
  explicit CycleGan(CycleGanConfig config);

  const CycleGanConfig& config() const { return config_; }
  nn::Store& store() { return store_; }
  const nn::Store& store() const { return store_; }

  const Generator& g() const { return g_; }
  const Generator& f() const { return f_; }
  const Discriminator& d_a() const { return d_a_; }
  const Discriminator& d_b() const { return d_b_; }

  /// older -> G, younger -> F.
  nn::Tensor<float> generate(const nn::Tensor<float>& x, Direction direction) const;

 private:
  CycleGanConfig config_;
  nn::Store store_;
  Generator g_, f_;
  Discriminator d_a_, d_b_;
};

/// Parameters plus a `<path>.json` sidecar holding the config.
void save_cyclegan(const std::string& path, const CycleGan& model);
std::unique_ptr<CycleGan> load_cyclegan(const std::string& path);

// ---------------------------------------------------------------------------
// Losses

/// Least-squares discriminator loss: (mse(real, 1) + mse(fake, 0)) / 2.
nn::Variable lsgan_discriminator_loss(const nn::Variable& real_scores,
                                      const nn::Variable& fake_scores);
/// Least-squares generator loss: mse(fake, 1).
nn::Variable lsgan_generator_loss(const nn::Variable& fake_scores);
/// adversarial + lambda * cycle.
double generator_objective(double adversarial, double cycle, double lambda);

using ImageFn = std::function<nn::Variable(const nn::Variable&)>;

struct CycleLosses {
  nn::Variable d_a, d_b;              // discriminators (fakes detached)
  nn::Variable g_adv, f_adv;          // generators' adversarial terms
  nn::Variable cycle_aba, cycle_bab;  // L1 reconstruction
  nn::Variable generator_total;       // g_adv + f_adv + lambda * cycles
};

/// All six losses for one pair of batches. The networks are passed as
/// callables so tests can stub them.
CycleLosses compute_losses(const ImageFn& g, const ImageFn& f, const ImageFn& d_a,
                           const ImageFn& d_b, const nn::Variable& a,
                           const nn::Variable& b, double lambda);
CycleLosses compute_losses(const CycleGan& model, const nn::Variable& a,
                           const nn::Variable& b);

struct LossEntry {
  int epoch = 0;
  double d_a = 0, d_b = 0, g = 0, f = 0, cycle_aba = 0, cycle_bab = 0;

  double cycle() const { return cycle_aba + cycle_bab; }
  bool finite() const;
};

/// Tab-separated, header "epoch\td_a\td_b\tg\tf\tcycle_aba\tcycle_bab".
std::string format_loss_report(const std::vector<LossEntry>& report);

// ---------------------------------------------------------------------------
// Training

struct DomainPair {
  std::vector<RgbSpectrogram> domain_a;  // young
  std::vector<RgbSpectrogram> domain_b;  // old
};

/// Alternating generator / discriminator Adam updates.
class CycleGanTrainer {
 public:
  /// Either domain empty -> validation error.
  CycleGanTrainer(CycleGan& model, const DomainPair& domains);

  LossEntry run_epoch();
  /// `snapshot_dir` empty disables sample snapshots; otherwise G and F outputs
  /// for the first image of each domain are written as PNG at the
  /// configured epochs.
  std::vector<LossEntry> run(int epochs, const std::string& snapshot_dir = "",
                             const std::function<void(const LossEntry&)>& on_epoch = {});

  int epochs_done() const { return epoch_; }
  const std::vector<LossEntry>& report() const { return report_; }

 private:
  void write_snapshots(const std::string& dir) const;

  CycleGan& model_;
  const DomainPair& domains_;
  nn::Tensor<float> tensors_a_, tensors_b_;
  nn::Adam<float> gen_opt_, disc_opt_;
  int epoch_ = 0;
  std::vector<LossEntry> report_;
};

// ---------------------------------------------------------------------------
// Audio transform

/// Segment -> mel -> encode -> normalize -> G or F -> decode -> Griffin-Lim
/// per 0.24 s segment, concatenated. Output has floor(N / 3840) * 3840
/// samples. Clips shorter than one segment are a validation error; other
/// sample rates are resampled to 16 kHz first.
AudioClip transform_audio(const CycleGan& model, const AudioClip& clip,
                          Direction direction, int griffin_lim_iterations = 32,
                          const ScaleConfig& cfg = {});

/// Input and output spectrogram images of the most recent transform, for
/// callers that display them.
struct TransformResult {
  AudioClip audio;
  std::vector<RgbSpectrogram> input_images;
  std::vector<RgbSpectrogram> output_images;
};
TransformResult transform_audio_detailed(const CycleGan& model, const AudioClip& clip,
                                         Direction direction,
                                         int griffin_lim_iterations = 32,
                                         const ScaleConfig& cfg = {});

// ---------------------------------------------------------------------------
// Toy pitched-band domains

// Both bands sit near the top edge of the image. The networks are
// translation-equivariant, so D can tell the two apart only through their
// distance from the border, and G has to move the tone just 16 rows.
inline constexpr int kToyBandA = 104;
inline constexpr int kToyBandB = 120;

/// One segment holding a tone centred on mel band `band`, with random
/// frequency jitter and level. The dither is far below the codec floor, so
/// bands away from the tone encode as black pixels.
AudioClip toy_band_clip(int band, Rng& rng);
/// `count` images per domain: tones at kToyBandA (A) and kToyBandB (B).
DomainPair make_toy_domains(int count, std::uint64_t seed);
/// Band with the largest mean power over frames.
int dominant_band(const MelSpectrogram& mel);
/// True when the dominant band lies nearer kToyBandB than kToyBandA.
bool looks_like_domain_b(const MelSpectrogram& mel);

}  // namespace voxage

#endif  // VOXAGE_CYCLEGAN_HPP_
