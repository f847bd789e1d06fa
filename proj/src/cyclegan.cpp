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

#include "voxage/cyclegan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "voxage/error.hpp"
#include "voxage/nn/checkpoint.hpp"

namespace voxage {

using nn::Shape;
using nn::Tensor;
using nn::Variable;

namespace {

constexpr int kPlane = kImageSize * kImageSize;

void check_image_batch(const Variable& x, const char* who) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != 3 || s[2] != kImageSize || s[3] != kImageSize) {
    fail(ErrorCode::kDimension,
         std::string(who) + ": expected [N, 3, 128, 128], got " + nn::shape_str(s));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void CycleGanConfig::validate() const {
  if (gen_channels < 1 || disc_channels < 1 || res_blocks < 0) {
    fail(ErrorCode::kRange, "cyclegan config: channel counts must be positive");
  }
  if (down_blocks < 1 || down_blocks > 5) {
    fail(ErrorCode::kRange, "cyclegan config: down_blocks must be in [1, 5]");
  }
  if (!(lambda_cycle > 0)) fail(ErrorCode::kRange, "cyclegan config: lambda_cycle must be > 0");
  if (!(learning_rate > 0)) fail(ErrorCode::kRange, "cyclegan config: learning_rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) fail(ErrorCode::kRange, "cyclegan config: beta1 outside [0, 1)");
  if (epochs < 1 || batch_size < 1) {
    fail(ErrorCode::kRange, "cyclegan config: epochs and batch_size must be >= 1");
  }
}

std::string CycleGanConfig::to_json() const {
  nlohmann::ordered_json j;
  j["gen_channels"] = gen_channels;
  j["down_blocks"] = down_blocks;
  j["res_blocks"] = res_blocks;
  j["disc_channels"] = disc_channels;
  j["lambda_cycle"] = lambda_cycle;
  j["learning_rate"] = learning_rate;
  j["beta1"] = beta1;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["snapshot_epochs"] = snapshot_epochs;
  return j.dump();
}

CycleGanConfig CycleGanConfig::from_json(const std::string& text) {
  CycleGanConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.gen_channels = j.value("gen_channels", c.gen_channels);
    c.down_blocks = j.value("down_blocks", c.down_blocks);
    c.res_blocks = j.value("res_blocks", c.res_blocks);
    c.disc_channels = j.value("disc_channels", c.disc_channels);
    c.lambda_cycle = j.value("lambda_cycle", c.lambda_cycle);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.snapshot_epochs = j.value("snapshot_epochs", c.snapshot_epochs);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("cyclegan config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Image <-> tensor

Tensor<float> images_to_tensor(const std::vector<const RgbSpectrogram*>& imgs) {
  Tensor<float> t(Shape{static_cast<int>(imgs.size()), 3, kImageSize, kImageSize});
  for (std::size_t n = 0; n < imgs.size(); ++n) {
    float* base = t.data() + n * 3 * kPlane;
    for (int i = 0; i < kPlane; ++i) {
      const Rgb& p = imgs[n]->pixels[i];
      base[i] = p.red / 127.5f - 1.0f;
      base[kPlane + i] = p.green / 127.5f - 1.0f;
      base[2 * kPlane + i] = p.blue / 127.5f - 1.0f;
    }
  }
  return t;
}

Tensor<float> image_to_tensor(const RgbSpectrogram& img) { return images_to_tensor({&img}); }

RgbSpectrogram tensor_to_image(const Tensor<float>& t, int index, const ScaleConfig& cfg) {
  if (t.rank() != 4 || t.dim(1) != 3 || t.dim(2) != kImageSize || t.dim(3) != kImageSize ||
      index < 0 || index >= t.dim(0)) {
    fail(ErrorCode::kDimension, "tensor_to_image: expected [N, 3, 128, 128] and a valid index");
  }
  auto to_byte = [](float v) {
    const double x = std::clamp(static_cast<double>(v), -1.0, 1.0);
    return static_cast<std::uint8_t>(std::lround((x + 1.0) * 127.5));
  };
  RgbSpectrogram img;
  img.scale_config = cfg;
  const float* base = t.data() + static_cast<std::size_t>(index) * 3 * kPlane;
  for (int i = 0; i < kPlane; ++i) {
    img.pixels[i] = Rgb{to_byte(base[i]), to_byte(base[kPlane + i]), to_byte(base[2 * kPlane + i])};
  }
  return img;
}

// ---------------------------------------------------------------------------
// Networks

// The wider He-style bound used by the classifiers saturates the small
// generators here; D wins within an epoch and G never recovers.
constexpr auto kInit = nn::InitKind::kLecunUniform;

Generator Generator::create(nn::Store& store, const std::string& prefix,
                            const CycleGanConfig& cfg) {
  Generator g;
  // widths: 3, c, 2c, 4c, ... one entry per downsampling block.
  std::vector<int> widths{3};
  for (int i = 0; i < cfg.down_blocks; ++i) widths.push_back(cfg.gen_channels << i);
  for (int i = 0; i < cfg.down_blocks; ++i) {
    const std::string name = prefix + "down" + std::to_string(i);
    g.down.push_back(nn::Conv2d::create(store, name, widths[i], widths[i + 1], 3, 2, 1, false,
                                        cfg.seed));
    g.down_norm.push_back(nn::InstanceNorm::create(store, name + "_norm", widths[i + 1]));
  }
  const int inner = widths.back();
  for (int r = 0; r < cfg.res_blocks; ++r) {
    std::array<nn::Conv2d, 2> convs;
    std::array<nn::InstanceNorm, 2> norms;
    for (int k = 0; k < 2; ++k) {
      const std::string name = prefix + "res" + std::to_string(r) + "_" + std::to_string(k);
      convs[k] = nn::Conv2d::create(store, name, inner, inner, 3, 1, 1, false, cfg.seed, kInit);
      norms[k] = nn::InstanceNorm::create(store, name + "_norm", inner);
    }
    g.res.push_back(convs);
    g.res_norm.push_back(norms);
  }
  for (int i = 0; i < cfg.down_blocks; ++i) {
    const int in = widths[cfg.down_blocks - i];
    const int j = cfg.down_blocks - i - 1;
    const int out = j == 0 ? cfg.gen_channels : widths[j];
    const std::string name = prefix + "up" + std::to_string(i);
    g.up.push_back(nn::Conv2d::create(store, name, in, out, 3, 1, 1, false, cfg.seed));
    g.up_norm.push_back(nn::InstanceNorm::create(store, name + "_norm", out));
  }
  g.head = nn::Conv2d::create(store, prefix + "head", cfg.gen_channels, 3, 3, 1, 1, true,
                              cfg.seed, kInit);
  return g;
}

Variable Generator::operator()(const Variable& x) const {
  check_image_batch(x, "generator");
  Variable h = x;
  for (std::size_t i = 0; i < down.size(); ++i) h = nn::relu(down_norm[i](down[i](h)));
  for (std::size_t r = 0; r < res.size(); ++r) {
    Variable y = nn::relu(res_norm[r][0](res[r][0](h)));
    h = nn::add(h, res_norm[r][1](res[r][1](y)));
  }
  for (std::size_t i = 0; i < up.size(); ++i) {
    h = nn::relu(up_norm[i](up[i](nn::upsample2x(h))));
  }
  return nn::tanh(head(h));
}

Discriminator Discriminator::create(nn::Store& store, const std::string& prefix,
                                    const CycleGanConfig& cfg) {
  Discriminator d;
  const int c = cfg.disc_channels;
  const int widths[5] = {3, c, 2 * c, 4 * c, 8 * c};
  const int strides[4] = {2, 2, 2, 1};
  for (int i = 0; i < 4; ++i) {
    const std::string name = prefix + "layer" + std::to_string(i);
    d.layers.push_back(nn::Conv2d::create(store, name, widths[i], widths[i + 1], 4, strides[i],
                                          1, i == 0, cfg.seed));
    if (i > 0) d.norms.push_back(nn::InstanceNorm::create(store, name + "_norm", widths[i + 1]));
  }
  d.head = nn::Conv2d::create(store, prefix + "head", 8 * c, 1, 4, 1, 1, true, cfg.seed, kInit);
  return d;
}

Variable Discriminator::operator()(const Variable& x) const {
  check_image_batch(x, "discriminator");
  Variable h = nn::leaky_relu(layers[0](x), 0.2f);
  for (std::size_t i = 1; i < layers.size(); ++i) {
    h = nn::leaky_relu(norms[i - 1](layers[i](h)), 0.2f);
  }
  return head(h);
}

std::string direction_name(Direction d) { return d == Direction::kOlder ? "older" : "younger"; }

Direction parse_direction(const std::string& name) {
  if (name == "older") return Direction::kOlder;
  if (name == "younger") return Direction::kYounger;
  fail(ErrorCode::kValidation, "direction must be 'older' or 'younger', got '" + name + "'");
}

CycleGan::CycleGan(CycleGanConfig config) : config_(std::move(config)) {
  config_.validate();
  g_ = Generator::create(store_, "G/", config_);
  f_ = Generator::create(store_, "F/", config_);
  d_a_ = Discriminator::create(store_, "D_A/", config_);
  d_b_ = Discriminator::create(store_, "D_B/", config_);
}

Tensor<float> CycleGan::generate(const Tensor<float>& x, Direction direction) const {
  const Variable in(x);
  return (direction == Direction::kOlder ? g_ : f_)(in).value();
}

void save_cyclegan(const std::string& path, const CycleGan& model) {
  nn::save_checkpoint(path, nn::export_parameters(model.store()));
  nlohmann::ordered_json j;
  j["kind"] = "cyclegan";
  j["config"] = nlohmann::json::parse(model.config().to_json());
  const std::string text = j.dump(2) + "\n";
  write_file(path + ".json",
             std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::unique_ptr<CycleGan> load_cyclegan(const std::string& path) {
  const auto bytes = read_file(path + ".json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (j.at("kind").get<std::string>() != "cyclegan") {
      fail(ErrorCode::kSchema, "checkpoint sidecar is not a cyclegan model");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("cyclegan sidecar: ") + e.what());
  }
  auto model = std::make_unique<CycleGan>(CycleGanConfig::from_json(j.at("config").dump()));
  nn::import_parameters(model->store(), nn::load_checkpoint(path));
  return model;
}

// ---------------------------------------------------------------------------
// Losses

Variable lsgan_discriminator_loss(const Variable& real_scores, const Variable& fake_scores) {
  return nn::scale(nn::add(nn::mse(real_scores, 1.0f), nn::mse(fake_scores, 0.0f)), 0.5f);
}

Variable lsgan_generator_loss(const Variable& fake_scores) { return nn::mse(fake_scores, 1.0f); }

double generator_objective(double adversarial, double cycle, double lambda) {
  return adversarial + lambda * cycle;
}

CycleLosses compute_losses(const ImageFn& g, const ImageFn& f, const ImageFn& d_a,
                           const ImageFn& d_b, const Variable& a, const Variable& b,
                           double lambda) {
  CycleLosses out;
  const Variable fake_b = g(a);
  const Variable fake_a = f(b);
  out.g_adv = lsgan_generator_loss(d_b(fake_b));
  out.f_adv = lsgan_generator_loss(d_a(fake_a));
  out.cycle_aba = nn::l1(f(fake_b), a);
  out.cycle_bab = nn::l1(g(fake_a), b);
  out.generator_total =
      nn::add(nn::add(out.g_adv, out.f_adv),
              nn::scale(nn::add(out.cycle_aba, out.cycle_bab), static_cast<float>(lambda)));
  out.d_a = lsgan_discriminator_loss(d_a(a), d_a(fake_a.detach()));
  out.d_b = lsgan_discriminator_loss(d_b(b), d_b(fake_b.detach()));
  return out;
}

CycleLosses compute_losses(const CycleGan& model, const Variable& a, const Variable& b) {
  return compute_losses([&](const Variable& x) { return model.g()(x); },
                        [&](const Variable& x) { return model.f()(x); },
                        [&](const Variable& x) { return model.d_a()(x); },
                        [&](const Variable& x) { return model.d_b()(x); }, a, b,
                        model.config().lambda_cycle);
}

bool LossEntry::finite() const {
  for (double v : {d_a, d_b, g, f, cycle_aba, cycle_bab}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string format_loss_report(const std::vector<LossEntry>& report) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch\td_a\td_b\tg\tf\tcycle_aba\tcycle_bab\n";
  for (const auto& e : report) {
    out << e.epoch << '\t' << e.d_a << '\t' << e.d_b << '\t' << e.g << '\t' << e.f << '\t'
        << e.cycle_aba << '\t' << e.cycle_bab << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Training

namespace {

Tensor<float> stack_domain(const std::vector<RgbSpectrogram>& images) {
  std::vector<const RgbSpectrogram*> ptrs;
  for (const auto& img : images) ptrs.push_back(&img);
  return images_to_tensor(ptrs);
}

Tensor<float> gather(const Tensor<float>& all, const std::vector<std::size_t>& rows) {
  const std::size_t per = 3 * static_cast<std::size_t>(kPlane);
  Tensor<float> out(Shape{static_cast<int>(rows.size()), 3, kImageSize, kImageSize});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(all.data() + rows[i] * per, per, out.data() + i * per);
  }
  return out;
}

std::vector<nn::Parameter<float>*> group_params(const nn::Store& store,
                                                std::initializer_list<const char*> prefixes) {
  std::vector<nn::Parameter<float>*> out;
  for (const char* p : prefixes) {
    const auto part = store.trainable(p);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace

CycleGanTrainer::CycleGanTrainer(CycleGan& model, const DomainPair& domains)
    : model_(model),
      domains_(domains),
      gen_opt_(group_params(model.store(), {"G/", "F/"}),
               nn::AdamConfig{model.config().learning_rate, model.config().beta1, 0.999, 1e-8}),
      disc_opt_(group_params(model.store(), {"D_A/", "D_B/"}),
                nn::AdamConfig{model.config().learning_rate, model.config().beta1, 0.999, 1e-8}) {
  if (domains.domain_a.empty() || domains.domain_b.empty()) {
    fail(ErrorCode::kValidation, "cyclegan: both domains need at least one image");
  }
  tensors_a_ = stack_domain(domains.domain_a);
  tensors_b_ = stack_domain(domains.domain_b);
}

LossEntry CycleGanTrainer::run_epoch() {
  ++epoch_;
  const CycleGanConfig& cfg = model_.config();
  const std::size_t na = domains_.domain_a.size();
  const std::size_t nb = domains_.domain_b.size();
  std::vector<std::size_t> order_a(na), order_b(nb);
  std::iota(order_a.begin(), order_a.end(), 0);
  std::iota(order_b.begin(), order_b.end(), 0);
  const Rng base = Rng(cfg.seed ^ 0x6379636cULL).split(static_cast<std::uint64_t>(epoch_));
  Rng ra = base.split(0), rb = base.split(1);
  ra.shuffle(std::span(order_a));
  rb.shuffle(std::span(order_b));

  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps = (std::max(na, nb) + bs - 1) / bs;
  LossEntry sum;
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<std::size_t> rows_a, rows_b;
    for (std::size_t i = 0; i < bs; ++i) {
      rows_a.push_back(order_a[(s * bs + i) % na]);
      rows_b.push_back(order_b[(s * bs + i) % nb]);
    }
    const Variable a(gather(tensors_a_, rows_a));
    const Variable b(gather(tensors_b_, rows_b));
    CycleLosses losses = compute_losses(model_, a, b);

    gen_opt_.zero_grad();
    nn::backward(losses.generator_total);
    gen_opt_.step();

    // The generator pass also left gradients on the discriminators.
    disc_opt_.zero_grad();
    Variable d_total = nn::add(losses.d_a, losses.d_b);
    nn::backward(d_total);
    disc_opt_.step();

    sum.d_a += losses.d_a.value().item();
    sum.d_b += losses.d_b.value().item();
    sum.g += losses.g_adv.value().item();
    sum.f += losses.f_adv.value().item();
    sum.cycle_aba += losses.cycle_aba.value().item();
    sum.cycle_bab += losses.cycle_bab.value().item();
  }
  const double n = static_cast<double>(steps);
  LossEntry e{epoch_, sum.d_a / n, sum.d_b / n, sum.g / n, sum.f / n, sum.cycle_aba / n,
              sum.cycle_bab / n};
  report_.push_back(e);
  return e;
}

void CycleGanTrainer::write_snapshots(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  char stem[32];
  std::snprintf(stem, sizeof stem, "epoch%03d", epoch_);
  const auto& cfg = domains_.domain_a.front().scale_config;
  const Tensor<float> old = model_.generate(image_to_tensor(domains_.domain_a.front()),
                                            Direction::kOlder);
  const Tensor<float> young = model_.generate(image_to_tensor(domains_.domain_b.front()),
                                              Direction::kYounger);
  const auto write = [&](const std::string& name, const Tensor<float>& t) {
    const auto png = save_png(tensor_to_image(t, 0, cfg));
    write_file((std::filesystem::path(dir) / name).string(), png);
  };
  write(std::string(stem) + "_G.png", old);
  write(std::string(stem) + "_F.png", young);
}

std::vector<LossEntry> CycleGanTrainer::run(int epochs, const std::string& snapshot_dir,
                                            const std::function<void(const LossEntry&)>& on_epoch) {
  const auto& snaps = model_.config().snapshot_epochs;
  for (int e = 0; e < epochs; ++e) {
    const LossEntry entry = run_epoch();
    if (!snapshot_dir.empty() && std::find(snaps.begin(), snaps.end(), epoch_) != snaps.end()) {
      write_snapshots(snapshot_dir);
    }
    if (on_epoch) on_epoch(entry);
  }
  return report_;
}

// ---------------------------------------------------------------------------
// Audio transform

TransformResult transform_audio_detailed(const CycleGan& model, const AudioClip& clip,
                                         Direction direction, int griffin_lim_iterations,
                                         const ScaleConfig& cfg) {
  cfg.validate();
  const AudioClip mono = resample(clip, kSampleRate);
  const auto segments = segment(mono);
  if (segments.empty()) {
    fail(ErrorCode::kValidation, "transform: clip is shorter than one 0.24 s segment");
  }
  TransformResult out;
  for (const auto& seg : segments) {
    out.input_images.push_back(encode_spectrogram(mel_spectrogram(seg), cfg));
  }
  std::vector<const RgbSpectrogram*> ptrs;
  for (const auto& img : out.input_images) ptrs.push_back(&img);
  // Instance normalization keeps samples independent, so one batch suffices.
  const Tensor<float> generated = model.generate(images_to_tensor(ptrs), direction);
  out.audio.sample_rate = kSampleRate;
  out.audio.samples.reserve(segments.size() * kSegmentSamples);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    out.output_images.push_back(tensor_to_image(generated, static_cast<int>(i), cfg));
    const AudioClip piece =
        griffin_lim(decode_spectrogram(out.output_images.back()), griffin_lim_iterations);
    out.audio.samples.insert(out.audio.samples.end(), piece.samples.begin(), piece.samples.end());
  }
  return out;
}

AudioClip transform_audio(const CycleGan& model, const AudioClip& clip, Direction direction,
                          int griffin_lim_iterations, const ScaleConfig& cfg) {
  return transform_audio_detailed(model, clip, direction, griffin_lim_iterations, cfg).audio;
}

// ---------------------------------------------------------------------------
// Toy domains

AudioClip toy_band_clip(int band, Rng& rng) {
  if (band < 1 || band >= kMelBands - 1) fail(ErrorCode::kRange, "toy band out of range");
  static const MelFilterbank bank = make_mel_filterbank();
  const double lo = bank.center_hz[band - 1], mid = bank.center_hz[band],
               hi = bank.center_hz[band + 1];
  // Stay within a third of the way to either neighbour's centre.
  const double hz = rng.uniform(mid - (mid - lo) / 3.0, mid + (hi - mid) / 3.0);
  const double amp = rng.uniform(0.1, 0.5);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  // Raised-cosine fades keep the clip edges from leaking broadband energy.
  constexpr int kFade = 480;
  AudioClip clip;
  clip.samples.resize(kSegmentSamples);
  for (int i = 0; i < kSegmentSamples; ++i) {
    const int edge = std::min(i, kSegmentSamples - 1 - i);
    const double gain =
        edge >= kFade ? 1.0 : 0.5 - 0.5 * std::cos(std::numbers::pi * edge / kFade);
    const double tone =
        gain * amp * std::sin(2.0 * std::numbers::pi * hz * i / kSampleRate + phase);
    clip.samples[i] = static_cast<float>(tone + rng.uniform(-1e-6, 1e-6));
  }
  return clip;
}

DomainPair make_toy_domains(int count, std::uint64_t seed) {
  if (count < 1) fail(ErrorCode::kRange, "toy domains need at least one image");
  DomainPair pair;
  const Rng base(seed);
  for (int i = 0; i < count; ++i) {
    Rng ra = base.split(2 * static_cast<std::uint64_t>(i));
    Rng rb = base.split(2 * static_cast<std::uint64_t>(i) + 1);
    pair.domain_a.push_back(encode_spectrogram(mel_spectrogram(toy_band_clip(kToyBandA, ra)), {}));
    pair.domain_b.push_back(encode_spectrogram(mel_spectrogram(toy_band_clip(kToyBandB, rb)), {}));
  }
  return pair;
}

int dominant_band(const MelSpectrogram& mel) {
  int best = 0;
  double best_power = -1.0;
  for (int band = 0; band < kMelBands; ++band) {
    double power = 0.0;
    for (int frame = 0; frame < kMelFrames; ++frame) power += mel.at(band, frame);
    if (power > best_power) {
      best_power = power;
      best = band;
    }
  }
  return best;
}

bool looks_like_domain_b(const MelSpectrogram& mel) {
  return dominant_band(mel) * 2 > kToyBandA + kToyBandB;
}

}  // namespace voxage
