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

#include "voxage/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>

#include "voxage/error.hpp"

namespace voxage {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back((v >> 8) & 0xFF);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

const std::vector<std::complex<double>>& twiddles(std::size_t n) {
  thread_local std::map<std::size_t, std::vector<std::complex<double>>> cache;
  auto& table = cache[n];
  if (table.empty()) {
    table.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      table[k] = std::polar(1.0, -2.0 * std::numbers::pi *
                                     static_cast<double>(k) /
                                     static_cast<double>(n));
    }
  }
  return table;
}

const MelFilterbank& default_filterbank() {
  static const MelFilterbank bank = make_mel_filterbank();
  return bank;
}

}  // namespace

AudioClip load_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) fail(ErrorCode::kFormat, "wav: truncated header");
  if (!tag_is(bytes, 0, "RIFF")) {
    fail(ErrorCode::kFormat, "wav: missing RIFF magic");
  }
  if (!tag_is(bytes, 8, "WAVE")) {
    fail(ErrorCode::kFormat, "wav: missing WAVE form type");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (tag_is(bytes, pos, "fmt ")) {
      if (chunk_size < 16 || body + 16 > bytes.size()) {
        fail(ErrorCode::kFormat, "wav: fmt chunk too small");
      }
      std::uint16_t format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (format == kFormatExtensible && chunk_size >= 40 &&
          body + 26 <= bytes.size()) {
        format = read_u16(bytes, body + 24);
      }
      if (format != kFormatPcm) {
        fail(ErrorCode::kUnsupported,
             "wav: only PCM is supported (format tag " +
                 std::to_string(format) + ")");
      }
      if (bits != 16) {
        fail(ErrorCode::kUnsupported,
             "wav: only 16-bit samples are supported, got " +
                 std::to_string(bits));
      }
      if (channels != 1 && channels != 2) {
        fail(ErrorCode::kUnsupported, "wav: only mono or stereo is supported");
      }
      if (rate == 0) fail(ErrorCode::kFormat, "wav: zero sample rate");
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      if (!have_fmt) fail(ErrorCode::kFormat, "wav: data chunk before fmt");
      // Tolerate writers that leave the size field unset or overlong.
      const std::size_t available = bytes.size() - body;
      const std::size_t data_size =
          std::min<std::size_t>(chunk_size, available);
      const std::size_t frame_bytes = 2u * channels;
      const std::size_t frames = data_size / frame_bytes;
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      clip.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const auto raw = static_cast<std::int16_t>(
              read_u16(bytes, body + i * frame_bytes + 2 * c));
          acc += raw / 32768.0;
        }
        clip.samples[i] = static_cast<float>(acc / channels);
      }
      return clip;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  fail(ErrorCode::kFormat, have_fmt ? "wav: missing data chunk"
                                    : "wav: missing fmt chunk");
}

AudioClip read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_wav(bytes);
}

std::vector<std::uint8_t> save_wav(const AudioClip& clip) {
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (float s : clip.samples) {
    const double scaled = std::round(static_cast<double>(s) * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

void write_wav_file(const AudioClip& clip, const std::string& path) {
  const auto bytes = save_wav(clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) fail(ErrorCode::kRange, "resample: rate must be > 0");
  if (clip.sample_rate == target_rate || clip.samples.empty()) {
    AudioClip out = clip;
    out.sample_rate = target_rate;
    return out;
  }
  const double ratio = static_cast<double>(clip.sample_rate) / target_rate;
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(clip.samples.size()) / ratio));
  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  const std::size_t last = clip.samples.size() - 1;
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto left = std::min(static_cast<std::size_t>(pos), last);
    const std::size_t right = std::min(left + 1, last);
    const double frac = pos - static_cast<double>(left);
    out.samples[i] = static_cast<float>(clip.samples[left] * (1.0 - frac) +
                                        clip.samples[right] * frac);
  }
  return out;
}

std::vector<AudioClip> segment(const AudioClip& clip, double interval_seconds) {
  if (interval_seconds <= 0.0) {
    fail(ErrorCode::kRange, "segment: interval must be positive");
  }
  const auto length = static_cast<std::size_t>(
      std::llround(interval_seconds * clip.sample_rate));
  std::vector<AudioClip> out;
  if (length == 0) return out;
  const std::size_t count = clip.samples.size() / length;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    AudioClip seg;
    seg.sample_rate = clip.sample_rate;
    const auto begin = clip.samples.begin() + static_cast<std::ptrdiff_t>(i * length);
    seg.samples.assign(begin, begin + static_cast<std::ptrdiff_t>(length));
    out.push_back(std::move(seg));
  }
  return out;
}

void StftConfig::validate() const {
  if (!is_power_of_two(fft_size)) {
    fail(ErrorCode::kRange, "stft: fft_size must be a power of two");
  }
  if (hop <= 0 || hop > fft_size) {
    fail(ErrorCode::kRange, "stft: hop must be in (0, fft_size]");
  }
}

std::vector<double> make_window(WindowType type, int size) {
  std::vector<double> w(static_cast<std::size_t>(size), 1.0);
  if (type == WindowType::kHann) {
    // Periodic Hann, the usual choice for overlap-add analysis.
    for (int n = 0; n < size; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / size);
    }
  }
  return w;
}

void fft_inplace(std::span<std::complex<double>> data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  if ((n & (n - 1)) != 0) fail(ErrorCode::kRange, "fft: size not a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const auto& tw = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    const std::size_t half = len / 2;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const std::complex<double> w =
            inverse ? std::conj(tw[k * step]) : tw[k * step];
        const std::complex<double> u = data[start + k];
        const std::complex<double> v = data[start + k + half] * w;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& x : data) x *= scale;
  }
}

ComplexSpectrogram stft(std::span<const double> signal,
                        const StftConfig& config, int max_frames) {
  config.validate();
  if (signal.empty()) fail(ErrorCode::kDimension, "stft: empty signal");
  const int n_fft = config.fft_size;
  const int pad = config.center_pad ? n_fft / 2 : 0;
  const auto padded_len = static_cast<long>(signal.size()) + 2L * pad;
  long frames = padded_len >= n_fft ? 1 + (padded_len - n_fft) / config.hop : 1;
  if (max_frames > 0) frames = std::min<long>(frames, max_frames);

  ComplexSpectrogram spec;
  spec.config = config;
  spec.num_frames = static_cast<int>(frames);
  spec.num_bins = n_fft / 2 + 1;
  spec.bins.resize(static_cast<std::size_t>(frames) * spec.num_bins);

  const auto window = make_window(config.window, n_fft);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(n_fft));
  const long len = static_cast<long>(signal.size());
  for (long t = 0; t < frames; ++t) {
    const long origin = t * config.hop - pad;
    for (int j = 0; j < n_fft; ++j) {
      const long idx = origin + j;
      const double x = (idx >= 0 && idx < len) ? signal[idx] : 0.0;
      buf[j] = x * window[j];
    }
    fft_inplace(buf);
    std::copy_n(buf.begin(), spec.num_bins,
                spec.bins.begin() + t * spec.num_bins);
  }
  return spec;
}

ComplexSpectrogram stft(const AudioClip& clip, const StftConfig& config,
                        int max_frames) {
  std::vector<double> signal(clip.samples.begin(), clip.samples.end());
  return stft(signal, config, max_frames);
}

std::vector<double> istft(const ComplexSpectrogram& spec, int length) {
  const StftConfig& config = spec.config;
  config.validate();
  const int n_fft = config.fft_size;
  const int pad = config.center_pad ? n_fft / 2 : 0;
  const auto window = make_window(config.window, n_fft);

  std::vector<double> acc(static_cast<std::size_t>(length), 0.0);
  std::vector<double> norm(static_cast<std::size_t>(length), 0.0);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(n_fft));
  for (int t = 0; t < spec.num_frames; ++t) {
    for (int k = 0; k < spec.num_bins; ++k) buf[k] = spec.at(t, k);
    // Hermitian completion of the one-sided spectrum.
    for (int k = spec.num_bins; k < n_fft; ++k) buf[k] = std::conj(buf[n_fft - k]);
    buf[0] = buf[0].real();
    buf[n_fft / 2] = buf[n_fft / 2].real();
    fft_inplace(buf, /*inverse=*/true);
    const long origin = static_cast<long>(t) * config.hop - pad;
    for (int j = 0; j < n_fft; ++j) {
      const long idx = origin + j;
      if (idx < 0 || idx >= length) continue;
      acc[idx] += buf[j].real() * window[j];
      norm[idx] += window[j] * window[j];
    }
  }
  for (int i = 0; i < length; ++i) {
    acc[i] = norm[i] > 1e-12 ? acc[i] / norm[i] : 0.0;
  }
  return acc;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank make_mel_filterbank(int num_bands, int fft_size, int sample_rate,
                                  double low_hz, double high_hz) {
  if (num_bands <= 0 || !is_power_of_two(fft_size) || sample_rate <= 0 ||
      !(high_hz > low_hz) || low_hz < 0.0) {
    fail(ErrorCode::kRange, "mel filterbank: invalid parameters");
  }
  MelFilterbank bank;
  bank.num_bands = num_bands;
  bank.num_bins = fft_size / 2 + 1;
  bank.weights.assign(static_cast<std::size_t>(num_bands) * bank.num_bins, 0.0);
  bank.center_hz.resize(num_bands);

  const double mel_lo = hz_to_mel(low_hz);
  const double mel_hi = hz_to_mel(high_hz);
  std::vector<double> edges(static_cast<std::size_t>(num_bands) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      (num_bands + 1));
  }
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  for (int b = 0; b < num_bands; ++b) {
    const double left = edges[b];
    const double center = edges[b + 1];
    const double right = edges[b + 2];
    bank.center_hz[b] = center;
    double peak = 0.0;
    for (int k = 0; k < bank.num_bins; ++k) {
      const double f = k * bin_hz;
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      const double w = std::max(0.0, std::min(rise, fall));
      bank.weights[static_cast<std::size_t>(b) * bank.num_bins + k] = w;
      peak = std::max(peak, w);
    }
    if (peak > 0.0) {
      for (int k = 0; k < bank.num_bins; ++k) {
        bank.weights[static_cast<std::size_t>(b) * bank.num_bins + k] /= peak;
      }
    } else {
      // Filters narrower than the bin spacing catch no bin; they take the
      // bin nearest their center instead of staying empty.
      const int nearest = std::clamp(static_cast<int>(std::lround(center / bin_hz)),
                                     0, bank.num_bins - 1);
      bank.weights[static_cast<std::size_t>(b) * bank.num_bins + nearest] = 1.0;
    }
  }
  return bank;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip) {
  if (clip.sample_rate != kSampleRate) {
    fail(ErrorCode::kDimension,
         "mel_spectrogram: expected 16000 Hz, got " +
             std::to_string(clip.sample_rate));
  }
  if (clip.samples.size() != static_cast<std::size_t>(kSegmentSamples)) {
    fail(ErrorCode::kDimension,
         "mel_spectrogram: expected one 3840-sample segment, got " +
             std::to_string(clip.samples.size()));
  }
  const StftConfig config;
  const ComplexSpectrogram spec = stft(clip, config, kMelFrames);
  const MelFilterbank& bank = default_filterbank();

  MelSpectrogram mel;
  mel.sample_rate = clip.sample_rate;
  std::vector<double> power(static_cast<std::size_t>(spec.num_bins));
  for (int t = 0; t < spec.num_frames; ++t) {
    for (int k = 0; k < spec.num_bins; ++k) power[k] = std::norm(spec.at(t, k));
    for (int b = 0; b < kMelBands; ++b) {
      double acc = 0.0;
      for (int k = 0; k < spec.num_bins; ++k) acc += bank.weight(b, k) * power[k];
      mel.at(b, t) = acc;
    }
  }
  return mel;
}

std::vector<double> mel_to_linear_magnitude(const MelSpectrogram& mel,
                                            const MelFilterbank& bank) {
  // Transpose of the filterbank, with each band's power spread as a density
  // over its filter area and each bin normalized by its total filter weight.
  std::vector<double> area(static_cast<std::size_t>(bank.num_bands), 0.0);
  std::vector<double> coverage(static_cast<std::size_t>(bank.num_bins), 0.0);
  for (int b = 0; b < bank.num_bands; ++b) {
    for (int k = 0; k < bank.num_bins; ++k) {
      area[b] += bank.weight(b, k);
      coverage[k] += bank.weight(b, k);
    }
  }
  std::vector<double> magnitude(static_cast<std::size_t>(kMelFrames) * bank.num_bins, 0.0);
  for (int t = 0; t < kMelFrames; ++t) {
    for (int k = 0; k < bank.num_bins; ++k) {
      if (coverage[k] <= 0.0) continue;
      double acc = 0.0;
      for (int b = 0; b < bank.num_bands; ++b) {
        const double w = bank.weight(b, k);
        if (w > 0.0) acc += w * mel.at(b, t) / area[b];
      }
      magnitude[static_cast<std::size_t>(t) * bank.num_bins + k] =
          std::sqrt(std::max(0.0, acc / coverage[k]));
    }
  }
  return magnitude;
}

AudioClip griffin_lim(const MelSpectrogram& mel, int iterations,
                      const ConvergenceCallback& on_iteration) {
  if (iterations < 1) fail(ErrorCode::kRange, "griffin_lim: iterations must be >= 1");
  const StftConfig config;
  const MelFilterbank& bank = default_filterbank();
  const std::vector<double> target = mel_to_linear_magnitude(mel, bank);

  double target_norm = 0.0;
  for (double m : target) target_norm += m * m;
  target_norm = std::sqrt(target_norm);

  ComplexSpectrogram estimate;
  estimate.config = config;
  estimate.num_frames = kMelFrames;
  estimate.num_bins = bank.num_bins;
  estimate.bins.assign(target.begin(), target.end());

  std::vector<double> signal = istft(estimate, kSegmentSamples);
  for (int it = 1; it <= iterations; ++it) {
    const ComplexSpectrogram rebuilt = stft(signal, config, kMelFrames);
    double err = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      const double mag = std::abs(rebuilt.bins[i]);
      err += (mag - target[i]) * (mag - target[i]);
      estimate.bins[i] = mag > 1e-12 ? target[i] * (rebuilt.bins[i] / mag)
                                     : std::complex<double>(target[i], 0.0);
    }
    if (on_iteration) {
      on_iteration(it, target_norm > 0.0 ? std::sqrt(err) / target_norm : 0.0);
    }
    signal = istft(estimate, kSegmentSamples);
  }

  AudioClip clip;
  clip.sample_rate = mel.sample_rate;
  clip.samples.resize(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) {
    clip.samples[i] = static_cast<float>(signal[i]);
  }
  return clip;
}

}  // namespace voxage
