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

#ifndef VOXAGE_AUDIO_HPP_
#define VOXAGE_AUDIO_HPP_

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace voxage {

inline constexpr int kSampleRate = 16000;
inline constexpr double kSegmentSeconds = 0.24;
inline constexpr int kSegmentSamples = 3840;  // 0.24 s at 16 kHz
inline constexpr int kMelBands = 128;
inline constexpr int kMelFrames = 128;

/// Mono PCM audio. Samples are nominally in [-1, 1] and always finite.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Parses a RIFF/WAVE PCM16 file. Stereo is averaged to mono.
AudioClip load_wav(std::span<const std::uint8_t> bytes);
AudioClip read_wav_file(const std::string& path);

/// Encodes 16-bit mono PCM, saturating at the int16 range.
std::vector<std::uint8_t> save_wav(const AudioClip& clip);
void write_wav_file(const AudioClip& clip, const std::string& path);

/// Linear-interpolation resampling; identity when rates already match.
AudioClip resample(const AudioClip& clip, int target_rate);

/// Splits into consecutive segments of round(interval * rate) samples; a
/// trailing remainder shorter than one segment is dropped.
std::vector<AudioClip> segment(const AudioClip& clip,
                               double interval_seconds = kSegmentSeconds);

enum class WindowType { kHann, kRectangular };

struct StftConfig {
  int fft_size = 512;
  int hop = 30;
  WindowType window = WindowType::kHann;
  bool center_pad = true;

  void validate() const;
};

std::vector<double> make_window(WindowType type, int size);

/// bins[t * num_bins + k] holds bin k of frame t.
struct ComplexSpectrogram {
  StftConfig config;
  int num_frames = 0;
  int num_bins = 0;
  std::vector<std::complex<double>> bins;

  std::complex<double>& at(int frame, int bin) {
    return bins[static_cast<std::size_t>(frame) * num_bins + bin];
  }
  const std::complex<double>& at(int frame, int bin) const {
    return bins[static_cast<std::size_t>(frame) * num_bins + bin];
  }
};

/// In-place radix-2 complex FFT; size must be a power of two.
void fft_inplace(std::span<std::complex<double>> data, bool inverse = false);

/// Short-time Fourier transform. With center_pad the signal is zero-padded
/// by fft_size/2 on both sides so frame t is centered on sample t*hop.
/// max_frames > 0 truncates the frame count.
ComplexSpectrogram stft(std::span<const double> signal,
                        const StftConfig& config, int max_frames = 0);
ComplexSpectrogram stft(const AudioClip& clip, const StftConfig& config,
                        int max_frames = 0);

/// Least-squares (weighted overlap-add) inverse of stft() for a signal of
/// the given length that is zero outside [0, length).
std::vector<double> istft(const ComplexSpectrogram& spec, int length);

/// 128 bands x 128 frames of mel power; values(band, frame).
struct MelSpectrogram {
  int sample_rate = kSampleRate;
  std::vector<double> values =
      std::vector<double>(static_cast<std::size_t>(kMelBands) * kMelFrames);

  double& at(int band, int frame) {
    return values[static_cast<std::size_t>(band) * kMelFrames + frame];
  }
  double at(int band, int frame) const {
    return values[static_cast<std::size_t>(band) * kMelFrames + frame];
  }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular HTK-mel filters over the one-sided spectrum, each normalized
/// to unit peak. weights[band * num_bins + bin].
struct MelFilterbank {
  int num_bands = 0;
  int num_bins = 0;
  std::vector<double> center_hz;
  std::vector<double> weights;

  double weight(int band, int bin) const {
    return weights[static_cast<std::size_t>(band) * num_bins + bin];
  }
};

MelFilterbank make_mel_filterbank(int num_bands = kMelBands,
                                  int fft_size = 512,
                                  int sample_rate = kSampleRate,
                                  double low_hz = 0.0, double high_hz = 8000.0);

/// Mel power spectrogram of exactly one segment (3840 samples at 16 kHz).
MelSpectrogram mel_spectrogram(const AudioClip& clip);

/// Called once per Griffin-Lim iteration with the spectral convergence
/// || |STFT(x)| - M || / || M || of the current estimate.
using ConvergenceCallback = std::function<void(int iteration, double error)>;

/// Inverts the mel filterbank (transpose then clamp), then estimates phase
/// from zero initial phase. Returns one segment of audio.
AudioClip griffin_lim(const MelSpectrogram& mel, int iterations = 32,
                      const ConvergenceCallback& on_iteration = {});

/// Linear magnitude estimate used as the Griffin-Lim target, indexed
/// [frame * num_bins + bin].
std::vector<double> mel_to_linear_magnitude(const MelSpectrogram& mel,
                                            const MelFilterbank& bank);

}  // namespace voxage

#endif  // VOXAGE_AUDIO_HPP_
