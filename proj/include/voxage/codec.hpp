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

// Log-amplitude spectrogram images. Each cell's amplitude becomes a 24-bit
// code S = floor((ln a - ln floor) * scale), stored big-end-first across the
// red, green and blue bytes of one pixel.

#ifndef VOXAGE_CODEC_HPP_
#define VOXAGE_CODEC_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxage/audio.hpp"

namespace voxage {

inline constexpr std::uint32_t kMaxCode = (1u << 24) - 1;  // 16777215
inline constexpr int kImageSize = 128;

struct ScaleConfig {
  double amp_floor = 1e-5;
  double amp_ceil = 1e5;
  int sample_rate = kSampleRate;

  /// Codes per natural-log unit: kMaxCode / (ln ceil - ln floor).
  double scale() const;
  void validate() const;

  std::string to_json() const;
  static ScaleConfig from_json(const std::string& text);
};

struct Rgb {
  std::uint8_t red = 0;
  std::uint8_t green = 0;
  std::uint8_t blue = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 128x128 image; row y is mel band y, column x is frame x.
struct RgbSpectrogram {
  ScaleConfig scale_config;
  std::vector<Rgb> pixels =
      std::vector<Rgb>(static_cast<std::size_t>(kImageSize) * kImageSize);

  Rgb& at(int y, int x) {
    return pixels[static_cast<std::size_t>(y) * kImageSize + x];
  }
  const Rgb& at(int y, int x) const {
    return pixels[static_cast<std::size_t>(y) * kImageSize + x];
  }
};

std::uint32_t amplitude_to_code(double amplitude, const ScaleConfig& cfg);
double code_to_amplitude(std::uint32_t code, const ScaleConfig& cfg);

Rgb encode_pixel(std::int64_t code);
std::uint32_t decode_pixel(int red, int green, int blue);
inline std::uint32_t decode_pixel(const Rgb& p) {
  return decode_pixel(p.red, p.green, p.blue);
}

RgbSpectrogram encode_spectrogram(const MelSpectrogram& mel,
                                  const ScaleConfig& cfg);
MelSpectrogram decode_spectrogram(const RgbSpectrogram& img);

/// Generic 8-bit RGB raster used for PNG I/O and face crops.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB, row-major
};

std::vector<std::uint8_t> encode_png(const RgbImage& image);
/// Accepts 8-bit RGB PNGs only; anything else is a format error.
RgbImage decode_png(std::span<const std::uint8_t> bytes);
/// Baseline JPEG (RGB or grayscale expanded to RGB).
RgbImage decode_jpeg(std::span<const std::uint8_t> bytes);
/// Dispatches on the file signature (PNG or JPEG).
RgbImage decode_image(std::span<const std::uint8_t> bytes);
/// Bilinear resize.
RgbImage resize_image(const RgbImage& image, int width, int height);

std::vector<std::uint8_t> save_png(const RgbSpectrogram& img);
/// Errors: malformed or non-RGB PNG -> format; not 128x128 -> dimension.
RgbSpectrogram load_png(std::span<const std::uint8_t> bytes,
                        const ScaleConfig& cfg = {});

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

/// Sidecar metadata written next to every image set.
inline constexpr const char* kScaleSidecar = "scale.json";
void write_scale_sidecar(const std::string& directory, const ScaleConfig& cfg);
ScaleConfig read_scale_sidecar(const std::string& directory);

}  // namespace voxage

#endif  // VOXAGE_CODEC_HPP_
