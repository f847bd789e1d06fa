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

#include "voxage/codec.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <jpeglib.h>

#include "json.hpp"
#include "voxage/error.hpp"

namespace voxage {

double ScaleConfig::scale() const {
  return static_cast<double>(kMaxCode) /
         (std::log(amp_ceil) - std::log(amp_floor));
}

void ScaleConfig::validate() const {
  if (!(amp_floor > 0.0) || !(amp_ceil > amp_floor) ||
      !std::isfinite(amp_ceil)) {
    fail(ErrorCode::kRange, "scale config: need 0 < amp_floor < amp_ceil");
  }
  if (sample_rate <= 0) fail(ErrorCode::kRange, "scale config: bad sample rate");
}

std::string ScaleConfig::to_json() const {
  nlohmann::ordered_json j;
  j["amp_floor"] = amp_floor;
  j["amp_ceil"] = amp_ceil;
  j["scale"] = scale();
  j["sample_rate"] = sample_rate;
  return j.dump();
}

ScaleConfig ScaleConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("scale config: ") + e.what());
  }
  ScaleConfig cfg;
  try {
    cfg.amp_floor = j.at("amp_floor").get<double>();
    cfg.amp_ceil = j.at("amp_ceil").get<double>();
    cfg.sample_rate = j.value("sample_rate", kSampleRate);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("scale config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::uint32_t amplitude_to_code(double amplitude, const ScaleConfig& cfg) {
  if (!(amplitude <= cfg.amp_floor)) {
    if (amplitude >= cfg.amp_ceil) return kMaxCode;
  } else {
    return 0;  // also catches NaN
  }
  // The snap absorbs log/exp rounding so that re-encoding a decoded
  // amplitude lands on the same code instead of the one below it.
  constexpr double kSnap = 1e-6;
  const double s = std::floor(
      (std::log(amplitude) - std::log(cfg.amp_floor)) * cfg.scale() + kSnap);
  return static_cast<std::uint32_t>(std::clamp(s, 0.0, static_cast<double>(kMaxCode)));
}

double code_to_amplitude(std::uint32_t code, const ScaleConfig& cfg) {
  if (code >= kMaxCode) return cfg.amp_ceil;
  return cfg.amp_floor * std::exp(static_cast<double>(code) / cfg.scale());
}

Rgb encode_pixel(std::int64_t code) {
  if (code < 0 || code > static_cast<std::int64_t>(kMaxCode)) {
    fail(ErrorCode::kRange, "encode_pixel: code out of [0, 2^24 - 1]");
  }
  const auto s = static_cast<std::uint32_t>(code);
  return Rgb{static_cast<std::uint8_t>(s / 65536u),
             static_cast<std::uint8_t>((s % 65536u) / 256u),
             static_cast<std::uint8_t>(s % 256u)};
}

std::uint32_t decode_pixel(int red, int green, int blue) {
  if (red < 0 || red > 255 || green < 0 || green > 255 || blue < 0 ||
      blue > 255) {
    fail(ErrorCode::kRange, "decode_pixel: channel out of [0, 255]");
  }
  return static_cast<std::uint32_t>(red) * 65536u +
         static_cast<std::uint32_t>(green) * 256u +
         static_cast<std::uint32_t>(blue);
}

RgbSpectrogram encode_spectrogram(const MelSpectrogram& mel,
                                  const ScaleConfig& cfg) {
  cfg.validate();
  if (mel.values.size() != static_cast<std::size_t>(kMelBands) * kMelFrames) {
    fail(ErrorCode::kDimension, "encode_spectrogram: mel must be 128x128");
  }
  RgbSpectrogram img;
  img.scale_config = cfg;
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      img.at(y, x) = encode_pixel(amplitude_to_code(mel.at(y, x), cfg));
    }
  }
  return img;
}

MelSpectrogram decode_spectrogram(const RgbSpectrogram& img) {
  if (img.pixels.size() != static_cast<std::size_t>(kImageSize) * kImageSize) {
    fail(ErrorCode::kDimension, "decode_spectrogram: image must be 128x128");
  }
  MelSpectrogram mel;
  mel.sample_rate = img.scale_config.sample_rate;
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      mel.at(y, x) = code_to_amplitude(decode_pixel(img.at(y, x)), img.scale_config);
    }
  }
  return mel;
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.data.data(), 0,
                                 nullptr)) {
    fail(ErrorCode::kFormat, std::string("png encode: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.data.data(),
                                 0, nullptr)) {
    fail(ErrorCode::kFormat, std::string("png encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    fail(ErrorCode::kFormat, std::string("png decode: ") + png.message);
  }
  if (png.format != PNG_FORMAT_RGB) {
    png_image_free(&png);
    fail(ErrorCode::kFormat, "png decode: expected 8-bit RGB without alpha");
  }
  RgbImage image;
  image.width = static_cast<int>(png.width);
  image.height = static_cast<int>(png.height);
  image.data.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, image.data.data(), 0, nullptr)) {
    fail(ErrorCode::kFormat, std::string("png decode: ") + png.message);
  }
  return image;
}

namespace {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_quiet(j_common_ptr) {}

// Only trivially destructible locals live across setjmp here; the caller
// owns the pixel buffer.
bool decode_jpeg_raw(const std::uint8_t* data, std::size_t size,
                     std::vector<std::uint8_t>* pixels, int* width,
                     int* height, char* message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.output_message = jpeg_quiet;
  if (setjmp(err.jump)) {
    std::snprintf(message, JMSG_LENGTH_MAX, "%s", err.message);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data, static_cast<unsigned long>(size));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  *width = static_cast<int>(cinfo.output_width);
  *height = static_cast<int>(cinfo.output_height);
  pixels->resize(static_cast<std::size_t>(*width) * *height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels->data() +
                   static_cast<std::size_t>(cinfo.output_scanline) * *width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

}  // namespace

RgbImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  RgbImage image;
  char message[JMSG_LENGTH_MAX] = {0};
  if (!decode_jpeg_raw(bytes.data(), bytes.size(), &image.data, &image.width,
                       &image.height, message)) {
    fail(ErrorCode::kFormat, std::string("jpeg decode: ") + message);
  }
  return image;
}

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPngSig[] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::equal(kPngSig, kPngSig + 4, bytes.begin())) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 &&
      bytes[2] == 0xFF) {
    return decode_jpeg(bytes);
  }
  fail(ErrorCode::kFormat, "image: neither PNG nor JPEG");
}

RgbImage resize_image(const RgbImage& image, int width, int height) {
  if (image.width <= 0 || image.height <= 0 || width <= 0 || height <= 0) {
    fail(ErrorCode::kDimension, "resize: empty image");
  }
  if (image.width == width && image.height == height) return image;
  RgbImage out;
  out.width = width;
  out.height = height;
  out.data.resize(static_cast<std::size_t>(width) * height * 3);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        auto px = [&](int yy, int xx) {
          return static_cast<double>(
              image.data[(static_cast<std::size_t>(yy) * image.width + xx) * 3 + c]);
        };
        const double v = (1 - wy) * ((1 - wx) * px(y0, x0) + wx * px(y0, x1)) +
                         wy * ((1 - wx) * px(y1, x0) + wx * px(y1, x1));
        out.data[(static_cast<std::size_t>(y) * width + x) * 3 + c] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> save_png(const RgbSpectrogram& img) {
  RgbImage raster;
  raster.width = kImageSize;
  raster.height = kImageSize;
  raster.data.reserve(img.pixels.size() * 3);
  for (const Rgb& p : img.pixels) {
    raster.data.push_back(p.red);
    raster.data.push_back(p.green);
    raster.data.push_back(p.blue);
  }
  return encode_png(raster);
}

RgbSpectrogram load_png(std::span<const std::uint8_t> bytes,
                        const ScaleConfig& cfg) {
  const RgbImage raster = decode_png(bytes);
  if (raster.width != kImageSize || raster.height != kImageSize) {
    fail(ErrorCode::kDimension,
         "spectrogram png must be 128x128, got " + std::to_string(raster.width) +
             "x" + std::to_string(raster.height));
  }
  RgbSpectrogram img;
  img.scale_config = cfg;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = Rgb{raster.data[3 * i], raster.data[3 * i + 1],
                        raster.data[3 * i + 2]};
  }
  return img;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void write_scale_sidecar(const std::string& directory, const ScaleConfig& cfg) {
  const std::string text = cfg.to_json() + "\n";
  write_file((std::filesystem::path(directory) / kScaleSidecar).string(),
             std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                       text.size()));
}

ScaleConfig read_scale_sidecar(const std::string& directory) {
  const auto bytes =
      read_file((std::filesystem::path(directory) / kScaleSidecar).string());
  return ScaleConfig::from_json(std::string(bytes.begin(), bytes.end()));
}

}  // namespace voxage
