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

// Writes the files the command-line tests run against:
//   <dir>/tone.wav       1 s, 16 kHz sine
//   <dir>/short.wav      0.1 s
//   <dir>/corpus/...     4 speakers x 3 videos x 2 segments, with faces

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "voxage/codec.hpp"

namespace fs = std::filesystem;
using namespace voxage;

namespace {

AudioClip tone(double seconds, double hz) {
  AudioClip clip;
  const int n = static_cast<int>(std::lround(seconds * kSampleRate));
  for (int i = 0; i < n; ++i) {
    clip.samples.push_back(
        static_cast<float>(0.3 * std::sin(2 * std::numbers::pi * hz * i / kSampleRate)));
  }
  return clip;
}

void text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_fixtures <dir>\n");
    return 2;
  }
  const fs::path dir = argv[1];
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_wav_file(tone(1.0, 220.0), (dir / "tone.wav").string());
  write_wav_file(tone(0.1, 220.0), (dir / "short.wav").string());

  // Birth years spread the speakers over both A/B classes and the middle.
  const int birth_years[] = {1998, 1990, 1960, 1950};
  RgbImage face{16, 16, std::vector<std::uint8_t>(16 * 16 * 3, 128)};
  for (int s = 0; s < 4; ++s) {
    const std::string id = "spk" + std::to_string(s);
    const fs::path sdir = dir / "corpus" / id;
    fs::create_directories(sdir);
    text(sdir / "speaker.json", "{\"name\": \"Speaker " + std::to_string(s) +
                                    "\", \"gender\": \"" + (s % 2 ? "male" : "female") +
                                    "\", \"birth_date\": \"" +
                                    std::to_string(birth_years[s]) + "-03-01\"}");
    for (int v = 0; v < 3; ++v) {
      const fs::path vdir = sdir / ("vid" + std::to_string(v));
      fs::create_directories(vdir / "segments");
      fs::create_directories(vdir / "faces");
      text(vdir / "video.json", "{\"title\": \"Interview\", \"description\": \"\","
                                " \"published\": \"2019-0" + std::to_string(v + 1) +
                                    "-10\"}");
      for (int k = 0; k < 2; ++k) {
        write_wav_file(tone(0.5, 200.0 + 100.0 * s + 10.0 * k),
                       (vdir / "segments" / ("seg" + std::to_string(k) + ".wav")).string());
      }
      face.data[0] = static_cast<std::uint8_t>(s * 40 + v);
      const auto png = encode_png(face);
      write_file((vdir / "faces" / "face0.png").string(), png);
    }
  }
  return 0;
}
