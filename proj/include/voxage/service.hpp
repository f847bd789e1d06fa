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

// HTTP inference service: voice transform and age prediction over loaded
// checkpoints. Handlers are plain functions over a parsed form so they can be
// exercised without a socket; HttpServer wires them to cpp-httplib.

#ifndef VOXAGE_SERVICE_HPP_
#define VOXAGE_SERVICE_HPP_

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "voxage/cyclegan.hpp"
#include "voxage/models.hpp"

namespace httplib {
class Server;
}

namespace voxage {

inline constexpr const char* kCheckpointDirEnv = "VOXAGE_CHECKPOINT_DIR";

// File names looked up inside the checkpoint directory.
inline constexpr const char* kCycleGanFile = "cyclegan.ckpt";
inline constexpr const char* kVannAudioFile = "vann_audio.ckpt";
inline constexpr const char* kVannAvFile = "vann_av.ckpt";
inline constexpr const char* kVannVisualFile = "vann_visual.ckpt";

struct ServiceOptions {
  std::size_t max_upload_bytes = 2 * 1024 * 1024;
  double max_seconds = 30.0;
  int griffin_lim_iterations = 32;
};

/// One multipart field (or the raw body under "audio").
struct FormPart {
  std::string data;
  std::string filename;
  std::string content_type;
};
using Form = std::map<std::string, FormPart>;

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Error body: {"error": {"code": ..., "message": ...}}.
Response error_response(int status, const std::string& code,
                        const std::string& message);

enum class ClassifierSlot { kAudio, kAudioVisual, kVisual };
std::string slot_name(ClassifierSlot slot);

class Service {
 public:
  explicit Service(ServiceOptions options = {});

  /// Loads whichever of the known checkpoint files exist in `dir`.
  void load_directory(const std::string& dir);

  void set_cyclegan(std::unique_ptr<CycleGan> model, std::string source = "");
  /// The model's modality must fit the slot (audio / av-cat or av-mfb / visual).
  void set_classifier(ClassifierSlot slot, LoadedVann loaded,
                      std::string source = "");

  bool has_cyclegan() const { return cyclegan_ != nullptr; }
  bool has_classifier(ClassifierSlot slot) const;
  const ServiceOptions& options() const { return options_; }

  /// Fields: audio (WAV), direction, return_spectrograms.
  Response transform(const Form& form) const;
  /// Fields: audio (WAV), face (PNG/JPEG), both optional but not both absent.
  Response predict(const Form& form) const;
  Response health() const;
  Response model_info() const;

 private:
  struct Classifier {
    LoadedVann loaded;
    std::string source;
    // predict_proba builds graph nodes on the model; one request at a time.
    std::unique_ptr<std::mutex> lock;
  };

  const Classifier* classifier(ClassifierSlot slot) const;

  ServiceOptions options_;
  std::unique_ptr<CycleGan> cyclegan_;
  std::string cyclegan_source_;
  std::map<ClassifierSlot, Classifier> classifiers_;
};

/// Serves /api/transform, /api/predict, /api/health and /api/model-info.
class HttpServer {
 public:
  explicit HttpServer(const Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and returns the port; port 0 picks a free one.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  /// run() on a background thread; returns once the server accepts.
  void start();
  void stop();

 private:
  const Service& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace voxage

#endif  // VOXAGE_SERVICE_HPP_
