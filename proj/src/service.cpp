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

#include "voxage/service.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <span>

#include "httplib.h"
#include "json.hpp"
#include "voxage/error.hpp"

namespace voxage {

namespace {

using nlohmann::json;

Response json_response(const json& j, int status = 200) {
  return {status, "application/json", j.dump()};
}

std::span<const std::uint8_t> bytes_of(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string to_string(const std::vector<std::uint8_t>& v) {
  return std::string(v.begin(), v.end());
}

std::string seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f s", s);
  return buf;
}

std::string base64(const std::vector<std::uint8_t>& v) {
  return httplib::detail::base64_encode(to_string(v));
}

bool truthy(const std::string& s) {
  return s == "1" || s == "true" || s == "yes" || s == "on";
}

const FormPart* field(const Form& form, const std::string& name) {
  auto it = form.find(name);
  if (it == form.end() || it->second.data.empty()) return nullptr;
  return &it->second;
}

// Segments laid side by side, left to right in time order.
RgbImage tile(const std::vector<RgbSpectrogram>& images) {
  RgbImage out;
  out.width = kImageSize * static_cast<int>(images.size());
  out.height = kImageSize;
  out.data.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (int y = 0; y < kImageSize; ++y) {
      for (int x = 0; x < kImageSize; ++x) {
        const Rgb& p = images[i].at(y, x);
        const std::size_t at =
            (static_cast<std::size_t>(y) * out.width + i * kImageSize + x) * 3;
        out.data[at] = p.red;
        out.data[at + 1] = p.green;
        out.data[at + 2] = p.blue;
      }
    }
  }
  return out;
}

// Either a decoded 16 kHz clip or the error to return.
struct AudioInput {
  AudioClip clip;
  std::optional<Response> error;
};

AudioInput read_audio(const FormPart& part, const ServiceOptions& opt) {
  AudioInput in;
  try {
    in.clip = resample(load_wav(bytes_of(part.data)), kSampleRate);
  } catch (const Error& e) {
    in.error = error_response(400, "invalid_audio",
                              std::string("audio is not a readable WAV file: ") +
                                  e.what());
    return in;
  }
  if (in.clip.duration() > opt.max_seconds) {
    in.error = error_response(
        413, "clip_too_long",
        "clip lasts " + seconds(in.clip.duration()) + "; limit is " + seconds(opt.max_seconds));
  } else if (in.clip.size() < static_cast<std::size_t>(kSegmentSamples)) {
    in.error = error_response(
        422, "clip_too_short",
        "clip lasts " + seconds(in.clip.duration()) + "; at least " +
            seconds(kSegmentSeconds) + " is required");
  }
  return in;
}

std::optional<Response> check_size(const Form& form, const ServiceOptions& opt) {
  std::size_t total = 0;
  for (const auto& [name, part] : form) total += part.data.size();
  if (total > opt.max_upload_bytes) {
    return error_response(413, "payload_too_large",
                          "upload exceeds " + std::to_string(opt.max_upload_bytes) +
                              " bytes");
  }
  return std::nullopt;
}

json vann_info(const LoadedVann& v, const std::string& source) {
  return {{"source", source},
          {"scheme", v.scheme},
          {"modality", modality_name(v.model->config().modality)},
          {"labels", scheme_labels(parse_scheme(v.scheme))},
          {"config", json::parse(v.model->config().to_json())}};
}

}  // namespace

Response error_response(int status, const std::string& code,
                        const std::string& message) {
  return json_response({{"error", {{"code", code}, {"message", message}}}}, status);
}

std::string slot_name(ClassifierSlot slot) {
  switch (slot) {
    case ClassifierSlot::kAudio: return "audio";
    case ClassifierSlot::kAudioVisual: return "audio_visual";
    case ClassifierSlot::kVisual: return "visual";
  }
  return "?";
}

Service::Service(ServiceOptions options) : options_(options) {}

void Service::load_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorCode::kIo, "no checkpoint directory " + dir);
  const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  if (fs::exists(path(kCycleGanFile))) {
    set_cyclegan(load_cyclegan(path(kCycleGanFile)), path(kCycleGanFile));
  }
  const std::pair<ClassifierSlot, const char*> slots[] = {
      {ClassifierSlot::kAudio, kVannAudioFile},
      {ClassifierSlot::kAudioVisual, kVannAvFile},
      {ClassifierSlot::kVisual, kVannVisualFile}};
  for (const auto& [slot, name] : slots) {
    if (fs::exists(path(name))) set_classifier(slot, load_vann(path(name)), path(name));
  }
}

void Service::set_cyclegan(std::unique_ptr<CycleGan> model, std::string source) {
  cyclegan_ = std::move(model);
  cyclegan_source_ = std::move(source);
}

void Service::set_classifier(ClassifierSlot slot, LoadedVann loaded,
                             std::string source) {
  if (!loaded.model) fail(ErrorCode::kValidation, "empty classifier");
  const Modality m = loaded.model->config().modality;
  const bool fits = (slot == ClassifierSlot::kAudio && m == Modality::kAudio) ||
                    (slot == ClassifierSlot::kVisual && m == Modality::kVisual) ||
                    (slot == ClassifierSlot::kAudioVisual &&
                     (m == Modality::kAvCat || m == Modality::kAvMfb));
  if (!fits) {
    fail(ErrorCode::kValidation, "a " + modality_name(m) +
                                     " model cannot serve the " + slot_name(slot) +
                                     " slot");
  }
  parse_scheme(loaded.scheme);
  classifiers_[slot] = {std::move(loaded), std::move(source),
                        std::make_unique<std::mutex>()};
}

bool Service::has_classifier(ClassifierSlot slot) const {
  return classifiers_.contains(slot);
}

const Service::Classifier* Service::classifier(ClassifierSlot slot) const {
  auto it = classifiers_.find(slot);
  return it == classifiers_.end() ? nullptr : &it->second;
}

Response Service::transform(const Form& form) const {
  if (auto too_big = check_size(form, options_)) return *too_big;
  const FormPart* audio = field(form, "audio");
  if (!audio) return error_response(400, "missing_audio", "no audio was uploaded");

  Direction direction = Direction::kOlder;
  if (const FormPart* d = field(form, "direction")) {
    if (d->data != "older" && d->data != "younger") {
      return error_response(400, "invalid_direction",
                            "direction '" + d->data +
                                "' is not allowed; use one of: younger, older");
    }
    direction = parse_direction(d->data);
  } else {
    return error_response(400, "invalid_direction",
                          "direction is required; use one of: younger, older");
  }
  const FormPart* flag = field(form, "return_spectrograms");
  const bool with_images = flag && truthy(flag->data);

  AudioInput in = read_audio(*audio, options_);
  if (in.error) return *in.error;
  if (!cyclegan_) {
    return error_response(503, "model_not_loaded", "no voice transform model is loaded");
  }

  TransformResult result;
  try {
    result = transform_audio_detailed(*cyclegan_, in.clip, direction,
                                      options_.griffin_lim_iterations);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kValidation) {
      return error_response(422, "clip_too_short", e.what());
    }
    return error_response(500, "transform_failed", e.what());
  }
  const auto wav = save_wav(result.audio);
  if (!with_images) return {200, "audio/wav", to_string(wav)};

  json j = {{"direction", direction_name(direction)},
            {"sample_rate", result.audio.sample_rate},
            {"samples", result.audio.size()},
            {"segments", result.output_images.size()},
            {"audio_wav_base64", base64(wav)},
            {"input_png_base64", base64(encode_png(tile(result.input_images)))},
            {"output_png_base64", base64(encode_png(tile(result.output_images)))}};
  return json_response(j);
}

Response Service::predict(const Form& form) const {
  if (auto too_big = check_size(form, options_)) return *too_big;
  const FormPart* audio = field(form, "audio");
  const FormPart* face = field(form, "face");
  if (!audio && !face) {
    return error_response(400, "missing_audio", "no audio or face was uploaded");
  }

  ClassifierSlot slot = ClassifierSlot::kAudio;
  if (audio && face) {
    slot = ClassifierSlot::kAudioVisual;
  } else if (face) {
    if (!has_classifier(ClassifierSlot::kVisual)) {
      return error_response(400, "audio_required",
                            "a face alone needs a visual-only model; upload audio too");
    }
    slot = ClassifierSlot::kVisual;
  }

  std::vector<Sample> samples;
  if (audio) {
    AudioInput in = read_audio(*audio, options_);
    if (in.error) return *in.error;
    for (const AudioClip& seg : segment(in.clip)) {
      Sample s;
      s.audio = audio_features(mel_spectrogram(seg));
      samples.push_back(std::move(s));
    }
    if (samples.empty()) {
      return error_response(422, "clip_too_short", "clip holds no complete segment");
    }
  }
  if (face) {
    std::vector<float> visual;
    try {
      visual = visual_features(decode_image(bytes_of(face->data)));
    } catch (const Error& e) {
      return error_response(400, "invalid_image",
                            std::string("face is not a readable PNG or JPEG: ") +
                                e.what());
    }
    if (samples.empty()) samples.emplace_back();
    for (Sample& s : samples) s.visual = visual;
  }

  const Classifier* c = classifier(slot);
  if (!c) {
    return error_response(503, "model_not_loaded",
                          "no " + slot_name(slot) + " age classifier is loaded");
  }
  VannModel& model = *c->loaded.model;
  const int k = model.config().num_classes;
  std::vector<double> mean(static_cast<std::size_t>(k), 0.0);
  {
    std::lock_guard<std::mutex> guard(*c->lock);
    constexpr std::size_t kChunk = 64;
    for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
      std::vector<const Sample*> batch;
      for (std::size_t i = begin; i < std::min(samples.size(), begin + kChunk); ++i) {
        batch.push_back(&samples[i]);
      }
      const nn::Tensor<float> p = model.predict_proba(batch);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        for (int j = 0; j < k; ++j) mean[j] += p.data()[i * k + j];
      }
    }
  }
  double total = 0.0;
  for (double& m : mean) total += m;
  for (double& m : mean) m /= total;
  const int best = static_cast<int>(std::max_element(mean.begin(), mean.end()) -
                                    mean.begin());

  const auto labels = scheme_labels(parse_scheme(c->loaded.scheme));
  json probs = json::array();
  for (int j = 0; j < k; ++j) {
    probs.push_back({{"label", labels[j]}, {"probability", mean[j]}});
  }
  json j = {{"scheme", c->loaded.scheme},
            {"modality", modality_name(model.config().modality)},
            {"label", labels[best]},
            {"class_index", best},
            {"probabilities", probs},
            {"segments", audio ? samples.size() : 0}};
  return json_response(j);
}

Response Service::health() const {
  json models = {{"cyclegan", has_cyclegan()}};
  for (auto slot : {ClassifierSlot::kAudio, ClassifierSlot::kAudioVisual,
                    ClassifierSlot::kVisual}) {
    models[slot_name(slot)] = has_classifier(slot);
  }
  return json_response({{"status", "ok"}, {"models", models}});
}

Response Service::model_info() const {
  json j;
  j["cyclegan"] = nullptr;
  if (cyclegan_) {
    j["cyclegan"] = {{"source", cyclegan_source_},
                     {"config", json::parse(cyclegan_->config().to_json())}};
  }
  json classifiers = json::object();
  for (const auto& [slot, c] : classifiers_) {
    classifiers[slot_name(slot)] = vann_info(c.loaded, c.source);
  }
  j["classifiers"] = classifiers;
  j["directions"] = {"younger", "older"};
  j["sample_rate"] = kSampleRate;
  j["limits"] = {{"max_upload_bytes", options_.max_upload_bytes},
                 {"max_seconds", options_.max_seconds},
                 {"min_seconds", kSegmentSeconds}};
  j["griffin_lim_iterations"] = options_.griffin_lim_iterations;
  return json_response(j);
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

Form form_of(const httplib::Request& req) {
  Form form;
  for (const auto& [key, value] : req.params) form[key] = {value, "", ""};
  if (req.is_multipart_form_data()) {
    for (const auto& [key, file] : req.files) {
      form[key] = {file.content, file.filename, file.content_type};
    }
  } else if (!req.body.empty()) {
    form["audio"] = {req.body, "", req.get_header_value("Content-Type")};
  }
  return form;
}

void send(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

}  // namespace

HttpServer::HttpServer(const Service& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  // Multipart framing adds a little on top of the raw files.
  s.set_payload_max_length(service_.options().max_upload_bytes + 64 * 1024);
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  s.Post("/api/transform", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, service_.transform(form_of(req)));
  });
  s.Post("/api/predict", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, service_.predict(form_of(req)));
  });
  s.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
    send(res, service_.health());
  });
  s.Get("/api/model-info", [this](const httplib::Request&, httplib::Response& res) {
    send(res, service_.model_info());
  });

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 413) {
      send(res, error_response(413, "payload_too_large", "upload is too large"));
    } else if (res.status == 404) {
      send(res, error_response(404, "not_found", "no route for " + req.path));
    } else {
      send(res, error_response(res.status, "bad_request", "request rejected"));
    }
  });
  s.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          message = e.what();
        } catch (...) {
        }
        send(res, error_response(500, "internal", message));
      });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) fail(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    fail(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::run() { server_->listen_after_bind(); }

void HttpServer::start() {
  thread_ = std::thread([this] { run(); });
  server_->wait_until_ready();
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace voxage
