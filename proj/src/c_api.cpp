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

#include "voxage/voxage.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "json.hpp"
#include "voxage/error.hpp"
#include "voxage/jobs.hpp"
#include "voxage/service.hpp"

using nlohmann::json;

// ---------------------------------------------------------------------------
// Option (de)serialization. Missing keys keep the struct defaults.

namespace voxage {

void to_json(json& j, const VannConfig& c) { j = json::parse(c.to_json()); }
void from_json(const json& j, VannConfig& c) {
  json merged = json::parse(c.to_json());
  merged.update(j);
  c = VannConfig::from_json(merged.dump());
}
void to_json(json& j, const CycleGanConfig& c) { j = json::parse(c.to_json()); }
void from_json(const json& j, CycleGanConfig& c) {
  json merged = json::parse(c.to_json());
  merged.update(j);
  c = CycleGanConfig::from_json(merged.dump());
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SvmConfig, c, epochs, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(IngestOptions, corpus_root, common_voice,
                                                clips_dir, out, cap_per_speaker,
                                                test_size, seed, stratify,
                                                speaker_disjoint)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DataOptions, task, manifest, scheme,
                                                train_count, test_count, data_seed,
                                                segments_per_entry)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainVannOptions, data, config, out, log)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvaluateOptions, data, method, model,
                                                knn_k, svm, confusion_csv)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainCycleGanOptions, config, toy,
                                                toy_count, manifest,
                                                segments_per_entry, out, log,
                                                snapshot_dir)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TransformOptions, model, in, out,
                                                direction, griffin_lim_iterations,
                                                spectrogram_dir)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ServiceOptions, max_upload_bytes,
                                                max_seconds, griffin_lim_iterations)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(IngestResult, entries, videos_retained, test_entries,
                                   warnings)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EpochRecord, epoch, train_loss, test_acc)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LossEntry, epoch, d_a, d_b, g, f, cycle_aba, cycle_bab)

}  // namespace voxage

struct voxage_cyclegan {
  std::unique_ptr<voxage::CycleGan> model;
};

struct voxage_classifier {
  voxage::Service service;
};

struct voxage_service {
  voxage::Service service;
  std::unique_ptr<voxage::HttpServer> http;
  bool bound = false;
};

namespace {

thread_local std::string g_last_error;

// Rejects keys the defaults do not know about, at any depth, so a typo in an
// option name fails loudly instead of silently keeping the default.
void check_keys(const json& given, const json& known, const std::string& path) {
  if (!given.is_object() || !known.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    if (!known.contains(key)) {
      voxage::fail(voxage::ErrorCode::kValidation,
                   "unknown option '" + path + key + "'");
    }
    check_keys(value, known.at(key), path + key + ".");
  }
}

template <class T>
T parse_options(const char* text, T defaults = {}) {
  json given = json::object();
  if (text && *text) {
    try {
      given = json::parse(text);
    } catch (const json::exception& e) {
      voxage::fail(voxage::ErrorCode::kSchema, std::string("options: ") + e.what());
    }
  }
  if (!given.is_object()) voxage::fail(voxage::ErrorCode::kSchema, "options must be an object");
  json known = defaults;
  check_keys(given, known, "");
  known.update(given, true);
  try {
    return known.get<T>();
  } catch (const json::exception& e) {
    voxage::fail(voxage::ErrorCode::kSchema, std::string("options: ") + e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_json(char** out, const json& j) {
  if (out) *out = dup_string(j.dump());
}

voxage::ProgressFn progress_of(voxage_progress_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](const std::string& line) { fn(line.c_str(), user); };
}

template <class F>
voxage_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return VOXAGE_OK;
  } catch (const voxage::Error& e) {
    g_last_error = e.what();
    return static_cast<voxage_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return VOXAGE_ERR_INTERNAL;
}

#define VOXAGE_REQUIRE(cond)                                  \
  do {                                                        \
    if (!(cond)) {                                            \
      g_last_error = "invalid argument: " #cond;              \
      return VOXAGE_ERR_ARGUMENT;                             \
    }                                                         \
  } while (0)

std::string as_string(const uint8_t* data, size_t len) {
  return data ? std::string(reinterpret_cast<const char*>(data), len) : std::string();
}

}  // namespace

extern "C" {

const char* voxage_version(void) { return "0.1.0"; }

const char* voxage_status_name(voxage_status status) {
  switch (status) {
    case VOXAGE_OK: return "ok";
    case VOXAGE_ERR_ARGUMENT: return "argument";
    case VOXAGE_ERR_INTERNAL: return "internal";
    default:
      if (status >= VOXAGE_ERR_FORMAT && status <= VOXAGE_ERR_STATE) {
        return voxage::error_code_name(static_cast<voxage::ErrorCode>(status));
      }
      return "unknown";
  }
}

const char* voxage_last_error(void) { return g_last_error.c_str(); }

void voxage_free(void* ptr) { std::free(ptr); }

voxage_status voxage_encode_pixel(int64_t code, uint8_t rgb_out[3]) {
  VOXAGE_REQUIRE(rgb_out);
  return guarded([&] {
    const voxage::Rgb p = voxage::encode_pixel(code);
    rgb_out[0] = p.red;
    rgb_out[1] = p.green;
    rgb_out[2] = p.blue;
  });
}

voxage_status voxage_decode_pixel(uint8_t red, uint8_t green, uint8_t blue,
                                  uint32_t* code_out) {
  VOXAGE_REQUIRE(code_out);
  return guarded([&] { *code_out = voxage::decode_pixel(red, green, blue); });
}

voxage_status voxage_compute_age(const char* birth, const char* recorded, int* age_out) {
  VOXAGE_REQUIRE(birth && recorded && age_out);
  return guarded([&] {
    *age_out = voxage::compute_age(voxage::Date::parse(birth), voxage::Date::parse(recorded));
  });
}

voxage_status voxage_age_bin(double age, const char* scheme, int* bin_out) {
  VOXAGE_REQUIRE(scheme && bin_out);
  return guarded([&] {
    *bin_out = voxage::age_to_bin(age, voxage::parse_scheme(scheme)).value_or(-1);
  });
}

voxage_status voxage_cyclegan_load(const char* path, voxage_cyclegan** out) {
  VOXAGE_REQUIRE(path && out);
  *out = nullptr;
  return guarded([&] { *out = new voxage_cyclegan{voxage::load_cyclegan(path)}; });
}

void voxage_cyclegan_free(voxage_cyclegan* model) { delete model; }

voxage_status voxage_cyclegan_transform(const voxage_cyclegan* model, const uint8_t* wav,
                                        size_t wav_len, const char* direction,
                                        int griffin_lim_iterations, uint8_t** wav_out,
                                        size_t* wav_out_len) {
  VOXAGE_REQUIRE(model && wav && direction && wav_out && wav_out_len);
  *wav_out = nullptr;
  *wav_out_len = 0;
  return guarded([&] {
    const voxage::AudioClip clip = voxage::load_wav({wav, wav_len});
    const voxage::AudioClip aged =
        voxage::transform_audio(*model->model, clip, voxage::parse_direction(direction),
                                griffin_lim_iterations);
    const auto bytes = voxage::save_wav(aged);
    auto* buf = static_cast<uint8_t*>(std::malloc(bytes.size()));
    if (!buf) throw std::bad_alloc();
    std::memcpy(buf, bytes.data(), bytes.size());
    *wav_out = buf;
    *wav_out_len = bytes.size();
  });
}

voxage_status voxage_classifier_load(const char* path, voxage_classifier** out) {
  VOXAGE_REQUIRE(path && out);
  *out = nullptr;
  return guarded([&] {
    voxage::LoadedVann loaded = voxage::load_vann(path);
    voxage::ClassifierSlot slot = voxage::ClassifierSlot::kAudioVisual;
    const auto m = loaded.model->config().modality;
    if (m == voxage::Modality::kAudio) slot = voxage::ClassifierSlot::kAudio;
    if (m == voxage::Modality::kVisual) slot = voxage::ClassifierSlot::kVisual;
    auto c = std::make_unique<voxage_classifier>();
    c->service.set_classifier(slot, std::move(loaded), path);
    *out = c.release();
  });
}

void voxage_classifier_free(voxage_classifier* model) { delete model; }

voxage_status voxage_classifier_predict(voxage_classifier* model, const uint8_t* wav,
                                        size_t wav_len, const uint8_t* face,
                                        size_t face_len, char** result_json) {
  VOXAGE_REQUIRE(model && result_json && (wav || face));
  *result_json = nullptr;
  return guarded([&] {
    voxage::Form form;
    if (wav) form["audio"] = {as_string(wav, wav_len), "", "audio/wav"};
    if (face) form["face"] = {as_string(face, face_len), "", ""};
    const voxage::Response r = model->service.predict(form);
    if (r.status != 200) {
      const json err = json::parse(r.body).at("error");
      const std::string code = err.at("code");
      const auto kind = code == "model_not_loaded" || code == "audio_required"
                            ? voxage::ErrorCode::kState
                        : code == "invalid_audio" || code == "invalid_image"
                            ? voxage::ErrorCode::kFormat
                            : voxage::ErrorCode::kValidation;
      voxage::fail(kind, err.at("message").get<std::string>());
    }
    *result_json = dup_string(r.body);
  });
}

voxage_status voxage_ingest(const char* options_json, voxage_progress_fn progress,
                            void* user, char** result_json) {
  return guarded([&] {
    const auto options = parse_options<voxage::IngestOptions>(options_json);
    const auto result = voxage::run_ingest(options, progress_of(progress, user));
    set_json(result_json, result);
  });
}

voxage_status voxage_stats(const char* options_json, char** result_json) {
  return guarded([&] {
    struct StatsOptions {
      std::string manifest, csv;
    };
    json j = json::object();
    if (options_json && *options_json) j = json::parse(options_json);
    check_keys(j, json{{"manifest", ""}, {"csv", ""}}, "");
    const auto r = voxage::run_stats(j.value("manifest", std::string()),
                                     j.value("csv", std::string()));
    set_json(result_json, {{"total", r.stats.total},
                           {"speakers", r.stats.speakers},
                           {"share_30_to_60", r.stats.share_30_to_60()},
                           {"csv", r.csv},
                           {"summary", r.summary}});
  });
}

voxage_status voxage_train_vann(const char* options_json, voxage_progress_fn progress,
                                void* user, char** result_json) {
  return guarded([&] {
    const auto options = parse_options<voxage::TrainVannOptions>(options_json);
    const auto r = voxage::run_train_vann(options, progress_of(progress, user));
    set_json(result_json, {{"log", r.log}, {"final_accuracy", r.final_accuracy}});
  });
}

voxage_status voxage_evaluate(const char* options_json, char** result_json) {
  return guarded([&] {
    const auto options = parse_options<voxage::EvaluateOptions>(options_json);
    const auto r = voxage::run_evaluate(options);
    set_json(result_json, {{"accuracy", r.accuracy},
                           {"labels", r.confusion.labels},
                           {"per_class_accuracy", r.confusion.per_class_accuracy()},
                           {"confusion_csv", r.confusion.to_csv()}});
  });
}

voxage_status voxage_train_cyclegan(const char* options_json, voxage_progress_fn progress,
                                    void* user, char** result_json) {
  return guarded([&] {
    // The toy preset changes the defaults that explicit config keys override.
    voxage::TrainCycleGanOptions defaults;
    if (options_json && *options_json) {
      const json j = json::parse(options_json, nullptr, false);
      if (j.is_object() && j.value("toy", false)) {
        defaults.toy = true;
        defaults.config = voxage::toy_cyclegan_config();
      }
    }
    const auto options = parse_options(options_json, defaults);
    const auto report = voxage::run_train_cyclegan(options, progress_of(progress, user));
    set_json(result_json,
             {{"report", report}, {"tsv", voxage::format_loss_report(report)}});
  });
}

voxage_status voxage_transform_file(const char* options_json, char** result_json) {
  return guarded([&] {
    const auto options = parse_options<voxage::TransformOptions>(options_json);
    const std::size_t samples = voxage::run_transform(options);
    set_json(result_json, {{"samples", samples},
                           {"seconds", static_cast<double>(samples) / voxage::kSampleRate},
                           {"out", options.out}});
  });
}

voxage_status voxage_service_create(const char* checkpoint_dir, const char* options_json,
                                    voxage_service** out) {
  VOXAGE_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto s = std::unique_ptr<voxage_service>(
        new voxage_service{voxage::Service(parse_options<voxage::ServiceOptions>(options_json)),
                           nullptr, false});
    std::string dir = checkpoint_dir ? checkpoint_dir : "";
    if (dir.empty()) {
      if (const char* env = std::getenv(voxage::kCheckpointDirEnv)) dir = env;
    }
    if (!dir.empty()) s->service.load_directory(dir);
    s->http = std::make_unique<voxage::HttpServer>(s->service);
    *out = s.release();
  });
}

voxage_status voxage_service_bind(voxage_service* service, const char* host, int port,
                                  int* bound_port) {
  VOXAGE_REQUIRE(service && host && port >= 0);
  return guarded([&] {
    if (service->bound) voxage::fail(voxage::ErrorCode::kState, "service is already bound");
    const int p = service->http->bind(host, port);
    service->bound = true;
    if (bound_port) *bound_port = p;
  });
}

voxage_status voxage_service_run(voxage_service* service) {
  VOXAGE_REQUIRE(service);
  return guarded([&] {
    if (!service->bound) voxage::fail(voxage::ErrorCode::kState, "bind before run");
    service->http->run();
  });
}

voxage_status voxage_service_start(voxage_service* service) {
  VOXAGE_REQUIRE(service);
  return guarded([&] {
    if (!service->bound) voxage::fail(voxage::ErrorCode::kState, "bind before start");
    service->http->start();
  });
}

voxage_status voxage_service_stop(voxage_service* service) {
  VOXAGE_REQUIRE(service);
  return guarded([&] { service->http->stop(); });
}

void voxage_service_free(voxage_service* service) {
  if (!service) return;
  service->http.reset();
  delete service;
}

}  // extern "C"
