/* Copyright 2026 The Voxage Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to libvoxage.
 *
 * Every fallible call returns a voxage_status; on failure a message for the
 * calling thread is available from voxage_last_error() until the next call.
 * Strings and buffers handed out by the library are released with
 * voxage_free(). Job functions take their options as a JSON object (unknown
 * keys are rejected, missing keys keep their defaults) and return a JSON
 * result; see docs/API.md for the keys.
 */

#ifndef VOXAGE_VOXAGE_H_
#define VOXAGE_VOXAGE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VOXAGE_API __declspec(dllexport)
#else
#define VOXAGE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum voxage_status {
  VOXAGE_OK = 0,
  VOXAGE_ERR_FORMAT = 1,         /* malformed input bytes or text */
  VOXAGE_ERR_UNSUPPORTED = 2,    /* valid but unsupported encoding */
  VOXAGE_ERR_DIMENSION = 3,      /* shape mismatch */
  VOXAGE_ERR_RANGE = 4,          /* value out of range */
  VOXAGE_ERR_VALIDATION = 5,     /* rejected argument or option */
  VOXAGE_ERR_CHRONOLOGY = 6,     /* recording before birth */
  VOXAGE_ERR_SCHEMA = 7,         /* metadata or option JSON has the wrong shape */
  VOXAGE_ERR_STRATIFICATION = 8, /* a class cannot be represented in a split */
  VOXAGE_ERR_DEGENERATE = 9,     /* not enough distinct data to proceed */
  VOXAGE_ERR_IO = 10,            /* file system or socket failure */
  VOXAGE_ERR_STATE = 11,         /* call not valid in the object's state */
  VOXAGE_ERR_ARGUMENT = 12,      /* null pointer or similar misuse */
  VOXAGE_ERR_INTERNAL = 13
} voxage_status;

typedef struct voxage_cyclegan voxage_cyclegan;
typedef struct voxage_classifier voxage_classifier;
typedef struct voxage_service voxage_service;

/* Receives one progress line; `line` is valid only during the call. */
typedef void (*voxage_progress_fn)(const char* line, void* user);

VOXAGE_API const char* voxage_version(void);
VOXAGE_API const char* voxage_status_name(voxage_status status);
VOXAGE_API const char* voxage_last_error(void);
VOXAGE_API void voxage_free(void* ptr);

/* ---- small helpers ---- */

VOXAGE_API voxage_status voxage_encode_pixel(int64_t code, uint8_t rgb_out[3]);
VOXAGE_API voxage_status voxage_decode_pixel(uint8_t red, uint8_t green, uint8_t blue,
                                             uint32_t* code_out);
/* Dates are "YYYY-MM-DD". */
VOXAGE_API voxage_status voxage_compute_age(const char* birth, const char* recorded,
                                            int* age_out);
/* `bin_out` is -1 when the scheme excludes the age. */
VOXAGE_API voxage_status voxage_age_bin(double age, const char* scheme, int* bin_out);

/* ---- voice transform ---- */

VOXAGE_API voxage_status voxage_cyclegan_load(const char* path, voxage_cyclegan** out);
VOXAGE_API void voxage_cyclegan_free(voxage_cyclegan* model);
/* WAV in, 16 kHz mono PCM16 WAV out. `direction` is "older" or "younger". */
VOXAGE_API voxage_status voxage_cyclegan_transform(const voxage_cyclegan* model,
                                                   const uint8_t* wav, size_t wav_len,
                                                   const char* direction,
                                                   int griffin_lim_iterations,
                                                   uint8_t** wav_out, size_t* wav_out_len);

/* ---- age prediction ---- */

VOXAGE_API voxage_status voxage_classifier_load(const char* path,
                                                voxage_classifier** out);
VOXAGE_API void voxage_classifier_free(voxage_classifier* model);
/* Either input may be null (not both). Result JSON matches POST /api/predict. */
VOXAGE_API voxage_status voxage_classifier_predict(voxage_classifier* model,
                                                   const uint8_t* wav, size_t wav_len,
                                                   const uint8_t* face, size_t face_len,
                                                   char** result_json);

/* ---- jobs ---- */

VOXAGE_API voxage_status voxage_ingest(const char* options_json,
                                       voxage_progress_fn progress, void* user,
                                       char** result_json);
VOXAGE_API voxage_status voxage_stats(const char* options_json, char** result_json);
VOXAGE_API voxage_status voxage_train_vann(const char* options_json,
                                           voxage_progress_fn progress, void* user,
                                           char** result_json);
VOXAGE_API voxage_status voxage_evaluate(const char* options_json, char** result_json);
VOXAGE_API voxage_status voxage_train_cyclegan(const char* options_json,
                                               voxage_progress_fn progress, void* user,
                                               char** result_json);
VOXAGE_API voxage_status voxage_transform_file(const char* options_json,
                                               char** result_json);

/* ---- HTTP service ---- */

/* `checkpoint_dir` may be null to read VOXAGE_CHECKPOINT_DIR; when neither is
 * set the service starts with no models. `options_json` may be null. */
VOXAGE_API voxage_status voxage_service_create(const char* checkpoint_dir,
                                               const char* options_json,
                                               voxage_service** out);
/* `port` 0 picks a free port; the bound port is written to `bound_port`. */
VOXAGE_API voxage_status voxage_service_bind(voxage_service* service, const char* host,
                                             int port, int* bound_port);
/* Blocks until voxage_service_stop() is called from another thread. */
VOXAGE_API voxage_status voxage_service_run(voxage_service* service);
/* Serves on a background thread. */
VOXAGE_API voxage_status voxage_service_start(voxage_service* service);
VOXAGE_API voxage_status voxage_service_stop(voxage_service* service);
VOXAGE_API void voxage_service_free(voxage_service* service);

#ifdef __cplusplus
}
#endif

#endif /* VOXAGE_VOXAGE_H_ */
