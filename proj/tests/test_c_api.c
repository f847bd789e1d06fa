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

/* Exercises the C interface from C, through the shared library only. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "voxage/voxage.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expected %s (last error: %s)\n", __FILE__, \
              __LINE__, #cond, voxage_last_error());                   \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

static void put16(unsigned char* p, unsigned v) {
  p[0] = (unsigned char)(v & 0xff);
  p[1] = (unsigned char)((v >> 8) & 0xff);
}

static void put32(unsigned char* p, unsigned long v) {
  put16(p, (unsigned)(v & 0xffff));
  put16(p + 2, (unsigned)(v >> 16));
}

/* Mono PCM16 sine; caller frees. */
static unsigned char* make_wav(int samples, int rate, size_t* len) {
  const size_t data = (size_t)samples * 2;
  unsigned char* w = (unsigned char*)calloc(44 + data, 1);
  int i;
  memcpy(w, "RIFF", 4);
  put32(w + 4, (unsigned long)(36 + data));
  memcpy(w + 8, "WAVEfmt ", 8);
  put32(w + 16, 16);
  put16(w + 20, 1);
  put16(w + 22, 1);
  put32(w + 24, (unsigned long)rate);
  put32(w + 28, (unsigned long)rate * 2);
  put16(w + 32, 2);
  put16(w + 34, 16);
  memcpy(w + 36, "data", 4);
  put32(w + 40, (unsigned long)data);
  for (i = 0; i < samples; ++i) {
    const double v = 0.3 * sin(2.0 * 3.14159265358979 * 220.0 * i / rate);
    const int s = (int)lround(v * 32767.0);
    put16(w + 44 + 2 * i, (unsigned)(s & 0xffff));
  }
  *len = 44 + data;
  return w;
}

static int contains(const char* text, const char* needle) {
  return text && strstr(text, needle) != NULL;
}

static void test_helpers(void) {
  uint8_t rgb[3];
  uint32_t code = 0;
  int age = 0, bin = 0;

  EXPECT(strlen(voxage_version()) > 0);
  EXPECT(strcmp(voxage_status_name(VOXAGE_OK), "ok") == 0);
  EXPECT(strcmp(voxage_status_name(VOXAGE_ERR_ARGUMENT), "argument") == 0);

  EXPECT(voxage_encode_pixel(65793, rgb) == VOXAGE_OK);
  EXPECT(rgb[0] == 1 && rgb[1] == 1 && rgb[2] == 1);
  EXPECT(voxage_decode_pixel(255, 255, 255, &code) == VOXAGE_OK);
  EXPECT(code == 16777215u);
  EXPECT(voxage_encode_pixel(0, NULL) == VOXAGE_ERR_ARGUMENT);
  EXPECT(strlen(voxage_last_error()) > 0);

  EXPECT(voxage_compute_age("1990-06-15", "2020-06-14", &age) == VOXAGE_OK);
  EXPECT(age == 29);
  EXPECT(voxage_compute_age("1990-06-15", "2020-06-15", &age) == VOXAGE_OK);
  EXPECT(age == 30);
  EXPECT(voxage_compute_age("2000-01-01", "1999-01-01", &age) == VOXAGE_ERR_CHRONOLOGY);
  EXPECT(voxage_compute_age("2000-13-01", "2001-01-01", &age) == VOXAGE_ERR_FORMAT);

  EXPECT(voxage_age_bin(20.0, "ab", &bin) == VOXAGE_OK && bin == 0);
  EXPECT(voxage_age_bin(30.0, "ab", &bin) == VOXAGE_OK && bin == -1);
  EXPECT(voxage_age_bin(65.0, "ab", &bin) == VOXAGE_OK && bin == 1);
  EXPECT(voxage_age_bin(30.0, "bogus", &bin) == VOXAGE_ERR_VALIDATION);
  EXPECT(voxage_age_bin(-1.0, "ab", &bin) == VOXAGE_ERR_RANGE);
}

static void test_options(void) {
  char* result = NULL;
  EXPECT(voxage_evaluate("{\"method\": \"svm\", \"nope\": 1}", &result) ==
         VOXAGE_ERR_VALIDATION);
  EXPECT(contains(voxage_last_error(), "nope"));
  EXPECT(voxage_evaluate("{\"data\": {\"tsak\": \"band\"}}", &result) ==
         VOXAGE_ERR_VALIDATION);
  EXPECT(voxage_evaluate("{not json", &result) == VOXAGE_ERR_SCHEMA);
  EXPECT(voxage_evaluate("{\"method\": 3}", &result) == VOXAGE_ERR_SCHEMA);
  EXPECT(voxage_evaluate("{\"method\": \"forest\"}", &result) == VOXAGE_ERR_VALIDATION);
  EXPECT(result == NULL);
}

static int progress_lines = 0;
static void count_progress(const char* line, void* user) {
  (void)line;
  ++*(int*)user;
}

static void test_classifier(void) {
  char* result = NULL;
  voxage_classifier* clf = NULL;
  size_t len = 0;
  unsigned char* wav = make_wav(16000, 16000, &len);

  EXPECT(voxage_train_vann(
             "{\"data\": {\"task\": \"band\", \"train_count\": 40, \"test_count\": 20},"
             " \"config\": {\"conv_filters\": 4, \"conv_stride\": 4, \"dense_width\": 16,"
             " \"epochs\": 2, \"batch_size\": 8},"
             " \"out\": \"c_api_vann.ckpt\"}",
             count_progress, &progress_lines, &result) == VOXAGE_OK);
  EXPECT(contains(result, "final_accuracy"));
  EXPECT(progress_lines == 2);
  voxage_free(result);

  EXPECT(voxage_classifier_load("c_api_vann.ckpt", &clf) == VOXAGE_OK);
  EXPECT(voxage_classifier_predict(clf, wav, len, NULL, 0, &result) == VOXAGE_OK);
  EXPECT(contains(result, "\"modality\":\"audio\""));
  voxage_free(result);
  result = NULL;
  EXPECT(voxage_classifier_predict(clf, wav, 10, NULL, 0, &result) == VOXAGE_ERR_FORMAT);
  EXPECT(voxage_classifier_predict(clf, NULL, 0, NULL, 0, &result) == VOXAGE_ERR_ARGUMENT);
  voxage_classifier_free(clf);

  EXPECT(voxage_classifier_load("missing.ckpt", &clf) != VOXAGE_OK);
  EXPECT(clf == NULL);

  EXPECT(voxage_evaluate("{\"method\": \"vann\", \"model\": \"c_api_vann.ckpt\","
                         " \"data\": {\"test_count\": 20},"
                         " \"confusion_csv\": \"c_api_confusion.csv\"}",
                         &result) == VOXAGE_OK);
  EXPECT(contains(result, "accuracy"));
  voxage_free(result);
  free(wav);
}

static void test_transform(void) {
  char* result = NULL;
  voxage_cyclegan* gan = NULL;
  uint8_t* out = NULL;
  size_t out_len = 0, len = 0;
  unsigned char* wav = make_wav(16000, 16000, &len);
  FILE* f;

  EXPECT(voxage_train_cyclegan(
             "{\"toy\": true, \"toy_count\": 2,"
             " \"config\": {\"gen_channels\": 2, \"res_blocks\": 1, \"disc_channels\": 2,"
             " \"epochs\": 1},"
             " \"out\": \"c_api_gan.ckpt\"}",
             NULL, NULL, &result) == VOXAGE_OK);
  EXPECT(contains(result, "cycle_aba"));
  voxage_free(result);

  EXPECT(voxage_cyclegan_load("c_api_gan.ckpt", &gan) == VOXAGE_OK);
  EXPECT(voxage_cyclegan_transform(gan, wav, len, "older", 4, &out, &out_len) == VOXAGE_OK);
  EXPECT(out_len == 44 + 15360 * 2);
  voxage_free(out);
  EXPECT(voxage_cyclegan_transform(gan, wav, len, "sideways", 4, &out, &out_len) ==
         VOXAGE_ERR_VALIDATION);
  EXPECT(out == NULL && out_len == 0);
  EXPECT(voxage_cyclegan_transform(gan, wav, 10, "older", 4, &out, &out_len) ==
         VOXAGE_ERR_FORMAT);
  /* A truncated data chunk decodes to what is present: too short here. */
  EXPECT(voxage_cyclegan_transform(gan, wav, 100, "older", 4, &out, &out_len) ==
         VOXAGE_ERR_VALIDATION);
  voxage_cyclegan_free(gan);

  f = fopen("c_api_in.wav", "wb");
  fwrite(wav, 1, len, f);
  fclose(f);
  EXPECT(voxage_transform_file("{\"model\": \"c_api_gan.ckpt\", \"in\": \"c_api_in.wav\","
                               " \"out\": \"c_api_out.wav\", \"direction\": \"younger\","
                               " \"griffin_lim_iterations\": 4}",
                               &result) == VOXAGE_OK);
  EXPECT(contains(result, "\"samples\":15360"));
  voxage_free(result);
  free(wav);
}

static void test_stats(void) {
  char* result = NULL;
  FILE* f = fopen("c_api_manifest.tsv", "w");
  fputs("audio_path\tface_path\tage\tspeaker_id\tsplit\tgender\n", f);
  fputs("a.wav\t\t22\tid1\ttrain\tfemale\n", f);
  fputs("b.wav\t\t64\tid2\ttest\tmale\n", f);
  fclose(f);
  EXPECT(voxage_stats("{\"manifest\": \"c_api_manifest.tsv\"}", &result) == VOXAGE_OK);
  EXPECT(contains(result, "\"total\":2"));
  voxage_free(result);
  EXPECT(voxage_stats("{\"manifest\": \"no_such_manifest.tsv\"}", &result) == VOXAGE_ERR_IO);
}

static void test_service(void) {
  voxage_service* svc = NULL;
  int port = 0;
  EXPECT(voxage_service_create(NULL, "{\"max_seconds\": 10}", &svc) == VOXAGE_OK);
  EXPECT(voxage_service_run(svc) == VOXAGE_ERR_STATE);
  EXPECT(voxage_service_bind(svc, "127.0.0.1", 0, &port) == VOXAGE_OK);
  EXPECT(port > 0);
  EXPECT(voxage_service_bind(svc, "127.0.0.1", 0, &port) == VOXAGE_ERR_STATE);
  EXPECT(voxage_service_start(svc) == VOXAGE_OK);
  EXPECT(voxage_service_stop(svc) == VOXAGE_OK);
  voxage_service_free(svc);
  voxage_service_free(NULL);

  EXPECT(voxage_service_create("no_such_dir", NULL, &svc) == VOXAGE_ERR_IO);
  EXPECT(svc == NULL);
  EXPECT(voxage_service_create(NULL, "{\"max_bytes\": 1}", &svc) == VOXAGE_ERR_VALIDATION);
}

int main(void) {
  test_helpers();
  test_options();
  test_classifier();
  test_transform();
  test_stats();
  test_service();
  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("c api: all checks passed\n");
  return 0;
}
