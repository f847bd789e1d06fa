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

// Age labels, corpus scanning, manifests, holdout splits and statistics.
//
// Corpus layout read by scan_corpus:
//
//   <root>/<speaker_id>/speaker.json          {"birth_date": "YYYY-MM-DD", ...}
//   <root>/<speaker_id>/<video_id>/video.json {"title", "description", "published"}
//   <root>/<speaker_id>/<video_id>/segments/*.wav
//   <root>/<speaker_id>/<video_id>/faces/*.png|*.jpg

#ifndef VOXAGE_INGEST_HPP_
#define VOXAGE_INGEST_HPP_

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "voxage/models.hpp"

namespace voxage {

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  /// "YYYY-MM-DD"; malformed or impossible dates are a format error.
  static Date parse(const std::string& text);
  static bool valid(int year, int month, int day);
  std::string to_string() const;
  /// Days since 1970-01-01 (proleptic Gregorian).
  std::int64_t days() const;
  static Date from_days(std::int64_t days);

  friend auto operator<=>(const Date&, const Date&) = default;
};

/// Whole years elapsed. recorded < birth is a chronology error.
int compute_age(const Date& birth, const Date& recorded);

/// First date written as YYYY-MM-DD, "Month D, YYYY" or "D Month YYYY".
std::optional<Date> find_date_in_text(const std::string& text);

/// Title date, else description date, else the published date.
std::optional<Date> resolve_recorded_date(const std::string& title,
                                          const std::string& description,
                                          const std::optional<Date>& published);

// ---------------------------------------------------------------------------
// Corpus records

struct SpeakerRecord {
  std::string speaker_id;
  std::string name;
  std::optional<Date> birth_date;
  std::string gender;  // "male", "female" or empty
};

struct VideoRecord {
  std::string video_id;
  std::string speaker_id;
  std::optional<Date> recorded_date;
  std::string media_path;             // video directory
  std::vector<std::string> segments;  // WAV paths, sorted
  std::vector<std::string> faces;     // face crop paths, sorted
};

struct Corpus {
  std::vector<SpeakerRecord> speakers;
  std::vector<VideoRecord> videos;
  std::vector<std::string> warnings;
};

/// Reads the directory layout above. Missing metadata files produce warnings,
/// malformed JSON is a schema error.
Corpus scan_corpus(const std::string& root);

// ---------------------------------------------------------------------------
// Manifest

enum class Split { kUnassigned, kTrain, kTest };
std::string split_name(Split split);

struct ManifestEntry {
  std::string audio_path;
  std::string face_path;  // may be empty
  int age = 0;
  std::string speaker_id;
  Split split = Split::kUnassigned;
  std::string gender;
};

struct ManifestBuild {
  std::vector<ManifestEntry> entries;
  int videos_retained = 0;
  std::vector<std::string> warnings;
};

/// Keeps the first `cap_per_speaker` videos of each speaker in video_id
/// order; every segment of a kept video becomes one entry, paired with the
/// face crop of the same index (cycling when there are fewer crops).
/// Speakers without a birth date and videos without a usable date are
/// skipped with a warning. Output order does not depend on input order.
ManifestBuild build_manifest(const std::vector<SpeakerRecord>& speakers,
                             const std::vector<VideoRecord>& videos, int cap_per_speaker);

/// Tab-separated with the header
/// "audio_path\tface_path\tage\tspeaker_id\tsplit\tgender".
std::string format_manifest(const std::vector<ManifestEntry>& entries);
/// Errors: missing header or bad field -> schema error (with line number).
std::vector<ManifestEntry> parse_manifest(const std::string& text);
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::string& path);

struct SplitOptions {
  int test_size = 0;
  std::uint64_t seed = 1;
  /// When set, test entries are drawn per class in proportion to class size
  /// and every class must keep at least one training entry.
  std::optional<AgeScheme> stratify;
  /// Test holds whole speakers, filled up to test_size without exceeding it.
  bool speaker_disjoint = false;
};

/// Marks entries train or test. test_size >= size is a validation error.
void split_holdout(std::vector<ManifestEntry>& entries, const SplitOptions& options);

// ---------------------------------------------------------------------------
// Common Voice

struct CommonVoiceRow {
  std::string clip_path;
  std::string age_bucket;  // empty: unlabeled
  std::optional<int> age;  // decade midpoint
  std::string gender;
  std::string accent;

  bool labeled() const { return age.has_value(); }
};

struct RowError {
  int line = 0;  // 1-based, header is line 1
  std::string message;
};

struct CommonVoiceTable {
  std::vector<CommonVoiceRow> rows;
  std::vector<RowError> errors;
};

/// Decade midpoint for a bucket token ("teens" -> 15 ... "nineties" -> 95);
/// both "fourties" and "forties" are accepted. Unknown tokens -> nullopt.
std::optional<int> common_voice_age(const std::string& token);

/// Header must name "path", "age" and "gender" (schema error otherwise).
/// Rows with a wrong field count or unknown age token are collected as row
/// errors and skipped.
CommonVoiceTable parse_common_voice(const std::string& tsv);

// ---------------------------------------------------------------------------
// Statistics

struct DatasetStats {
  long total = 0;
  std::map<int, long> age_histogram;
  /// Per scheme, counts per class; for ab the entries aged 26-60 are in
  /// `ab_excluded`.
  std::map<AgeScheme, std::vector<long>> scheme_counts;
  long ab_excluded = 0;
  long age_30_to_60 = 0;
  std::map<std::string, long> gender_counts;  // empty gender -> "unknown"
  long speakers = 0;

  double share_30_to_60() const;
  std::string to_csv() const;
  std::string summary() const;
};

DatasetStats dataset_stats(const std::vector<ManifestEntry>& entries);

}  // namespace voxage

#endif  // VOXAGE_INGEST_HPP_
