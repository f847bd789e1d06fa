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

#include "voxage/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "voxage/error.hpp"

namespace voxage {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Dates

bool Date::valid(int year, int month, int day) {
  return std::chrono::year_month_day(std::chrono::year(year),
                                     std::chrono::month(static_cast<unsigned>(month)),
                                     std::chrono::day(static_cast<unsigned>(day)))
             .ok() &&
         month >= 1 && day >= 1 && year >= 1 && year <= 9999;
}

Date Date::parse(const std::string& text) {
  int y = 0, m = 0, d = 0;
  const char* p = text.data();
  const char* end = p + text.size();
  auto field = [&](int& out, std::size_t width) {
    if (static_cast<std::size_t>(end - p) < width) return false;
    auto r = std::from_chars(p, p + width, out);
    if (r.ec != std::errc() || r.ptr != p + width) return false;
    p += width;
    return true;
  };
  const bool ok = text.size() == 10 && field(y, 4) && *p++ == '-' && field(m, 2) &&
                  *p++ == '-' && field(d, 2);
  if (!ok || !valid(y, m, d)) fail(ErrorCode::kFormat, "invalid date '" + text + "'");
  return Date{y, m, d};
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

std::int64_t Date::days() const {
  const std::chrono::sys_days sd{std::chrono::year(year) / month / day};
  return sd.time_since_epoch().count();
}

Date Date::from_days(std::int64_t days) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  return Date{static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
              static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

int compute_age(const Date& birth, const Date& recorded) {
  if (recorded < birth) {
    fail(ErrorCode::kChronology, "recording date " + recorded.to_string() +
                                     " precedes birth date " + birth.to_string());
  }
  int age = recorded.year - birth.year;
  if (std::pair(recorded.month, recorded.day) < std::pair(birth.month, birth.day)) --age;
  return age;
}

namespace {

int month_from_name(std::string name) {
  static const char* kNames[] = {"jan", "feb", "mar", "apr", "may", "jun",
                                 "jul", "aug", "sep", "oct", "nov", "dec"};
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static const char* kFull[] = {"january", "february", "march",     "april",   "may",      "june",
                                "july",    "august",   "september", "october", "november", "december"};
  for (int i = 0; i < 12; ++i) {
    if (name == kNames[i] || name == kFull[i] || (i == 8 && name == "sept")) return i + 1;
  }
  return 0;
}

}  // namespace

std::optional<Date> find_date_in_text(const std::string& text) {
  static const std::regex iso(R"((\d{4})-(\d{2})-(\d{2}))");
  static const std::regex mdy(R"(\b([A-Za-z]{3,9})\.? (\d{1,2}),? (\d{4})\b)");
  static const std::regex dmy(R"(\b(\d{1,2}) ([A-Za-z]{3,9})\.?,? (\d{4})\b)");
  // Earliest valid match in the text wins.
  std::optional<Date> best;
  std::ptrdiff_t best_pos = -1;
  auto consider = [&](std::ptrdiff_t pos, int y, int m, int d) {
    if (m == 0 || !Date::valid(y, m, d)) return;
    if (best_pos < 0 || pos < best_pos) {
      best = Date{y, m, d};
      best_pos = pos;
    }
  };
  for (std::sregex_iterator it(text.begin(), text.end(), iso), e; it != e; ++it) {
    consider(it->position(), std::stoi((*it)[1]), std::stoi((*it)[2]), std::stoi((*it)[3]));
  }
  for (std::sregex_iterator it(text.begin(), text.end(), mdy), e; it != e; ++it) {
    consider(it->position(), std::stoi((*it)[3]), month_from_name((*it)[1]), std::stoi((*it)[2]));
  }
  for (std::sregex_iterator it(text.begin(), text.end(), dmy), e; it != e; ++it) {
    consider(it->position(), std::stoi((*it)[3]), month_from_name((*it)[2]), std::stoi((*it)[1]));
  }
  return best;
}

std::optional<Date> resolve_recorded_date(const std::string& title,
                                          const std::string& description,
                                          const std::optional<Date>& published) {
  if (auto d = find_date_in_text(title)) return d;
  if (auto d = find_date_in_text(description)) return d;
  return published;
}

// ---------------------------------------------------------------------------
// Corpus scan

namespace {

nlohmann::json read_json(const fs::path& path) {
  const auto bytes = read_file(path.string());
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
}

std::string string_field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return "";
  if (!it->is_string()) fail(ErrorCode::kSchema, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<Date> date_field(const nlohmann::json& j, const char* key, const fs::path& where,
                               std::vector<std::string>& warnings) {
  const std::string text = string_field(j, key);
  if (text.empty()) return std::nullopt;
  try {
    return Date::parse(text);
  } catch (const Error& e) {
    warnings.push_back(where.string() + ": " + e.what());
    return std::nullopt;
  }
}

std::vector<std::string> list_files(const fs::path& dir, std::initializer_list<const char*> exts) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const char* e : exts) {
      if (ext == e) out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Corpus scan_corpus(const std::string& root) {
  if (!fs::is_directory(root)) fail(ErrorCode::kIo, "corpus root '" + root + "' is not a directory");
  Corpus corpus;
  for (const fs::path& speaker_dir : sorted_subdirs(root)) {
    SpeakerRecord speaker;
    speaker.speaker_id = speaker_dir.filename().string();
    const fs::path meta = speaker_dir / "speaker.json";
    if (fs::exists(meta)) {
      const auto j = read_json(meta);
      if (const std::string id = string_field(j, "speaker_id"); !id.empty()) speaker.speaker_id = id;
      speaker.name = string_field(j, "name");
      speaker.gender = string_field(j, "gender");
      speaker.birth_date = date_field(j, "birth_date", meta, corpus.warnings);
    } else {
      corpus.warnings.push_back(meta.string() + ": missing");
    }
    for (const fs::path& video_dir : sorted_subdirs(speaker_dir)) {
      VideoRecord video;
      video.video_id = video_dir.filename().string();
      video.speaker_id = speaker.speaker_id;
      video.media_path = video_dir.string();
      const fs::path vmeta = video_dir / "video.json";
      if (fs::exists(vmeta)) {
        const auto j = read_json(vmeta);
        if (const std::string id = string_field(j, "video_id"); !id.empty()) video.video_id = id;
        video.recorded_date =
            resolve_recorded_date(string_field(j, "title"), string_field(j, "description"),
                                  date_field(j, "published", vmeta, corpus.warnings));
      } else {
        corpus.warnings.push_back(vmeta.string() + ": missing");
      }
      video.segments = list_files(video_dir / "segments", {".wav"});
      video.faces = list_files(video_dir / "faces", {".png", ".jpg", ".jpeg"});
      corpus.videos.push_back(std::move(video));
    }
    corpus.speakers.push_back(std::move(speaker));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Manifest

std::string split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    case Split::kUnassigned: return "unassigned";
  }
  return "?";
}

ManifestBuild build_manifest(const std::vector<SpeakerRecord>& speakers,
                             const std::vector<VideoRecord>& videos, int cap_per_speaker) {
  if (cap_per_speaker < 0) fail(ErrorCode::kRange, "cap_per_speaker must be >= 0");
  ManifestBuild out;
  std::map<std::string, const SpeakerRecord*> by_id;
  for (const auto& s : speakers) {
    if (!by_id.emplace(s.speaker_id, &s).second) {
      fail(ErrorCode::kValidation, "duplicate speaker id '" + s.speaker_id + "'");
    }
  }
  std::map<std::string, std::vector<const VideoRecord*>> grouped;
  for (const auto& v : videos) {
    if (!by_id.count(v.speaker_id)) {
      out.warnings.push_back("video " + v.video_id + ": unknown speaker '" + v.speaker_id + "'");
      continue;
    }
    grouped[v.speaker_id].push_back(&v);
  }
  for (const auto& [id, speaker] : by_id) {
    auto it = grouped.find(id);
    if (it == grouped.end()) continue;
    if (!speaker->birth_date) {
      out.warnings.push_back("speaker " + id + ": no birth date, skipped");
      continue;
    }
    auto& list = it->second;
    std::sort(list.begin(), list.end(), [](const VideoRecord* a, const VideoRecord* b) {
      return a->video_id < b->video_id;
    });
    int kept = 0;
    for (const VideoRecord* v : list) {
      if (kept >= cap_per_speaker) break;
      if (!v->recorded_date) {
        out.warnings.push_back("video " + v->video_id + ": no recording date, skipped");
        continue;
      }
      if (*v->recorded_date < *speaker->birth_date) {
        out.warnings.push_back("video " + v->video_id + ": recorded before birth, skipped");
        continue;
      }
      const int age = compute_age(*speaker->birth_date, *v->recorded_date);
      ++kept;
      for (std::size_t i = 0; i < v->segments.size(); ++i) {
        ManifestEntry e;
        e.audio_path = v->segments[i];
        if (!v->faces.empty()) e.face_path = v->faces[i % v->faces.size()];
        e.age = age;
        e.speaker_id = id;
        e.gender = speaker->gender;
        out.entries.push_back(std::move(e));
      }
    }
    out.videos_retained += kept;
  }
  return out;
}

namespace {

constexpr const char* kManifestHeader = "audio_path\tface_path\tage\tspeaker_id\tsplit\tgender";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void check_field(const std::string& value, const char* what) {
  if (value.find_first_of("\t\n\r") != std::string::npos) {
    fail(ErrorCode::kValidation, std::string("manifest: ") + what + " contains a tab or newline");
  }
}

}  // namespace

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& e : entries) {
    check_field(e.audio_path, "audio_path");
    check_field(e.face_path, "face_path");
    check_field(e.speaker_id, "speaker_id");
    check_field(e.gender, "gender");
    out += e.audio_path + '\t' + e.face_path + '\t' + std::to_string(e.age) + '\t' +
           e.speaker_id + '\t' + split_name(e.split) + '\t' + e.gender + '\n';
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kManifestHeader) {
    fail(ErrorCode::kSchema, "manifest: missing or unexpected header line");
  }
  std::vector<ManifestEntry> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = "manifest line " + std::to_string(i + 1) + ": ";
    const auto f = split_tabs(lines[i]);
    if (f.size() != 6) fail(ErrorCode::kSchema, where + "expected 6 fields");
    ManifestEntry e;
    e.audio_path = f[0];
    e.face_path = f[1];
    auto r = std::from_chars(f[2].data(), f[2].data() + f[2].size(), e.age);
    if (r.ec != std::errc() || r.ptr != f[2].data() + f[2].size() || e.age < 0) {
      fail(ErrorCode::kSchema, where + "bad age '" + f[2] + "'");
    }
    e.speaker_id = f[3];
    if (f[4] == "train") e.split = Split::kTrain;
    else if (f[4] == "test") e.split = Split::kTest;
    else if (f[4] == "unassigned") e.split = Split::kUnassigned;
    else fail(ErrorCode::kSchema, where + "bad split '" + f[4] + "'");
    e.gender = f[5];
    if (e.audio_path.empty()) fail(ErrorCode::kSchema, where + "empty audio_path");
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  const std::string text = format_manifest(entries);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  const auto bytes = read_file(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()));
}

// ---------------------------------------------------------------------------
// Holdout split

namespace {

int stratum_of(const ManifestEntry& e, const std::optional<AgeScheme>& scheme) {
  if (!scheme) return 0;
  return age_to_bin(e.age, *scheme).value_or(-1);
}

void check_coverage(const std::vector<ManifestEntry>& entries, AgeScheme scheme) {
  std::vector<int> seen(scheme_classes(scheme), 0);
  for (const auto& e : entries) {
    if (e.split != Split::kTrain) continue;
    if (auto bin = age_to_bin(e.age, scheme)) seen[*bin] = 1;
  }
  const auto labels = scheme_labels(scheme);
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) {
      fail(ErrorCode::kStratification,
           "class " + labels[c] + " has no training entries under " + scheme_name(scheme));
    }
  }
}

}  // namespace

void split_holdout(std::vector<ManifestEntry>& entries, const SplitOptions& options) {
  const std::size_t n = entries.size();
  if (options.test_size < 0 || static_cast<std::size_t>(options.test_size) >= n) {
    fail(ErrorCode::kValidation, "test_size " + std::to_string(options.test_size) +
                                     " must be below the manifest size " + std::to_string(n));
  }
  for (auto& e : entries) e.split = Split::kTrain;
  const Rng rng(options.seed);

  if (options.speaker_disjoint) {
    std::vector<std::string> ids;
    std::map<std::string, long> sizes;
    for (const auto& e : entries) {
      if (sizes[e.speaker_id]++ == 0) ids.push_back(e.speaker_id);
    }
    std::sort(ids.begin(), ids.end());
    Rng order = rng.split(0);
    order.shuffle(std::span(ids));
    std::set<std::string> test;
    long filled = 0;
    for (const auto& id : ids) {
      if (filled + sizes[id] <= options.test_size) {
        test.insert(id);
        filled += sizes[id];
      }
    }
    if (options.test_size > 0 && filled == 0) {
      fail(ErrorCode::kValidation, "no speaker fits in a test set of " +
                                       std::to_string(options.test_size) + " entries");
    }
    for (auto& e : entries) {
      if (test.count(e.speaker_id)) e.split = Split::kTest;
    }
  } else {
    // Strata are age classes (one stratum when not stratifying).
    std::map<int, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < n; ++i) strata[stratum_of(entries[i], options.stratify)].push_back(i);
    // Largest-remainder allocation of the test quota.
    std::map<int, long> quota;
    std::vector<std::pair<double, int>> remainders;
    long assigned = 0;
    for (const auto& [key, members] : strata) {
      const double exact = static_cast<double>(options.test_size) * members.size() / n;
      quota[key] = static_cast<long>(exact);
      assigned += quota[key];
      remainders.push_back({exact - quota[key], key});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < options.test_size; ++i, ++assigned) {
      ++quota[remainders[i % remainders.size()].second];
    }
    for (auto& [key, members] : strata) {
      Rng r = rng.split(static_cast<std::uint64_t>(key + 2));
      r.shuffle(std::span(members));
      const long take = std::min<long>(quota[key], static_cast<long>(members.size()));
      for (long i = 0; i < take; ++i) entries[members[i]].split = Split::kTest;
    }
  }
  if (options.stratify) check_coverage(entries, *options.stratify);
}

// ---------------------------------------------------------------------------
// Common Voice

std::optional<int> common_voice_age(const std::string& token) {
  static const std::map<std::string, int> kAges = {
      {"teens", 15},    {"twenties", 25}, {"thirties", 35}, {"fourties", 45},
      {"forties", 45},  {"fifties", 55},  {"sixties", 65},  {"seventies", 75},
      {"eighties", 85}, {"nineties", 95}};
  const auto it = kAges.find(token);
  if (it == kAges.end()) return std::nullopt;
  return it->second;
}

CommonVoiceTable parse_common_voice(const std::string& tsv) {
  const auto lines = split_lines(tsv);
  if (lines.empty()) fail(ErrorCode::kSchema, "common voice: empty input");
  const auto header = split_tabs(lines[0]);
  auto column = [&](std::initializer_list<const char*> names) -> int {
    for (const char* name : names) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it != header.end()) return static_cast<int>(it - header.begin());
    }
    return -1;
  };
  const int path_col = column({"path"});
  const int age_col = column({"age"});
  const int gender_col = column({"gender"});
  const int accent_col = column({"accents", "accent"});
  if (path_col < 0 || age_col < 0 || gender_col < 0) {
    fail(ErrorCode::kSchema, "common voice: header must contain path, age and gender");
  }
  CommonVoiceTable table;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const int line = static_cast<int>(i + 1);
    const auto f = split_tabs(lines[i]);
    if (f.size() != header.size()) {
      table.errors.push_back({line, "expected " + std::to_string(header.size()) + " fields, got " +
                                        std::to_string(f.size())});
      continue;
    }
    CommonVoiceRow row;
    row.clip_path = f[path_col];
    row.age_bucket = f[age_col];
    row.gender = f[gender_col];
    if (accent_col >= 0) row.accent = f[accent_col];
    if (!row.age_bucket.empty()) {
      row.age = common_voice_age(row.age_bucket);
      if (!row.age) {
        table.errors.push_back({line, "unknown age bucket '" + row.age_bucket + "'"});
        continue;
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Statistics

double DatasetStats::share_30_to_60() const {
  return total ? static_cast<double>(age_30_to_60) / static_cast<double>(total) : 0.0;
}

DatasetStats dataset_stats(const std::vector<ManifestEntry>& entries) {
  DatasetStats s;
  std::set<std::string> speakers;
  for (AgeScheme scheme : {AgeScheme::kDecade10, AgeScheme::kQuarter25, AgeScheme::kAb}) {
    s.scheme_counts[scheme].assign(scheme_classes(scheme), 0);
  }
  for (const auto& e : entries) {
    ++s.total;
    ++s.age_histogram[e.age];
    if (e.age >= 30 && e.age <= 60) ++s.age_30_to_60;
    for (auto& [scheme, counts] : s.scheme_counts) {
      if (auto bin = age_to_bin(e.age, scheme)) ++counts[*bin];
      else ++s.ab_excluded;
    }
    ++s.gender_counts[e.gender.empty() ? "unknown" : e.gender];
    speakers.insert(e.speaker_id);
  }
  s.speakers = static_cast<long>(speakers.size());
  return s;
}

std::string DatasetStats::to_csv() const {
  std::ostringstream out;
  out << "section,key,count\n";
  for (const auto& [age, count] : age_histogram) out << "age," << age << ',' << count << '\n';
  for (const auto& [scheme, counts] : scheme_counts) {
    const auto labels = scheme_labels(scheme);
    for (std::size_t c = 0; c < counts.size(); ++c) {
      out << scheme_name(scheme) << ',' << labels[c] << ',' << counts[c] << '\n';
    }
  }
  out << "ab,excluded," << ab_excluded << '\n';
  for (const auto& [gender, count] : gender_counts) out << "gender," << gender << ',' << count << '\n';
  return out.str();
}

std::string DatasetStats::summary() const {
  std::ostringstream out;
  out << "entries: " << total << "\nspeakers: " << speakers << '\n';
  if (total == 0) return out.str();
  out.setf(std::ios::fixed);
  out.precision(1);
  out << "ages 30-60: " << 100.0 * share_30_to_60() << "%\n";
  for (const auto& [gender, count] : gender_counts) {
    out << "gender " << gender << ": " << 100.0 * count / total << "%\n";
  }
  out << "age range: " << age_histogram.begin()->first << "-" << age_histogram.rbegin()->first
      << '\n';
  return out.str();
}

}  // namespace voxage
