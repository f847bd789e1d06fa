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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "voxage/ingest.hpp"

using namespace voxage;
namespace fs = std::filesystem;

namespace {

// Naive calendar used as an independent oracle.
bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }
int month_len(int y, int m) {
  static const int kLen[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && leap(y) ? 29 : kLen[m - 1];
}
Date next_day(Date d) {
  if (++d.day > month_len(d.year, d.month)) {
    d.day = 1;
    if (++d.month > 12) {
      d.month = 1;
      ++d.year;
    }
  }
  return d;
}
// Whole years: count anniversaries by walking day by day.
int oracle_age(Date birth, const Date& recorded) {
  int age = 0;
  Date d = birth;
  while (true) {
    d = next_day(d);
    if (recorded < d) return age;
    const bool anniversary =
        (d.month == birth.month && d.day == birth.day) ||
        (birth.month == 2 && birth.day == 29 && !leap(d.year) && d.month == 3 && d.day == 1);
    if (anniversary) ++age;
  }
}

ManifestEntry entry(const std::string& path, int age, const std::string& speaker) {
  ManifestEntry e;
  e.audio_path = path;
  e.age = age;
  e.speaker_id = speaker;
  return e;
}

std::vector<ManifestEntry> synthetic_manifest(int n) {
  std::vector<ManifestEntry> out;
  for (int i = 0; i < n; ++i) {
    out.push_back(entry("seg" + std::to_string(i) + ".wav", 15 + (i * 7) % 70,
                        "spk" + std::to_string(i % 9)));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path) << text;
}

}  // namespace

TEST_CASE("compute_age: calendar examples and chronology error") {
  CHECK(compute_age(Date::parse("1960-01-01"), Date::parse("2010-06-01")) == 50);
  CHECK(compute_age(Date::parse("1960-12-31"), Date::parse("2010-06-01")) == 49);
  CHECK(compute_age(Date::parse("2010-06-01"), Date::parse("2010-06-01")) == 0);
  CHECK(compute_age(Date::parse("2000-02-29"), Date::parse("2001-02-28")) == 0);
  CHECK(compute_age(Date::parse("2000-02-29"), Date::parse("2001-03-01")) == 1);
  try {
    compute_age(Date::parse("2010-06-02"), Date::parse("2010-06-01"));
    FAIL("expected a chronology error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kChronology);
  }
}

TEST_CASE("Date: parsing, validity and day arithmetic") {
  CHECK(Date::parse("2024-02-29").to_string() == "2024-02-29");
  for (const char* bad : {"2023-02-29", "2023-13-01", "2023-1-01", "20230101", "2023-01-00",
                          "abcd-ef-gh", ""}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(Date::parse(bad), Error);
  }
  CHECK(Date::parse("1970-01-01").days() == 0);
  CHECK(Date::parse("2000-03-01").days() - Date::parse("2000-02-28").days() == 2);
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto days = static_cast<std::int64_t>(rng.below(60000)) - 20000;
    const Date d = Date::from_days(days);
    CHECK(d.days() == days);
    CHECK(next_day(d) == Date::from_days(days + 1));
  }
}

TEST_CASE("compute_age: matches a day-walking oracle and is shift invariant") {
  Rng rng(5);
  auto contains_leap_day = [](const Date& from, std::int64_t span) {
    for (std::int64_t k = 0; k <= span; ++k) {
      const Date d = Date::from_days(from.days() + k);
      if (d.month == 2 && d.day == 29) return true;
    }
    return false;
  };
  int shifted = 0;
  for (int i = 0; i < 400; ++i) {
    const Date birth = Date::from_days(-10000 + static_cast<std::int64_t>(rng.below(20000)));
    const Date recorded = Date::from_days(birth.days() + static_cast<std::int64_t>(rng.below(30000)));
    const int age = compute_age(birth, recorded);
    CHECK(age == oracle_age(birth, recorded));
    const auto k = static_cast<std::int64_t>(1 + rng.below(300));
    if (contains_leap_day(birth, k) || contains_leap_day(recorded, k)) continue;
    ++shifted;
    CHECK(compute_age(Date::from_days(birth.days() + k), Date::from_days(recorded.days() + k)) ==
          age);
  }
  CHECK(shifted > 100);
}

TEST_CASE("recording date: text formats and precedence") {
  CHECK(find_date_in_text("Interview (2012-05-17) part 2") == Date{2012, 5, 17});
  CHECK(find_date_in_text("Live on March 3, 2015") == Date{2015, 3, 3});
  CHECK(find_date_in_text("recorded 7 Sept 2009 in Paris") == Date{2009, 9, 7});
  CHECK(find_date_in_text("Jan 5 2001 then 2003-01-01") == Date{2001, 1, 5});
  CHECK_FALSE(find_date_in_text("Season 2014 highlights").has_value());
  CHECK_FALSE(find_date_in_text("2014-02-30").has_value());

  const Date published{2020, 1, 1};
  CHECK(resolve_recorded_date("talk 2011-04-04", "filmed 2010-01-01", published) ==
        Date{2011, 4, 4});
  CHECK(resolve_recorded_date("talk", "filmed 2010-01-01", published) == Date{2010, 1, 1});
  CHECK(resolve_recorded_date("talk", "no date", published) == published);
  CHECK_FALSE(resolve_recorded_date("", "", std::nullopt).has_value());
}

TEST_CASE("build_manifest: 3 speakers x 20 videos capped at 15") {
  std::vector<SpeakerRecord> speakers;
  std::vector<VideoRecord> videos;
  for (int s = 0; s < 3; ++s) {
    SpeakerRecord sp;
    sp.speaker_id = "id" + std::to_string(s);
    sp.birth_date = Date{1950 + 10 * s, 6, 15};
    sp.gender = s % 2 ? "female" : "male";
    speakers.push_back(sp);
    for (int v = 0; v < 20; ++v) {
      VideoRecord vr;
      vr.speaker_id = sp.speaker_id;
      vr.video_id = "v" + std::to_string(100 + (v * 7) % 20);  // scrambled listing order
      vr.recorded_date = Date{2015, 1, 1 + v};
      vr.segments = {vr.video_id + "/00.wav", vr.video_id + "/01.wav"};
      vr.faces = {vr.video_id + "/face.png"};
      videos.push_back(vr);
    }
  }
  const ManifestBuild built = build_manifest(speakers, videos, 15);
  CHECK(built.videos_retained == 45);
  CHECK(built.entries.size() == 90);
  std::set<std::string> kept;
  for (const auto& e : built.entries) kept.insert(e.audio_path.substr(0, 4));
  CHECK(kept.size() == 15);
  CHECK(*kept.rbegin() == "v114");  // lexicographically first 15 ids
  CHECK(built.entries[0].face_path == "v100/face.png");
  CHECK(built.entries[1].face_path == "v100/face.png");

  CHECK(build_manifest(speakers, videos, 0).entries.empty());
  CHECK(build_manifest(speakers, videos, 0).videos_retained == 0);

  auto reversed_s = speakers;
  auto reversed_v = videos;
  std::reverse(reversed_s.begin(), reversed_s.end());
  std::reverse(reversed_v.begin(), reversed_v.end());
  CHECK(format_manifest(build_manifest(reversed_s, reversed_v, 15).entries) ==
        format_manifest(built.entries));

  speakers[1].birth_date.reset();
  const ManifestBuild partial = build_manifest(speakers, videos, 15);
  CHECK(partial.videos_retained == 30);
  CHECK(partial.warnings.size() == 1);
}

TEST_CASE("build_manifest: undated and impossible videos are skipped") {
  SpeakerRecord sp{"s", "", Date{1990, 1, 1}, ""};
  VideoRecord undated{"a", "s", std::nullopt, "", {"a.wav"}, {}};
  VideoRecord early{"b", "s", Date{1980, 1, 1}, "", {"b.wav"}, {}};
  VideoRecord good{"c", "s", Date{2020, 1, 1}, "", {"c.wav"}, {}};
  VideoRecord stray{"d", "nobody", Date{2020, 1, 1}, "", {"d.wav"}, {}};
  const ManifestBuild built = build_manifest({sp}, {undated, early, good, stray}, 1);
  REQUIRE(built.entries.size() == 1);
  CHECK(built.entries[0].audio_path == "c.wav");
  CHECK(built.entries[0].age == 30);
  CHECK(built.entries[0].face_path.empty());
  CHECK(built.warnings.size() == 3);
}

TEST_CASE("scan_corpus: directory layout and metadata precedence") {
  const fs::path root = fs::temp_directory_path() / "voxage_corpus_test";
  fs::remove_all(root);
  write_text(root / "alice" / "speaker.json",
             R"({"name": "Alice", "birth_date": "1970-05-20", "gender": "female"})");
  write_text(root / "alice" / "vid2" / "video.json",
             R"({"title": "Keynote 2011-03-04", "description": "2010-01-01", "published": "2012-01-01"})");
  write_text(root / "alice" / "vid2" / "segments" / "001.wav", "x");
  write_text(root / "alice" / "vid2" / "segments" / "000.wav", "x");
  write_text(root / "alice" / "vid2" / "faces" / "000.jpg", "x");
  write_text(root / "alice" / "vid1" / "video.json",
             R"({"title": "Q&A", "description": "", "published": "2019-09-09"})");
  write_text(root / "alice" / "vid1" / "segments" / "000.wav", "x");
  write_text(root / "bob" / "v" / "segments" / "000.wav", "x");

  const Corpus corpus = scan_corpus(root.string());
  REQUIRE(corpus.speakers.size() == 2);
  CHECK(corpus.speakers[0].birth_date == Date{1970, 5, 20});
  CHECK_FALSE(corpus.speakers[1].birth_date.has_value());
  REQUIRE(corpus.videos.size() == 3);
  CHECK(corpus.videos[0].video_id == "vid1");
  CHECK(corpus.videos[0].recorded_date == Date{2019, 9, 9});
  CHECK(corpus.videos[1].recorded_date == Date{2011, 3, 4});
  CHECK(corpus.videos[1].segments.size() == 2);
  CHECK(corpus.videos[1].segments[0] < corpus.videos[1].segments[1]);
  CHECK(corpus.warnings.size() == 2);  // bob's speaker.json and video.json

  const ManifestBuild built = build_manifest(corpus.speakers, corpus.videos, 45);
  CHECK(built.entries.size() == 3);
  CHECK(built.entries[0].age == 49);
  CHECK(built.entries[1].age == 40);
  CHECK(built.entries[1].gender == "female");

  write_text(root / "carol" / "speaker.json", "{not json");
  CHECK_THROWS_AS(scan_corpus(root.string()), Error);
  CHECK_THROWS_AS(scan_corpus((root / "missing").string()), Error);
  fs::remove_all(root);
}

TEST_CASE("manifest text: round trip and schema errors") {
  auto entries = synthetic_manifest(5);
  entries[0].face_path = "f.png";
  entries[1].split = Split::kTest;
  entries[2].split = Split::kTrain;
  entries[3].gender = "male";
  const std::string text = format_manifest(entries);
  CHECK(text.rfind("audio_path\tface_path\tage\tspeaker_id\tsplit\tgender\n", 0) == 0);
  CHECK(format_manifest(parse_manifest(text)) == text);

  CHECK_THROWS_AS(parse_manifest("path\tage\n"), Error);
  const std::string header = "audio_path\tface_path\tage\tspeaker_id\tsplit\tgender\n";
  CHECK_THROWS_AS(parse_manifest(header + "a.wav\t\t-3\ts\ttrain\t\n"), Error);
  CHECK_THROWS_AS(parse_manifest(header + "a.wav\t\t30\ts\tdev\t\n"), Error);
  CHECK_THROWS_AS(parse_manifest(header + "a.wav\t30\ts\n"), Error);
  CHECK(parse_manifest(header + "a.wav\t\t30\ts\ttrain\t\r\n").size() == 1);
  entries[4].speaker_id = "bad\tid";
  CHECK_THROWS_AS(format_manifest(entries), Error);
}

TEST_CASE("split_holdout: sizes, determinism and errors") {
  auto a = synthetic_manifest(100);
  split_holdout(a, {10, 3});
  CHECK(std::count_if(a.begin(), a.end(), [](auto& e) { return e.split == Split::kTest; }) == 10);
  CHECK(std::count_if(a.begin(), a.end(), [](auto& e) { return e.split == Split::kTrain; }) == 90);
  std::set<std::string> train, test;
  for (const auto& e : a) (e.split == Split::kTest ? test : train).insert(e.audio_path);
  for (const auto& p : test) CHECK_FALSE(train.count(p));

  auto b = synthetic_manifest(100);
  split_holdout(b, {10, 3});
  CHECK(format_manifest(a) == format_manifest(b));
  auto c = synthetic_manifest(100);
  split_holdout(c, {10, 4});
  CHECK(format_manifest(a) != format_manifest(c));

  CHECK_THROWS_AS(split_holdout(a, {100, 1}), Error);
  CHECK_THROWS_AS(split_holdout(a, {-1, 1}), Error);
}

TEST_CASE("split_holdout: stratified coverage and speaker-disjoint mode") {
  auto entries = synthetic_manifest(120);
  SplitOptions strat{30, 9, AgeScheme::kQuarter25, false};
  split_holdout(entries, strat);
  std::map<int, int> all, tested;
  for (const auto& e : entries) {
    const int bin = *age_to_bin(e.age, AgeScheme::kQuarter25);
    ++all[bin];
    if (e.split == Split::kTest) ++tested[bin];
  }
  int total_test = 0;
  for (const auto& [bin, n] : all) {
    CHECK(std::abs(tested[bin] - 30.0 * n / 120) < 1.0);  // proportional allocation
    CHECK(tested[bin] < n);
    total_test += tested[bin];
  }
  CHECK(total_test == 30);

  // No entry older than 75: class ">75" cannot be covered.
  std::vector<ManifestEntry> young;
  for (int i = 0; i < 20; ++i) young.push_back(entry(std::to_string(i), 20 + i, "s"));
  try {
    split_holdout(young, {5, 1, AgeScheme::kQuarter25, false});
    FAIL("expected a stratification error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kStratification);
  }

  auto by_speaker = synthetic_manifest(90);
  split_holdout(by_speaker, {25, 2, std::nullopt, true});
  std::set<std::string> train_spk, test_spk;
  long n_test = 0;
  for (const auto& e : by_speaker) {
    if (e.split == Split::kTest) {
      test_spk.insert(e.speaker_id);
      ++n_test;
    } else {
      train_spk.insert(e.speaker_id);
    }
  }
  CHECK(n_test == 20);  // two whole speakers of 10 entries
  for (const auto& s : test_spk) CHECK_FALSE(train_spk.count(s));
  CHECK_THROWS_AS(split_holdout(by_speaker, {5, 2, std::nullopt, true}), Error);
}

TEST_CASE("common voice: buckets, unlabeled rows and lenient parsing") {
  CHECK(common_voice_age("teens") == 15);
  CHECK(common_voice_age("twenties") == 25);
  CHECK(common_voice_age("fourties") == 45);
  CHECK(common_voice_age("forties") == 45);
  CHECK(common_voice_age("nineties") == 95);
  CHECK_FALSE(common_voice_age("elderly").has_value());

  const std::string tsv =
      "client_id\tpath\tsentence\tup_votes\tdown_votes\tage\tgender\taccents\n"
      "c1\ta.mp3\tHello there\t2\t0\ttwenties\tmale\tus\n"
      "c2\tb.mp3\tGood day\t2\t0\t\tfemale\t\n"
      "c3\tc.mp3\tbroken row\t2\n"
      "c4\td.mp3\tUnknown\t1\t0\tcentenarian\tmale\t\n"
      "c5\te.mp3\tLast\t3\t1\tfourties\tfemale\tengland\r\n";
  const CommonVoiceTable t = parse_common_voice(tsv);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].age == 25);
  CHECK(t.rows[0].accent == "us");
  CHECK_FALSE(t.rows[1].labeled());
  CHECK(t.rows[2].age == 45);
  CHECK(t.rows[2].accent == "england");
  REQUIRE(t.errors.size() == 2);
  CHECK(t.errors[0].line == 4);
  CHECK(t.errors[1].line == 5);

  CHECK_THROWS_AS(parse_common_voice("client_id\tpath\tgender\n"), Error);
  CHECK_THROWS_AS(parse_common_voice(""), Error);
}

TEST_CASE("dataset_stats: single entry, empty manifest and sums") {
  const DatasetStats one = dataset_stats({entry("a", 40, "s")});
  CHECK(one.age_histogram.size() == 1);
  CHECK(one.age_histogram.at(40) == 1);
  CHECK(one.share_30_to_60() == 1.0);
  CHECK(one.ab_excluded == 1);
  CHECK(one.gender_counts.at("unknown") == 1);

  const DatasetStats none = dataset_stats({});
  CHECK(none.total == 0);
  CHECK(none.share_30_to_60() == 0.0);
  CHECK(none.summary().find("entries: 0") != std::string::npos);
  CHECK(none.to_csv().find("\nage,") == std::string::npos);
  CHECK(none.to_csv().find("ab,excluded,0\n") != std::string::npos);

  auto entries = synthetic_manifest(77);
  entries[0].gender = "female";
  const DatasetStats s = dataset_stats(entries);
  long hist = 0;
  for (const auto& [age, n] : s.age_histogram) hist += n;
  CHECK(hist == 77);
  for (const auto& [scheme, counts] : s.scheme_counts) {
    long sum = 0;
    for (long c : counts) sum += c;
    CHECK(sum + (scheme == AgeScheme::kAb ? s.ab_excluded : 0) == 77);
  }
  CHECK(s.speakers == 9);
  CHECK(s.to_csv().find("gender,female,1\n") != std::string::npos);
}
