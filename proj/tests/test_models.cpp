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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "voxage/models.hpp"

using namespace voxage;
using nn::Shape;
using nn::Tensor;
using nn::Variable;

namespace {

// Small nets keep the suite fast on one core.
VannConfig small_config(Modality modality, int classes = 2) {
  VannConfig c;
  c.modality = modality;
  c.num_classes = classes;
  c.conv_filters = 4;
  c.conv_stride = 4;
  c.dense_width = 16;
  c.fusion_width = 16;
  c.mfb_output = 16;
  return c;
}

Sample random_sample(Rng& rng, bool audio, bool visual, int label) {
  Sample s;
  s.label = label;
  if (audio) {
    s.audio.resize(kAudioFeatures);
    for (float& v : s.audio) v = static_cast<float>(rng.uniform());
  }
  if (visual) {
    s.visual.resize(kVisualFeatures);
    for (float& v : s.visual) v = static_cast<float>(rng.uniform());
  }
  return s;
}

std::vector<const Sample*> pointers(const Dataset& ds) {
  std::vector<const Sample*> out;
  for (const auto& s : ds.samples) out.push_back(&s);
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("voxage_models_" + name)).string();
}

std::vector<std::uint8_t> slurp(const std::string& path) { return read_file(path); }

Variable random_var(Rng& rng, const Shape& shape) {
  Tensor<float> t(shape);
  for (float& v : t.storage()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return Variable(std::move(t));
}

const Dataset& band_train() {
  static const Dataset ds = make_band_task(160, 11);
  return ds;
}
const Dataset& band_test() {
  static const Dataset ds = make_band_task(80, 12);
  return ds;
}

}  // namespace

TEST_CASE("age_to_bin: caption boundaries") {
  CHECK(age_to_bin(25, AgeScheme::kAb) == 0);
  CHECK(age_to_bin(61, AgeScheme::kAb) == 1);
  CHECK_FALSE(age_to_bin(40, AgeScheme::kAb).has_value());
  CHECK_FALSE(age_to_bin(26, AgeScheme::kAb).has_value());
  CHECK_FALSE(age_to_bin(60, AgeScheme::kAb).has_value());
  CHECK(age_to_bin(26, AgeScheme::kQuarter25) == 1);
  CHECK(age_to_bin(25, AgeScheme::kQuarter25) == 0);
  CHECK(age_to_bin(50, AgeScheme::kQuarter25) == 1);
  CHECK(age_to_bin(51, AgeScheme::kQuarter25) == 2);
  CHECK(age_to_bin(75, AgeScheme::kQuarter25) == 2);
  CHECK(age_to_bin(76, AgeScheme::kQuarter25) == 3);
  CHECK(age_to_bin(19, AgeScheme::kDecade10) == 0);
  CHECK(age_to_bin(20, AgeScheme::kDecade10) == 1);
  CHECK(age_to_bin(69, AgeScheme::kDecade10) == 5);
  CHECK(age_to_bin(70, AgeScheme::kDecade10) == 6);
  CHECK(age_to_bin(104, AgeScheme::kDecade10) == 6);
  CHECK_THROWS_AS(age_to_bin(-1, AgeScheme::kAb), Error);
  CHECK_THROWS_AS(parse_scheme("decade"), Error);
  CHECK(parse_scheme("quarter25") == AgeScheme::kQuarter25);
}

TEST_CASE("age_to_bin: total on decade10/quarter25, partial only on ab") {
  for (AgeScheme s : {AgeScheme::kDecade10, AgeScheme::kQuarter25, AgeScheme::kAb}) {
    CHECK(scheme_labels(s).size() == static_cast<std::size_t>(scheme_classes(s)));
    int previous = 0;
    for (int tenth = 0; tenth <= 1200; ++tenth) {
      const double age = tenth / 10.0;
      const auto bin = age_to_bin(age, s);
      if (s == AgeScheme::kAb) {
        CHECK(bin.has_value() == (age <= 25 || age > 60));
        continue;
      }
      REQUIRE(bin.has_value());
      CHECK(*bin >= previous);  // monotone in age
      CHECK(*bin < scheme_classes(s));
      previous = *bin;
    }
    if (s != AgeScheme::kAb) CHECK(previous == scheme_classes(s) - 1);
  }
}

TEST_CASE("vann: logits shape, softmax rows and config errors") {
  Rng rng(3);
  for (Modality m : {Modality::kAudio, Modality::kVisual, Modality::kAvCat, Modality::kAvMfb}) {
    CAPTURE(modality_name(m));
    VannModel model(small_config(m, 4));
    Sample a = random_sample(rng, model.uses_audio(), model.uses_visual(), 0);
    Sample b = random_sample(rng, model.uses_audio(), model.uses_visual(), 1);
    const Variable logits = model.logits({&a, &b}, true);
    CHECK(logits.shape() == Shape{2, 4});
    const Tensor<float> p = model.predict_proba({&a, &b});
    for (int n = 0; n < 2; ++n) {
      double sum = 0;
      for (int k = 0; k < 4; ++k) sum += p[n * 4 + k];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  VannModel audio(small_config(Modality::kAudio));
  Sample no_audio;
  CHECK_THROWS_AS(audio.logits({&no_audio}, false), Error);
  CHECK_THROWS_AS(audio.logits({}, false), Error);
  VannConfig bad = small_config(Modality::kAudio);
  bad.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(parse_modality("av"), Error);

  VannConfig c = small_config(Modality::kAvMfb, 7);
  c.seed = 99;
  const VannConfig back = VannConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK_THROWS_AS(VannConfig::from_json("{\"modality\": 3}"), Error);
}

TEST_CASE("vann: untrained model scores near chance on balanced random data") {
  // Binomial oracle: |acc - 1/K| <= 3 sqrt(p(1-p)/n).
  for (Modality m : {Modality::kAudio, Modality::kVisual}) {
    Rng rng(17);
    Dataset ds;
    ds.num_classes = 2;
    const int n = 200;
    for (int i = 0; i < n; ++i) {
      ds.samples.push_back(random_sample(rng, m == Modality::kAudio, m == Modality::kVisual, i % 2));
    }
    VannModel model(small_config(m));
    const double acc = evaluate(model, ds).accuracy;
    CHECK(std::abs(acc - 0.5) <= 3.0 * std::sqrt(0.25 / n));
  }
}

TEST_CASE("fuse_cat: width, batch mismatch and zero visual input") {
  Rng rng(5);
  const Variable a = random_var(rng, {3, 5});
  const Variable v = random_var(rng, {3, 7});
  CHECK(fuse_cat(a, v).shape() == Shape{3, 12});
  CHECK_THROWS_AS(fuse_cat(a, random_var(rng, {2, 7})), Error);

  // dense(concat(a, 0)) depends only on the audio rows of the weight.
  nn::Store store;
  const nn::Dense d = nn::Dense::create(store, "d", 12, 4, true, 1);
  store.at("d.bias").value().storage() = {0.1f, -0.2f, 0.3f, 0.0f};
  const Variable zero(Tensor<float>(Shape{3, 7}));
  const Tensor<float> fused = d(fuse_cat(a, zero)).value();
  const Tensor<float>& w = d.weight->value();
  for (int n = 0; n < 3; ++n) {
    for (int o = 0; o < 4; ++o) {
      double acc = d.bias->value()[o];
      for (int i = 0; i < 5; ++i) acc += a.value()[n * 5 + i] * w[i * 4 + o];
      CHECK(fused[n * 4 + o] == doctest::Approx(acc).epsilon(1e-5));
    }
  }
}

TEST_CASE("fusion models: gradients reach both branches") {
  Rng rng(8);
  for (Modality m : {Modality::kAvCat, Modality::kAvMfb}) {
    CAPTURE(modality_name(m));
    VannModel model(small_config(m));
    std::vector<Sample> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(random_sample(rng, true, true, i % 2));
    std::vector<const Sample*> ptrs;
    for (const auto& s : batch) ptrs.push_back(&s);
    model.store().zero_grad();
    Variable loss = nn::cross_entropy(model.logits(ptrs, true), std::vector<int>{0, 1, 0, 1});
    nn::backward(loss);
    for (const char* name : {"audio/conv.weight", "visual/conv.weight"}) {
      double norm = 0;
      for (float g : model.store().at(name).grad().storage()) norm += double(g) * g;
      CHECK_MESSAGE(norm > 0, name);
    }
  }
}

TEST_CASE("fuse_mfb: zero inputs, unit norm, k=1 algebra and asymmetry") {
  Rng rng(21);
  const int n = 3, d = 6, k = 4, o = 5;
  const Variable a = random_var(rng, {n, d});
  const Variable v = random_var(rng, {n, d});
  const Variable pa = random_var(rng, {d, k * o});
  const Variable pv = random_var(rng, {d, k * o});

  const Variable zero(Tensor<float>(Shape{n, d}));
  const Tensor<float> za = fuse_mfb(zero, v, pa, pv, k).value();
  const Tensor<float> zv = fuse_mfb(a, zero, pa, pv, k).value();
  for (float x : za.storage()) CHECK(x == 0.0f);
  for (float x : zv.storage()) CHECK(x == 0.0f);

  const Tensor<float> z = fuse_mfb(a, v, pa, pv, k).value();
  CHECK(z.shape() == Shape{n, o});
  for (int r = 0; r < n; ++r) {
    double sq = 0;
    for (int j = 0; j < o; ++j) sq += double(z[r * o + j]) * z[r * o + j];
    CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-5));
  }

  // k = 1: l2norm(sign(p) (sqrt(|p| + e) - sqrt(e))) with p = (a Pa) * (v Pv)
  // and the signed_sqrt smoothing e = 1e-6, recomputed in double.
  const Variable pa1 = random_var(rng, {d, o});
  const Variable pv1 = random_var(rng, {d, o});
  const Tensor<float> z1 = fuse_mfb(a, v, pa1, pv1, 1).value();
  for (int r = 0; r < n; ++r) {
    std::vector<double> s(o);
    double sq = 0;
    for (int j = 0; j < o; ++j) {
      double x = 0, y = 0;
      for (int i = 0; i < d; ++i) {
        x += double(a.value()[r * d + i]) * pa1.value()[i * o + j];
        y += double(v.value()[r * d + i]) * pv1.value()[i * o + j];
      }
      const double p = x * y;
      s[j] = (p < 0 ? -1.0 : 1.0) * (std::sqrt(std::abs(p) + 1e-6) - 1e-3);
      sq += s[j] * s[j];
    }
    for (int j = 0; j < o; ++j) {
      CHECK(z1[r * o + j] == doctest::Approx(s[j] / std::sqrt(sq)).epsilon(1e-4));
    }
  }

  // Swapping the modalities is invisible only with shared projections.
  const Tensor<float> same_ab = fuse_mfb(a, v, pa, pa, k).value();
  const Tensor<float> same_ba = fuse_mfb(v, a, pa, pa, k).value();
  for (std::size_t i = 0; i < same_ab.size(); ++i) {
    CHECK(same_ab[i] == doctest::Approx(same_ba[i]).epsilon(1e-5));
  }
  const Tensor<float> diff_ba = fuse_mfb(v, a, pa, pv, k).value();
  double gap = 0;
  for (std::size_t i = 0; i < z.size(); ++i) gap += std::abs(z[i] - diff_ba[i]);
  CHECK(gap > 1e-3);

  CHECK_THROWS_AS(fuse_mfb(a, v, pa, random_var(rng, {d, 3 * o}), k), Error);
  CHECK_THROWS_AS(fuse_mfb(a, v, pa, pv, 3), Error);  // 20 not divisible by 3
  CHECK_THROWS_AS(fuse_mfb(a, random_var(rng, {2, d}), pa, pv, k), Error);
  CHECK_THROWS_AS(fuse_mfb(a, v, pa, pv, 0), Error);
}

TEST_CASE("knn: exact match, separated clusters and tie-break") {
  KnnClassifier empty;
  CHECK_THROWS_AS(empty.fit({}, {}), Error);
  CHECK_THROWS_AS(empty.predict({1.0f}), Error);

  Rng rng(4);
  auto cluster = [&](double centre, int count) {
    std::vector<std::vector<float>> pts;
    for (int i = 0; i < count; ++i) {
      pts.push_back({static_cast<float>(centre + rng.normal()),
                     static_cast<float>(centre + rng.normal())});
    }
    return pts;
  };
  // Means 10 sigma apart along each axis.
  auto train0 = cluster(0, 30), train1 = cluster(10, 30);
  std::vector<std::vector<float>> x = train0;
  x.insert(x.end(), train1.begin(), train1.end());
  std::vector<int> y(30, 0);
  y.resize(60, 1);

  KnnClassifier one(1);
  one.fit(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(one.predict(x[i]) == y[i]);

  KnnClassifier five(5);
  five.fit(x, y);
  int correct = 0;
  for (const auto& p : cluster(0, 50)) correct += five.predict(p) == 0;
  for (const auto& p : cluster(10, 50)) correct += five.predict(p) == 1;
  CHECK(correct == 100);
  CHECK_THROWS_AS(five.predict({1.0f}), Error);

  // Two votes each, equal distance sums.
  KnnClassifier tie(2);
  tie.fit({{-1.0f}, {1.0f}}, {1, 0});
  CHECK(tie.predict({0.0f}) == 0);
  KnnClassifier nearer(4);
  nearer.fit({{-1.0f}, {-1.0f}, {2.0f}, {2.0f}}, {1, 1, 0, 0});
  CHECK(nearer.predict({0.0f}) == 1);  // equal votes, class 1 is closer
}

TEST_CASE("linear svm: separable set, zero input, scaling invariance, errors") {
  Rng rng(6);
  std::vector<std::vector<float>> x;
  std::vector<int> y;
  for (int i = 0; i < 80; ++i) {
    const int label = i % 2;
    const double u = rng.uniform(-3, 3);
    const double gap = rng.uniform(0.5, 2.0) * (label ? 1 : -1);
    // Separated by the line x1 = x0 with margin >= 0.5.
    x.push_back({static_cast<float>(u), static_cast<float>(u + gap)});
    y.push_back(label);
  }
  SvmConfig cfg;
  cfg.c = 10.0;
  cfg.epochs = 60;
  const LinearSvm svm = LinearSvm::train(x, y, 2, cfg);
  int correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) correct += svm.predict(x[i]) == y[i];
  CHECK(correct == 80);

  const auto& b = svm.bias();
  CHECK(svm.predict({0.0f, 0.0f}) ==
        static_cast<int>(std::max_element(b.begin(), b.end()) - b.begin()));

  // x -> s x with C -> C / s^2 keeps the objective's minimizer proportional.
  const double s = 4.0;
  std::vector<std::vector<float>> xs = x;
  for (auto& p : xs)
    for (float& v : p) v = static_cast<float>(v * s);
  SvmConfig scaled = cfg;
  scaled.c = cfg.c / (s * s);
  const LinearSvm svm_s = LinearSvm::train(xs, y, 2, scaled);
  int agree = 0;
  for (std::size_t i = 0; i < x.size(); ++i) agree += svm.predict(x[i]) == svm_s.predict(xs[i]);
  CHECK(agree == 80);

  const LinearSvm again = LinearSvm::train(x, y, 2, cfg);
  CHECK(again.margins({0.3f, -0.2f}) == svm.margins({0.3f, -0.2f}));

  CHECK_THROWS_AS(LinearSvm::train(x, std::vector<int>(80, 1), 2, cfg), Error);
  try {
    LinearSvm::train(x, std::vector<int>(80, 1), 2, cfg);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerate);
  }
  CHECK_THROWS_AS(svm.predict({1.0f}), Error);
}

TEST_CASE("baselines beat chance by 3 sigma on the band task") {
  std::vector<std::vector<float>> x;
  std::vector<int> y;
  for (const auto& s : band_train().samples) {
    x.push_back(s.audio);
    y.push_back(s.label);
  }
  KnnClassifier knn;
  knn.fit(x, y);
  const LinearSvm svm = LinearSvm::train(x, y, 2);
  std::vector<int> truth, knn_pred, svm_pred;
  for (const auto& s : band_test().samples) {
    truth.push_back(s.label);
    knn_pred.push_back(knn.predict(s.audio));
    svm_pred.push_back(svm.predict(s.audio));
  }
  const double n = static_cast<double>(truth.size());
  const double bar = 0.5 + 3.0 * std::sqrt(0.25 / n);
  CHECK(evaluate_predictions(truth, knn_pred, 2).accuracy >= bar);
  CHECK(evaluate_predictions(truth, svm_pred, 2).accuracy >= bar);
}

TEST_CASE("train: band task reaches 95% and the loss falls") {
  VannModel model(small_config(Modality::kAudio));
  ClassifierTrainer trainer(model, band_train(), band_test());
  trainer.run(40);
  REQUIRE(trainer.log().size() == 40);
  CHECK(trainer.log().back().train_loss < trainer.log().front().train_loss);
  const EvalResult r = evaluate(model, band_test(), scheme_labels(AgeScheme::kAb));
  CHECK(r.accuracy >= 0.95);
  CHECK(r.accuracy == doctest::Approx(trainer.log().back().test_acc));

  const std::string text = format_training_log(trainer.log());
  CHECK(text.rfind("epoch\ttrain_loss\ttest_acc\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 41);
}

TEST_CASE("train: deterministic checkpoint bytes and bit-exact resume") {
  const std::string p1 = temp_path("det1.vann"), p2 = temp_path("det2.vann");
  for (const std::string& path : {p1, p2}) {
    VannModel model(small_config(Modality::kAudio));
    ClassifierTrainer trainer(model, band_train(), band_test());
    trainer.run(2);
    save_vann(path, model, "ab");
  }
  CHECK(slurp(p1) == slurp(p2));
  CHECK(slurp(p1 + ".json") == slurp(p2 + ".json"));

  const std::string state = temp_path("resume.vann");
  VannModel full(small_config(Modality::kAudio));
  ClassifierTrainer uninterrupted(full, band_train(), band_test());
  uninterrupted.run(2);
  uninterrupted.save_state(state);
  const double expected_peek = uninterrupted.peek_next_loss();
  const EpochRecord expected = uninterrupted.run_epoch();

  VannModel fresh(small_config(Modality::kAudio));
  ClassifierTrainer resumed(fresh, band_train(), band_test());
  resumed.load_state(state);
  CHECK(resumed.epochs_done() == 2);
  CHECK(resumed.peek_next_loss() == expected_peek);
  const EpochRecord got = resumed.run_epoch();
  CHECK(got.epoch == 3);
  CHECK(got.train_loss == expected.train_loss);
  CHECK(got.test_acc == expected.test_acc);

  LoadedVann loaded = load_vann(p1);
  CHECK(loaded.scheme == "ab");
  VannModel direct(small_config(Modality::kAudio));
  ClassifierTrainer retrain(direct, band_train(), band_test());
  retrain.run(2);
  const auto batch = pointers(band_test());
  CHECK(loaded.model->predict_proba(batch).storage() == direct.predict_proba(batch).storage());

  for (const auto& p : {p1, p2, state}) {
    std::filesystem::remove(p);
    std::filesystem::remove(p + ".json");
  }
}

TEST_CASE("train: missing class and unlabeled samples are rejected") {
  Dataset only_low;
  only_low.num_classes = 2;
  for (const auto& s : band_train().samples) {
    if (s.label == 0) only_low.samples.push_back(s);
  }
  VannModel model(small_config(Modality::kAudio));
  try {
    ClassifierTrainer t(model, only_low, band_test());
    FAIL("expected a stratification error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kStratification);
  }
  Dataset unlabeled = band_test();
  unlabeled.samples[3].label = -1;
  try {
    evaluate(model, unlabeled);
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kValidation);
  }
}

TEST_CASE("confusion matrix: perfect, constant and recounted predictors") {
  Rng rng(9);
  std::vector<int> truth(300);
  for (int& t : truth) t = static_cast<int>(rng.below(4));

  const EvalResult perfect = evaluate_predictions(truth, truth, 4);
  CHECK(perfect.accuracy == 1.0);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) CHECK(perfect.confusion.at(i, j) == 0);

  const EvalResult constant = evaluate_predictions(truth, std::vector<int>(300, 2), 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (j != 2) CHECK(constant.confusion.at(i, j) == 0);
  long col = 0;
  for (int i = 0; i < 4; ++i) col += constant.confusion.at(i, 2);
  CHECK(col == 300);

  std::vector<int> pred(300);
  for (int& p : pred) p = static_cast<int>(rng.below(4));
  const EvalResult r = evaluate_predictions(truth, pred, 4, scheme_labels(AgeScheme::kQuarter25));
  int hits = 0;
  std::vector<long> rows(4, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    hits += truth[i] == pred[i];
    ++rows[truth[i]];
  }
  CHECK(r.confusion.total() == 300);
  CHECK(r.accuracy == doctest::Approx(hits / 300.0));
  for (int i = 0; i < 4; ++i) {
    long sum = 0;
    for (int j = 0; j < 4; ++j) sum += r.confusion.at(i, j);
    CHECK(sum == rows[i]);
  }
  const std::string csv = r.confusion.to_csv();
  CHECK(csv.rfind("truth\\predicted,<=25,26-50,51-75,>75\n<=25,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK_THROWS_AS(evaluate_predictions({0, 1}, {0}, 2), Error);
  CHECK_THROWS_AS(evaluate_predictions({0, 5}, {0, 1}, 2), Error);
}
