// Covers: seg_loss on hand-sized cases, feature layout, finite-difference
// gradients of the pixel loss, separable training, constant images, class
// restriction at prediction time.
#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "mcof/evaluation.hpp"
#include "mcof/pixel_model.hpp"

using namespace mcof;

namespace {

// Mean NLL over labelled pixels straight from the model, in double.
double pixel_loss_oracle(const SoftmaxModel& m, const std::vector<double>& feats, const LabelRaster& sup) {
  const int d = PixelFeatureLayout::kDim;
  std::vector<double> p(m.classes());
  double total = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < sup.pixel_count(); ++i) {
    if (sup[i] == kIgnore) continue;
    m.predict_proba(std::span<const double>(feats.data() + i * d, d), p);
    total -= std::log(p[sup[i]]);
    ++n;
  }
  return total / n;
}

// Left half red, right half blue; a few columns in the middle unlabelled.
struct TwoTone {
  ImageRaster image{24, 16};
  LabelRaster truth{24, 16};
  LabelRaster supervision{24, 16};
  SuperpixelMap sp;
  TwoTone() {
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 24; ++x) {
        const bool left = x < 12;
        image.set(x, y, left ? Rgb{210, 40, 40} : Rgb{40, 60, 200});
        truth.at(x, y) = left ? 1 : 2;
        supervision.at(x, y) = (x >= 10 && x < 14) ? kIgnore : truth.at(x, y);
      }
    }
    sp = segment(image, {0.0, 50.0, 1});
  }
};

}  // namespace

TEST_CASE("seg_loss small cases") {
  // Uniform two-class prediction: ln 2 whatever the labels.
  const ScalarRaster uniform(3, 1, 0.5f, 2);
  CHECK(seg_loss(uniform, LabelRaster(3, 1, std::vector<std::uint8_t>{0, 1, 1})) ==
        doctest::Approx(std::numbers::ln2).epsilon(1e-7));

  // Perfect one-hot prediction.
  ScalarRaster onehot(2, 1, 0.0f, 3);
  onehot[0 * 3 + 2] = 1.0f;
  onehot[1 * 3 + 0] = 1.0f;
  CHECK(seg_loss(onehot, LabelRaster(2, 1, std::vector<std::uint8_t>{2, 0})) == 0.0);

  // Hand sum with an ignored pixel: (-ln 0.25 - ln 0.5) / 2.
  ScalarRaster pr(3, 1, 0.0f, 2);
  const float vals[6] = {0.25f, 0.75f, 0.5f, 0.5f, 0.9f, 0.1f};
  for (int i = 0; i < 6; ++i) pr[i] = vals[i];
  const LabelRaster sup(3, 1, std::vector<std::uint8_t>{0, 1, kIgnore});
  CHECK(seg_loss(pr, sup) == doctest::Approx((std::log(4.0) + std::log(2.0)) / 2).epsilon(1e-7));
}

TEST_CASE("seg_loss is invariant to duplicating the image") {
  Rng rng(3);
  const auto pr = testing::random_scalar(rng, 5, 4, 3);
  ScalarRaster norm(5, 4, 0.0f, 3);
  LabelRaster sup(5, 4), twice_sup(10, 4);
  ScalarRaster twice(10, 4, 0.0f, 3);
  for (std::size_t i = 0; i < 20; ++i) {
    const float s = pr[3 * i] + pr[3 * i + 1] + pr[3 * i + 2];
    for (int c = 0; c < 3; ++c) norm[3 * i + c] = pr[3 * i + c] / s;
    sup[i] = rng.below(4) == 0 ? kIgnore : static_cast<std::uint8_t>(rng.below(3));
  }
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 10; ++x) {
      const std::size_t src = static_cast<std::size_t>(y) * 5 + x % 5, dst = static_cast<std::size_t>(y) * 10 + x;
      twice_sup[dst] = sup[src];
      for (int c = 0; c < 3; ++c) twice[3 * dst + c] = norm[3 * src + c];
    }
  }
  CHECK(seg_loss(twice, twice_sup) == doctest::Approx(seg_loss(norm, sup)).epsilon(1e-12));
}

TEST_CASE("no labelled pixels") {
  try {
    seg_loss(ScalarRaster(2, 2, 0.5f, 2), LabelRaster(2, 2, kIgnore));
    FAIL("expected NoLabeledPixels");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoLabeledPixels);
  }
  const ImageRaster img(4, 4);
  const SuperpixelMap sp(4, 4, std::vector<std::int32_t>(16, 0));
  const LabelRaster sup(4, 4, kIgnore);
  try {
    train_pixel_classifier({{&img, &sp, &sup}}, PixelTrainConfig{});
    FAIL("expected NoLabeledPixels");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoLabeledPixels);
  }
  CHECK_THROWS_AS(train_pixel_classifier({}, PixelTrainConfig{}), Error);
}

TEST_CASE("pixel feature layout") {
  using L = PixelFeatureLayout;
  ImageRaster img(6, 5, Rgb{0, 0, 0});
  for (int y = 0; y < 5; ++y) img.set(5, y, Rgb{255, 255, 255});
  const SuperpixelMap sp = segment(img, {0.0, 10.0, 1});
  const auto f = extract_pixel_features(img, sp);
  REQUIRE(f.size() == 30u * L::kDim);
  auto at = [&](int x, int y, int k) { return f[(static_cast<std::size_t>(y) * 6 + x) * L::kDim + k]; };

  CHECK(at(0, 0, L::kLab) == doctest::Approx(0.0));
  CHECK(at(5, 0, L::kLab) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(at(2, 3, L::kPosition) == doctest::Approx(2.5 / 6));
  CHECK(at(2, 3, L::kPosition + 1) == doctest::Approx(3.5 / 5));
  // Corner window is clipped to 3x3, all black.
  CHECK(at(0, 0, L::kWindowMean) == doctest::Approx(0.0));
  CHECK(at(0, 0, L::kWindowStd) == doctest::Approx(0.0));
  // At x=3 the 5x5 window holds 5 of 25 white pixels (column 5).
  const double white = at(5, 0, L::kLab);
  CHECK(at(3, 2, L::kWindowMean) == doctest::Approx(white / 5).epsilon(1e-9));
  CHECK(at(3, 2, L::kWindowStd) == doctest::Approx(white * std::sqrt(0.2 * 0.8)).epsilon(1e-9));
  CHECK(at(0, 2, L::kRegionMean) == doctest::Approx(0.0));
  CHECK(at(5, 2, L::kRegionMean) == doctest::Approx(white));
  CHECK(at(1, 2, L::kGradient) == doctest::Approx(0.0));
  // Sobel across the edge at x=4: gx = 4 * white, gy = 0, scaled by 1/8.
  CHECK(at(4, 2, L::kGradient) == doctest::Approx(white / 2).epsilon(1e-9));
}

TEST_CASE("pixel loss gradient matches central differences") {
  Rng rng(11);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 4 + static_cast<int>(rng.below(3)), ht = 3 + static_cast<int>(rng.below(3));
    const auto img = testing::random_image(rng, w, ht);
    const auto sp = segment(img, {0.5, 100.0, 2});
    const auto feats = extract_pixel_features(img, sp);
    LabelRaster sup(w, ht);
    for (auto& v : sup.data()) v = rng.below(5) == 0 ? kIgnore : static_cast<std::uint8_t>(rng.below(3));
    if (std::all_of(sup.data().begin(), sup.data().end(), [](auto v) { return v == kIgnore; })) sup[0] = 1;

    SoftmaxModel m(PixelFeatureLayout::kDim, trial % 2 ? 5 : 0, 3);
    m.initialize(trial);
    for (auto& p : m.parameters()) p += rng.normal() * 0.3;

    SampleBatch batch;
    batch.dim = PixelFeatureLayout::kDim;
    for (std::size_t i = 0; i < sup.pixel_count(); ++i) {
      if (sup[i] != kIgnore)
        batch.add(std::span<const double>(feats.data() + i * batch.dim, batch.dim), sup[i]);
    }
    std::vector<double> grad(m.parameter_count());
    const double sum = m.nll(batch, grad);
    CHECK(sum / batch.size() == doctest::Approx(pixel_loss_oracle(m, feats, sup)).epsilon(1e-12));

    double worst = 0.0;
    for (std::size_t k = 0; k < m.parameter_count(); ++k) {
      SoftmaxModel plus = m, minus = m;
      plus.parameters()[k] += h;
      minus.parameters()[k] -= h;
      const double numeric = (pixel_loss_oracle(plus, feats, sup) - pixel_loss_oracle(minus, feats, sup)) / (2 * h);
      const double analytic = grad[k] / batch.size();
      worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-5}));
    }
    CHECK(worst < 1e-4);
    CHECK(gradient_check(m, batch, 1e-5, LossForm::Mean) < 1e-4);
  }
}

TEST_CASE("separable two-tone image is learned") {
  TwoTone t;
  PixelTrainConfig cfg;
  cfg.class_count = 3;
  cfg.optimizer.epochs = 40;
  const auto clf = train_pixel_classifier({{&t.image, &t.sp, &t.supervision}}, cfg, {1, 2});
  CHECK(clf.training.final_loss < clf.training.initial_loss);
  const auto mask = predict_mask(t.image, t.sp, clf.model);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) correct += mask[i] == t.truth[i];
  CHECK(double(correct) / mask.pixel_count() >= 0.99);
  CHECK(evaluate({mask}, {t.truth}, 3).miou >= 0.95);

  // Same seed, same parameters.
  const auto again = train_pixel_classifier({{&t.image, &t.sp, &t.supervision}}, cfg, {1, 2});
  CHECK(again.model.parameters() == clf.model.parameters());
}

TEST_CASE("required class without pixels is degenerate") {
  TwoTone t;
  PixelTrainConfig cfg;
  cfg.class_count = 4;
  try {
    train_pixel_classifier({{&t.image, &t.sp, &t.supervision}}, cfg, {1, 3});
    FAIL("expected DegenerateData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateData);
  }
}

TEST_CASE("constant image predicts one in-range label") {
  Rng rng(21);
  const ImageRaster img(9, 7, Rgb{90, 140, 30});
  const SuperpixelMap sp = segment(img, {0.8, 100.0, 5});
  SoftmaxModel m(PixelFeatureLayout::kDim, 4, 5);
  m.initialize(3);
  for (auto& p : m.parameters()) p += rng.normal();
  const auto proba = predict_pixel_proba(img, sp, m);
  for (std::size_t i = 0; i < proba.pixel_count(); ++i) {
    double s = 0.0;
    for (int c = 0; c < 5; ++c) s += proba[i * 5 + c];
    CHECK(std::abs(s - 1.0) < 1e-5);
  }
  const auto mask = predict_mask(img, sp, m);
  for (auto v : mask.data()) CHECK(v < 5);
  // Position features still vary, so only the range is guaranteed; with
  // position weights zeroed every pixel agrees.
  for (std::size_t k = 0; k < m.parameter_count(); ++k) {
    if (k % PixelFeatureLayout::kDim == PixelFeatureLayout::kPosition ||
        k % PixelFeatureLayout::kDim == PixelFeatureLayout::kPosition + 1) {
      if (k < static_cast<std::size_t>(m.hidden()) * PixelFeatureLayout::kDim) m.parameters()[k] = 0.0;
    }
  }
  const auto flat = predict_mask(img, sp, m);
  CHECK(std::all_of(flat.data().begin(), flat.data().end(), [&](auto v) { return v == flat[0]; }));
}

TEST_CASE("allowed classes restrict the argmax") {
  TwoTone t;
  PixelTrainConfig cfg;
  cfg.class_count = 3;
  cfg.optimizer.epochs = 20;
  const auto clf = train_pixel_classifier({{&t.image, &t.sp, &t.supervision}}, cfg);
  PredictOptions only1;
  only1.allowed_classes = std::set<int>{1};
  const auto mask = predict_mask(t.image, t.sp, clf.model, only1);
  for (auto v : mask.data()) CHECK((v == 0 || v == 1));
  CHECK_THROWS_AS(predict_pixel_proba(t.image, t.sp, SoftmaxModel(3, 0, 2)), Error);
}
