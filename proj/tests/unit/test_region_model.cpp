// Covers: constant-red region, full-image centroid and area, area count
// oracle, per-sample loss 0 and 1, separable blobs, uniform posterior,
// wrong-class removal (single case and recomputed oracle), gradient checks,
// closed-form bias gradient, duplicated batch, monotone full-batch loss.
#include <cmath>
#include <limits>
#include <map>

#include "doctest.h"
#include "helpers.hpp"
#include "mcof/region_model.hpp"

using namespace mcof;
using L = RegionFeatureLayout;

namespace {

SampleBatch random_batch(Rng& rng, int n, int dim, int classes) {
  SampleBatch b;
  b.dim = dim;
  std::vector<double> x(dim);
  for (int i = 0; i < n; ++i) {
    for (auto& v : x) v = rng.uniform(-1, 1);
    b.add(x, static_cast<int>(rng.below(classes)), rng.uniform(0.5, 2.0));
  }
  return b;
}

SoftmaxModel random_model(Rng& rng, int dim, int hidden, int classes) {
  SoftmaxModel m(dim, hidden, classes);
  for (auto& v : m.parameters()) v = rng.uniform(-0.5, 0.5);
  return m;
}

// Perceptron on the two blobs; it terminates with zero mistakes only when a
// separating hyperplane exists.
bool perceptron_separates(const std::vector<RegionFeature>& x, const std::vector<int>& y) {
  std::vector<double> w(L::kDim + 1, 0.0);
  for (int epoch = 0; epoch < 1000; ++epoch) {
    int mistakes = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double s = w[L::kDim];
      for (int d = 0; d < L::kDim; ++d) s += w[d] * x[i][d];
      const double t = y[i] == 1 ? 1.0 : -1.0;
      if (s * t <= 0) {
        ++mistakes;
        for (int d = 0; d < L::kDim; ++d) w[d] += t * x[i][d];
        w[L::kDim] += t;
      }
    }
    if (mistakes == 0) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("constant red region") {
  const ImageRaster img(6, 5, Rgb{255, 0, 0});
  const SuperpixelMap sp(6, 5, std::vector<std::int32_t>(30, 0));
  const auto f = extract_features(img, sp);
  REQUIRE(f.size() == 1);
  CHECK(f[0][L::kColorHist + 7] == 1.0);
  CHECK(f[0][L::kColorHist + 8] == 1.0);
  CHECK(f[0][L::kColorHist + 16] == 1.0);
  for (int i = 0; i < 8; ++i) CHECK(f[0][L::kGradientHist + i] == 0.0);
  CHECK(f[0][L::kContrast] == 0.0);
  // Lab of pure sRGB red is about (53.2, 80.1, 67.2).
  CHECK(f[0][L::kLabMean] * 100 == doctest::Approx(53.24).epsilon(1e-3));
  CHECK(f[0][L::kLabMean + 1] * 128 == doctest::Approx(80.09).epsilon(1e-3));
}

TEST_CASE("full-image region has a centered centroid and unit area") {
  Rng rng(1);
  const auto img = testing::random_image(rng, 9, 7);
  const auto f = extract_features(img, SuperpixelMap(9, 7, std::vector<std::int32_t>(63, 0)));
  CHECK(std::abs(f[0][L::kCentroid] - 0.5) <= 0.5 / 9);
  CHECK(std::abs(f[0][L::kCentroid + 1] - 0.5) <= 0.5 / 7);
  CHECK(f[0][L::kArea] == 1.0);
}

TEST_CASE("features against pixel-count oracles") {
  Rng rng(2);
  const auto img = testing::random_image(rng, 13, 11);
  const auto sp = segment(img, {0.5, 300.0, 3});
  const auto f = extract_features(img, sp);
  REQUIRE(static_cast<int>(f.size()) == sp.region_count());
  std::map<int, int> count;
  std::map<int, std::array<int, 24>> hist;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const int r = sp.region_of(i);
    ++count[r];
    const Rgb c = img.pixel(i);
    auto& h = hist[r];
    ++h[c.r * 8 / 256];
    ++h[8 + c.g * 8 / 256];
    ++h[16 + c.b * 8 / 256];
  }
  for (int r = 0; r < sp.region_count(); ++r) {
    CHECK(f[r][L::kArea] == doctest::Approx(count[r] / 143.0).epsilon(1e-12));
    for (int c = 0; c < 3; ++c) {
      double sum = 0.0;
      for (int b = 0; b < 8; ++b) {
        sum += f[r][L::kColorHist + 8 * c + b];
        CHECK(f[r][L::kColorHist + 8 * c + b] == doctest::Approx(hist[r][8 * c + b] / double(count[r])));
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
    double g = 0.0;
    for (int b = 0; b < 8; ++b) g += f[r][L::kGradientHist + b];
    CHECK((g == 0.0 || std::abs(g - 1.0) < 1e-6));
    CHECK(f[r][L::kCentroid] >= 0.0);
    CHECK(f[r][L::kCentroid] <= 1.0);
    for (double v : f[r]) CHECK(std::isfinite(v));
  }
  CHECK(extract_features(img, sp) == f);
  CHECK_THROWS_AS(extract_features(ImageRaster(3, 3), sp), Error);
}

TEST_CASE("per-sample loss values") {
  const std::vector<double> certain{0.0, 1.0, 0.0};
  CHECK(softmax_nll(certain, 1) == 0.0);
  const double p = std::exp(-1.0);
  const std::vector<double> probs{p, 1.0 - p};
  CHECK(softmax_nll(probs, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero parameters give a uniform posterior") {
  SoftmaxModel m(L::kDim, 0, 5);
  Rng rng(3);
  RegionFeature x;
  for (auto& v : x) v = rng.uniform();
  const auto out = predict_regions({x}, m, {1});
  for (double v : out.posterior(0)) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("predicted class absent from the image becomes background") {
  SoftmaxModel m(L::kDim, 0, 10);
  const std::size_t bias = static_cast<std::size_t>(10) * L::kDim;
  m.parameters()[bias + 7] = 5.0;
  RegionFeature x{};
  const auto out = predict_regions({x}, m, {2});
  CHECK(out.labels[0] == 0);
  CHECK(out.posterior(0)[7] > 0.9);  // posterior kept as computed
  CHECK(predict_regions({x}, m, {2, 7}).labels[0] == 7);
}

TEST_CASE("labels equal an argmax-then-filter oracle") {
  Rng rng(4);
  const int classes = 6;
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_model(rng, L::kDim, 0, classes);
    std::vector<RegionFeature> feats(15);
    for (auto& f : feats)
      for (auto& v : f) v = rng.uniform(-1, 1);
    const std::set<int> labels{1 + static_cast<int>(rng.below(classes - 1))};
    const auto out = predict_regions(feats, m, labels);
    const auto& th = m.parameters();
    for (std::size_t r = 0; r < feats.size(); ++r) {
      std::vector<double> z(classes);
      for (int c = 0; c < classes; ++c) {
        z[c] = th[classes * L::kDim + c];
        for (int d = 0; d < L::kDim; ++d) z[c] += th[c * L::kDim + d] * feats[r][d];
      }
      const double zmax = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (auto& v : z) sum += v = std::exp(v - zmax);
      int best = 0;
      for (int c = 0; c < classes; ++c) {
        CHECK(out.posterior(static_cast<int>(r))[c] == doctest::Approx(z[c] / sum).epsilon(1e-12));
        if (z[c] > z[best]) best = c;
      }
      CHECK(out.labels[r] == (labels.count(best) ? best : 0));
      double total = 0.0;
      for (double v : out.posterior(static_cast<int>(r))) total += v;
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(5);
  for (int hidden : {0, 6}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto m = random_model(rng, 7, hidden, 4);
      const auto b = random_batch(rng, 1 + static_cast<int>(rng.below(10)), 7, 4);
      CHECK(gradient_check(m, b) < 1e-4);
      CHECK(gradient_check(m, b, 1e-5, LossForm::Mean) < 1e-4);
    }
  }
}

TEST_CASE("gradient oracle: central differences computed here") {
  Rng rng(6);
  auto m = random_model(rng, 5, 3, 3);
  const auto b = random_batch(rng, 6, 5, 3);
  std::vector<double> grad(m.parameter_count());
  m.nll(b, grad);
  double worst = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double keep = m.parameters()[i];
    m.parameters()[i] = keep + 1e-5;
    const double up = m.nll(b, {});
    m.parameters()[i] = keep - 1e-5;
    const double down = m.nll(b, {});
    m.parameters()[i] = keep;
    const double num = (up - down) / 2e-5;
    worst = std::max(worst, std::abs(num - grad[i]) / std::max({std::abs(num), std::abs(grad[i]), 1e-5}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("zero weights: bias gradient is softmax minus one-hot") {
  const int classes = 4, dim = 3;
  SoftmaxModel m(dim, 0, classes);
  SampleBatch b;
  b.dim = dim;
  b.add(std::vector<double>{0.3, -1.0, 2.0}, 2);
  std::vector<double> grad(m.parameter_count());
  m.nll(b, grad);
  for (int c = 0; c < classes; ++c) {
    CHECK(grad[classes * dim + c] == doctest::Approx(0.25 - (c == 2 ? 1.0 : 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("duplicated batch doubles the gradient exactly") {
  Rng rng(7);
  for (int hidden : {0, 5}) {
    const auto m = random_model(rng, 4, hidden, 3);
    SampleBatch one;
    one.dim = 4;
    const std::vector<double> x{0.1, 0.2, -0.3, 0.4};
    one.add(x, 1);
    SampleBatch two = one;
    two.add(x, 1);
    std::vector<double> g1(m.parameter_count()), g2(m.parameter_count());
    const double l1 = m.nll(one, g1), l2 = m.nll(two, g2);
    CHECK(l2 == 2.0 * l1);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == 2.0 * g1[i]);
  }
}

TEST_CASE("full-batch loss is nonincreasing with a small step") {
  Rng rng(8);
  SoftmaxModel m(6, 0, 3);
  m.initialize(1);
  const auto b = random_batch(rng, 40, 6, 3);
  const auto res = fit(m, [&](int) -> const SampleBatch& { return b; }, {200, 0.05, 0.0, 1e-4, 0}, 1);
  REQUIRE(res.loss_history.size() == 200);
  for (std::size_t e = 1; e < res.loss_history.size(); ++e) {
    CHECK(res.loss_history[e] <= res.loss_history[e - 1] + 1e-9);
  }
  CHECK(res.final_loss <= res.initial_loss);
}

TEST_CASE("separable blobs reach training accuracy 1") {
  Rng rng(9);
  std::vector<RegionFeature> feats;
  RegionSeedSet seeds;
  std::vector<int> y;
  RegionFeature center0, center1;
  for (int d = 0; d < L::kDim; ++d) center0[d] = rng.uniform(0, 1), center1[d] = center0[d];
  // Separation of 10 sigma along one direction.
  const double sigma = 0.02;
  center1[3] += 10 * sigma;
  for (int i = 0; i < 60; ++i) {
    const int cls = i % 2;
    RegionFeature f = cls ? center1 : center0;
    for (auto& v : f) v += sigma * rng.normal() / std::sqrt(double(L::kDim));
    feats.push_back(f);
    seeds.labels.push_back(cls);
    y.push_back(cls);
  }
  REQUIRE(perceptron_separates(feats, y));

  RegionTrainConfig cfg;
  cfg.class_count = 2;
  cfg.optimizer.epochs = 200;
  cfg.optimizer.learning_rate = 1.0;
  cfg.optimizer.momentum = 0.9;
  cfg.background_ratio = 0.0;
  const auto trained = train_region_classifier({feats}, {seeds}, cfg, {0, 1});
  const auto out = predict_regions(feats, trained.model, {1});
  int correct = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) correct += out.labels[i] == y[i];
  CHECK(correct == static_cast<int>(feats.size()));
  CHECK(trained.training.final_loss <= trained.training.initial_loss);

  // Same seed, same curve.
  const auto again = train_region_classifier({feats}, {seeds}, cfg, {0, 1});
  CHECK(again.training.loss_history == trained.training.loss_history);
  CHECK(again.model.parameters() == trained.model.parameters());
}

TEST_CASE("training batch weights and errors") {
  std::vector<RegionFeature> feats(14);
  RegionSeedSet seeds;
  seeds.labels = std::vector<int>(10, 0);
  seeds.labels.push_back(1);
  seeds.labels.push_back(1);
  seeds.labels.push_back(kUnlabeled);
  seeds.labels.push_back(2);
  const auto batch = region_training_batch({feats}, {seeds}, 3.0);
  CHECK(batch.size() == 13);
  // Background weight: min(1, 3 * 2 / 10).
  CHECK(batch.weight(0) == doctest::Approx(0.6));
  CHECK(batch.weight(10) == 1.0);

  RegionTrainConfig cfg;
  cfg.class_count = 4;
  cfg.optimizer.epochs = 1;
  try {
    train_region_classifier({feats}, {seeds}, cfg, {0, 1, 3});
    FAIL("expected DegenerateData");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateData);
  }
  RegionSeedSet none;
  none.labels.assign(14, kUnlabeled);
  CHECK_THROWS_AS(train_region_classifier({feats}, {none}, cfg), Error);
}

TEST_CASE("non-finite objective raises NonFiniteLoss") {
  Rng rng(10);
  SampleBatch b = random_batch(rng, 20, 4, 3);
  b.features[5] = std::numeric_limits<double>::infinity();
  SoftmaxModel m(4, 0, 3);
  m.initialize(2);
  try {
    fit(m, [&](int) -> const SampleBatch& { return b; }, {50, 0.1, 0.9, 0.0, 0}, 1);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteLoss);
  }
}

TEST_CASE("model parameters round-trip through F32R") {
  testing::TempDir dir("model");
  Rng rng(11);
  for (int hidden : {0, 4}) {
    SoftmaxModel m(5, hidden, 3);
    for (auto& v : m.parameters()) v = rng.normal() * 10;
    save_model(dir / "m.f32r", m);
    const auto back = load_model(dir / "m.f32r");
    CHECK(back.input_dim() == 5);
    CHECK(back.hidden() == hidden);
    CHECK(back.classes() == 3);
    for (std::size_t i = 0; i < m.parameter_count(); ++i) {
      CHECK(back.parameters()[i] == doctest::Approx(m.parameters()[i]).epsilon(1e-13));
    }
  }
}
