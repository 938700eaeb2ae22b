// Covers: perfect and disjoint predictions, hand-computed confusion, random
// 8x8 pairs against set counting, class exclusion, overlay arithmetic.
#include "doctest.h"
#include "helpers.hpp"
#include "mcof/evaluation.hpp"

using namespace mcof;

namespace {

LabelRaster random_labels(Rng& rng, int w, int h, int classes, bool ignore) {
  LabelRaster out(w, h);
  for (auto& v : out.data())
    v = ignore && rng.below(6) == 0 ? kIgnore : static_cast<std::uint8_t>(rng.below(classes));
  return out;
}

}  // namespace

TEST_CASE("perfect prediction scores one") {
  const LabelRaster gt(4, 4, std::vector<std::uint8_t>{0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 2, 2, 0, 0, 0, 0});
  const auto r = evaluate({gt}, {gt}, 3);
  CHECK(r.miou == 1.0);
  CHECK(r.included == std::vector<bool>{true, true, true});
}

TEST_CASE("hand-computed two-class case") {
  // gt 0 0 1 1, pred 0 1 1 1: class 0 IoU 1/2, class 1 IoU 2/3.
  const LabelRaster gt(4, 1, std::vector<std::uint8_t>{0, 0, 1, 1});
  const LabelRaster pred(4, 1, std::vector<std::uint8_t>{0, 1, 1, 1});
  const auto r = evaluate({pred}, {gt}, 2);
  CHECK(r.count(0, 0) == 1);
  CHECK(r.count(0, 1) == 1);
  CHECK(r.count(1, 1) == 2);
  CHECK(r.count(1, 0) == 0);
  CHECK(r.per_class_iou[0] == doctest::Approx(0.5));
  CHECK(r.per_class_iou[1] == doctest::Approx(2.0 / 3));
  CHECK(r.miou == doctest::Approx((0.5 + 2.0 / 3) / 2));
}

TEST_CASE("absent classes are excluded, predicted-only classes count as zero") {
  const LabelRaster gt(3, 1, std::vector<std::uint8_t>{0, 0, 0});
  const auto none = evaluate({gt}, {gt}, 5);
  CHECK(none.miou == 1.0);
  CHECK(none.included == std::vector<bool>{true, false, false, false, false});

  const LabelRaster pred(3, 1, std::vector<std::uint8_t>{0, 0, 3});
  const auto fp = evaluate({pred}, {gt}, 5);
  CHECK(fp.included[3]);
  CHECK(fp.per_class_iou[3] == 0.0);
  CHECK(fp.miou == doctest::Approx((2.0 / 3 + 0.0) / 2));
}

TEST_CASE("IGNORE ground truth is skipped entirely") {
  const LabelRaster gt(3, 1, std::vector<std::uint8_t>{kIgnore, 1, 1});
  const LabelRaster pred(3, 1, std::vector<std::uint8_t>{0, 1, 1});
  const auto r = evaluate({pred}, {gt}, 2);
  CHECK(r.miou == 1.0);
  CHECK_FALSE(r.included[0]);
}

TEST_CASE("random 8x8 pairs agree with set counting") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int classes = 2 + static_cast<int>(rng.below(5));
    const auto gt = random_labels(rng, 8, 8, classes, true);
    const auto pred = random_labels(rng, 8, 8, classes, false);
    const auto r = evaluate({pred}, {gt}, classes);
    CHECK(r.miou == doctest::Approx(testing::brute_force_miou({pred}, {gt}, classes)).epsilon(1e-12));
    std::uint64_t total = 0, known = 0;
    for (auto v : r.confusion) total += v;
    for (auto v : gt.data()) known += v != kIgnore;
    CHECK(total == known);
  }
}

TEST_CASE("dataset-level accumulation and permutation invariance") {
  Rng rng(9);
  std::vector<LabelRaster> gt, pred;
  for (int k = 0; k < 5; ++k) {
    gt.push_back(random_labels(rng, 6, 5, 4, true));
    pred.push_back(random_labels(rng, 6, 5, 4, false));
  }
  const double m = evaluate(pred, gt, 4).miou;
  CHECK(m == doctest::Approx(testing::brute_force_miou(pred, gt, 4)).epsilon(1e-12));
  std::swap(gt[0], gt[3]);
  std::swap(pred[0], pred[3]);
  CHECK(evaluate(pred, gt, 4).miou == m);
}

TEST_CASE("evaluate errors") {
  const LabelRaster a(2, 2), b(3, 2);
  CHECK_THROWS_AS(evaluate({}, {}, 3), Error);
  CHECK_THROWS_AS(evaluate({a}, {a, a}, 3), Error);
  CHECK_THROWS_AS(evaluate({a}, {b}, 3), Error);
  CHECK_THROWS_AS(evaluate({LabelRaster(2, 2, 5)}, {a}, 3), Error);
}

TEST_CASE("overlay blends palette colors half and half") {
  ImageRaster img(3, 1);
  img.set(0, 0, Rgb{100, 100, 100});
  img.set(1, 0, Rgb{101, 0, 255});
  img.set(2, 0, Rgb{7, 8, 9});
  const LabelRaster mask(3, 1, std::vector<std::uint8_t>{0, 1, kIgnore});
  const auto out = render_overlay(img, mask);
  CHECK(out.pixel(0) == img.pixel(0));
  CHECK(out.pixel(2) == img.pixel(2));
  // Class 1 is (128, 0, 0): (101 + 128) / 2 = 114.5 rounds up to 115.
  CHECK(voc_palette()[1] == Rgb{128, 0, 0});
  CHECK(out.pixel(1) == Rgb{115, 0, 128});
}

TEST_CASE("iou table lists every class and the mean") {
  const LabelRaster gt(2, 1, std::vector<std::uint8_t>{0, 1});
  const auto text = format_iou_table(evaluate({gt}, {gt}, 3));
  CHECK(text == "class,iou,included\n0,1.000000,1\n1,1.000000,1\n2,0.000000,0\nmiou,1.000000,1\n");
}
