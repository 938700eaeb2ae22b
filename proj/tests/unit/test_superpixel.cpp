// Covers: constant image, black/white halves, four quadrants vs a flood-fill
// oracle, region means (constant, two-pixel, brute force), partition and
// adjacency properties, determinism, k monotonicity.
#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "mcof/superpixel.hpp"

using namespace mcof;

namespace {

void check_map_invariants(const SuperpixelMap& sp) {
  const int w = sp.width(), h = sp.height();
  // Dense ids, sizes partition the grid.
  std::size_t total = 0;
  for (int r = 0; r < sp.region_count(); ++r) {
    CHECK_FALSE(sp.pixels(r).empty());
    total += sp.pixels(r).size();
    for (auto p : sp.pixels(r)) CHECK(sp.region_of(p) == r);
  }
  CHECK(total == static_cast<std::size_t>(w) * h);

  // Each region is 4-connected: flood fill from its first pixel reaches all.
  for (int r = 0; r < sp.region_count(); ++r) {
    std::set<std::uint32_t> seen{sp.pixels(r)[0]};
    std::vector<std::uint32_t> stack{sp.pixels(r)[0]};
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(p) % w, y = static_cast<int>(p) / w;
      const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
      for (int d = 0; d < 4; ++d) {
        if (nx[d] < 0 || ny[d] < 0 || nx[d] >= w || ny[d] >= h) continue;
        const auto q = static_cast<std::uint32_t>(ny[d] * w + nx[d]);
        if (sp.region_of(q) == r && seen.insert(q).second) stack.push_back(q);
      }
    }
    CHECK(seen.size() == sp.pixels(r).size());
  }

  // Adjacency oracle from 4-neighbour pairs.
  std::set<std::pair<int, int>> expected;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int a = sp.region_of(x, y);
      if (x + 1 < w && sp.region_of(x + 1, y) != a) expected.insert(std::minmax(a, sp.region_of(x + 1, y)));
      if (y + 1 < h && sp.region_of(x, y + 1) != a) expected.insert(std::minmax(a, sp.region_of(x, y + 1)));
    }
  }
  const std::set<std::pair<int, int>> got(sp.adjacency().begin(), sp.adjacency().end());
  CHECK(got == expected);
  CHECK(got.size() == sp.adjacency().size());
  for (int r = 0; r < sp.region_count(); ++r) {
    for (int q : sp.neighbors(r)) {
      CHECK(q != r);
      const auto& back = sp.neighbors(q);
      CHECK(std::find(back.begin(), back.end(), r) != back.end());
    }
  }
}

}  // namespace

TEST_CASE("constant image is a single region for any k") {
  for (double k : {1.0, 50.0, 1000.0}) {
    const ImageRaster img(16, 16, Rgb{40, 90, 200});
    const auto sp = segment(img, {0.8, k, 1});
    CHECK(sp.region_count() == 1);
    CHECK(sp.adjacency().empty());
  }
}

TEST_CASE("black/white halves split at the column boundary") {
  ImageRaster img(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 8; x < 16; ++x) img.set(x, y, Rgb{255, 255, 255});
  const auto sp = segment(img, {0.0, 10.0, 1});
  REQUIRE(sp.region_count() == 2);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) CHECK(sp.region_of(x, y) == (x < 8 ? 0 : 1));
  }
  CHECK(sp.adjacency() == std::vector<std::pair<int, int>>{{0, 1}});
}

TEST_CASE("four quadrants match the connected-component oracle") {
  const Rgb colors[4] = {{0, 0, 0}, {200, 0, 0}, {0, 200, 0}, {0, 0, 200}};
  ImageRaster img(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) img.set(x, y, colors[(y / 16) * 2 + x / 16]);
  const auto sp = segment(img, {0.0, 50.0, 1});
  CHECK(sp.region_count() == 4);
  CHECK(sp.region_ids() == testing::color_components(img));
  check_map_invariants(sp);
}

TEST_CASE("random piecewise-constant images match the oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    const auto img = testing::piecewise_constant_image(rng, 24 + static_cast<int>(rng.below(16)),
                                                       24 + static_cast<int>(rng.below(16)),
                                                       3 + static_cast<int>(rng.below(5)));
    CHECK(segment(img, {0.0, 50.0, 1}).region_ids() == testing::color_components(img));
  }
}

TEST_CASE("segmentation of noisy images keeps the map invariants") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto img = testing::random_image(rng, 20, 17);
    const auto sp = segment(img, {0.8, 100.0, 5});
    check_map_invariants(sp);
    for (int r = 0; r < sp.region_count(); ++r) CHECK(sp.pixels(r).size() >= 5);
    CHECK(segment(img, {0.8, 100.0, 5}) == sp);
  }
}

TEST_CASE("min_size absorbs small components") {
  ImageRaster img(16, 16, Rgb{0, 0, 0});
  img.set(5, 5, Rgb{255, 255, 255});
  CHECK(segment(img, {0.0, 10.0, 1}).region_count() == 2);
  CHECK(segment(img, {0.0, 10.0, 2}).region_count() == 1);
}

TEST_CASE("constructor relabels to 4-connected components in raster order") {
  // Label 7 appears in two separate pieces; 2x2 diagonal pairs split too.
  const SuperpixelMap sp(3, 2, std::vector<std::int32_t>{7, 3, 7, 3, 3, 3});
  CHECK(sp.region_count() == 3);
  CHECK(sp.region_ids() == std::vector<std::int32_t>{0, 1, 2, 1, 1, 1});
  const SuperpixelMap diag(2, 2, std::vector<std::int32_t>{7, 3, 3, 7});
  CHECK(diag.region_count() == 4);
}

TEST_CASE("increasing k never increases the region count") {
  Rng rng(2024);
  int violations = 0;
  for (int trial = 0; trial < 20; ++trial) {
    // Blocky images with noise so that k matters.
    ImageRaster img = testing::piecewise_constant_image(rng, 32, 32, 6, 40.0);
    for (auto& v : img.data()) v = static_cast<std::uint8_t>(std::clamp(v + rng.normal() * 12.0, 0.0, 255.0));
    int prev = std::numeric_limits<int>::max();
    for (double k : {10.0, 30.0, 100.0, 300.0, 1000.0}) {
      const int n = segment(img, {0.5, k, 5}).region_count();
      if (n > prev) ++violations;
      prev = n;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("average_raster_per_region") {
  Rng rng(9);
  const auto img = testing::random_image(rng, 12, 9);
  const auto sp = segment(img, {0.5, 200.0, 4});

  SUBCASE("constant raster") {
    for (double v : average_raster_per_region(sp, ScalarRaster(12, 9, 0.3f))) CHECK(v == doctest::Approx(0.3));
  }
  SUBCASE("two pixels") {
    const SuperpixelMap two(2, 1, std::vector<std::int32_t>{0, 0});
    const auto avg = average_raster_per_region(two, ScalarRaster(2, 1, std::vector<float>{0.2f, 0.8f}));
    REQUIRE(avg.size() == 1);
    CHECK(avg[0] == doctest::Approx(0.5).epsilon(1e-7));
  }
  SUBCASE("brute force mean") {
    const auto r = testing::random_scalar(rng, 12, 9);
    const auto avg = average_raster_per_region(sp, r);
    std::map<int, std::pair<double, int>> acc;
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 12; ++x) {
        auto& a = acc[sp.region_of(x, y)];
        a.first += r.at(x, y);
        a.second += 1;
      }
    }
    REQUIRE(avg.size() == acc.size());
    for (const auto& [region, a] : acc) CHECK(std::abs(avg[region] - a.first / a.second) < 1e-6);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(average_raster_per_region(sp, ScalarRaster(3, 3)), Error);
  }
}

TEST_CASE("parameter validation and small-image defaults") {
  CHECK_THROWS_AS(FhParams({-1.0, 10.0, 1}).validate(), Error);
  CHECK_THROWS_AS(FhParams({0.0, 0.0, 1}).validate(), Error);
  CHECK_THROWS_AS(FhParams({0.0, 1.0, 0}).validate(), Error);
  const auto d = FhParams::defaults_for(64, 64);
  CHECK(d.sigma == 0.8);
  CHECK(d.k == 100.0);
  CHECK(d.min_size == 10);
  CHECK(FhParams::defaults_for(500, 375).min_size == 50);
}

TEST_CASE("superpixels round-trip through F32R and the adjacency sidecar") {
  testing::TempDir dir("sp");
  Rng rng(77);
  const auto sp = segment(testing::random_image(rng, 15, 11), {0.8, 150.0, 3});
  save_superpixels(dir / "sp.f32r", dir / "adj.txt", sp);
  const auto back = load_superpixels(dir / "sp.f32r");
  CHECK(back == sp);
  CHECK(back.adjacency() == sp.adjacency());
}

TEST_CASE("region means rendering paints flat regions") {
  ImageRaster img(2, 1);
  img.set(0, 0, Rgb{10, 20, 30});
  img.set(1, 0, Rgb{20, 41, 30});
  const SuperpixelMap sp(2, 1, std::vector<std::int32_t>{0, 0});
  const auto out = render_region_means(img, sp);
  CHECK(out.pixel(0) == out.pixel(1));
  CHECK(out.pixel(0).r == 15);
  CHECK(out.pixel(0).b == 30);
}
