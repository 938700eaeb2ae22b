#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "mcof/crf.hpp"
#include "mcof/raster.hpp"
#include "mcof/rng.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mcof_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline mcof::ImageRaster random_image(mcof::Rng& rng, int w, int h) {
  mcof::ImageRaster img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

inline mcof::ScalarRaster random_scalar(mcof::Rng& rng, int w, int h, int channels = 1) {
  mcof::ScalarRaster r(w, h, 0.0f, channels);
  for (auto& v : r.data()) v = static_cast<float>(rng.uniform());
  return r;
}

// Voronoi-style image with `segments` flat cells whose colors are pairwise at
// least `min_distance` apart in RGB.
inline mcof::ImageRaster piecewise_constant_image(mcof::Rng& rng, int w, int h, int segments,
                                                  double min_distance = 100.0) {
  std::vector<mcof::Rgb> colors;
  while (static_cast<int>(colors.size()) < segments) {
    const mcof::Rgb c{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                      static_cast<std::uint8_t>(rng.below(256))};
    bool ok = true;
    for (const auto& o : colors) {
      const double dr = c.r - o.r, dg = c.g - o.g, db = c.b - o.b;
      if (std::sqrt(dr * dr + dg * dg + db * db) < min_distance) ok = false;
    }
    if (ok) colors.push_back(c);
  }
  std::vector<std::pair<double, double>> centers;
  for (int s = 0; s < segments; ++s) centers.emplace_back(rng.uniform(0, w), rng.uniform(0, h));
  mcof::ImageRaster img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = 0;
      double best_d = 1e300;
      for (int s = 0; s < segments; ++s) {
        const double dx = x - centers[s].first, dy = y - centers[s].second;
        if (dx * dx + dy * dy < best_d) best_d = dx * dx + dy * dy, best = s;
      }
      img.set(x, y, colors[best]);
    }
  }
  return img;
}

// 4-connected components of equal color, numbered in raster order of first
// occurrence. Plain flood fill, independent of the library's union-find.
inline std::vector<std::int32_t> color_components(const mcof::ImageRaster& img) {
  const int w = img.width(), h = img.height();
  std::vector<std::int32_t> label(static_cast<std::size_t>(w) * h, -1);
  std::int32_t next = 0;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (label[start] >= 0) continue;
    label[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w, y = p / w;
      const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
      for (int d = 0; d < 4; ++d) {
        if (nx[d] < 0 || ny[d] < 0 || nx[d] >= w || ny[d] >= h) continue;
        const int q = ny[d] * w + nx[d];
        if (label[q] < 0 && img.pixel(static_cast<std::size_t>(q)) == img.pixel(static_cast<std::size_t>(p))) {
          label[q] = next;
          stack.push_back(q);
        }
      }
    }
    ++next;
  }
  return label;
}

// Mean IoU by explicit pixel sets: |P_c & G_c| / |P_c | G_c| over pixels with
// known ground truth, classes with an empty union skipped.
inline double brute_force_miou(const std::vector<mcof::LabelRaster>& pred,
                               const std::vector<mcof::LabelRaster>& gt, int classes) {
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < classes; ++c) {
    std::set<std::pair<std::size_t, std::size_t>> p, g;
    for (std::size_t k = 0; k < gt.size(); ++k) {
      for (std::size_t i = 0; i < gt[k].pixel_count(); ++i) {
        if (gt[k][i] == mcof::kIgnore) continue;
        if (pred[k][i] == c) p.insert({k, i});
        if (gt[k][i] == c) g.insert({k, i});
      }
    }
    std::set<std::pair<std::size_t, std::size_t>> both, any(p);
    any.insert(g.begin(), g.end());
    for (const auto& e : p)
      if (g.count(e)) both.insert(e);
    if (any.empty()) continue;
    sum += double(both.size()) / double(any.size());
    ++n;
  }
  return n ? sum / n : 0.0;
}

// Direct restatement of the update: every pair (i, j), kernels evaluated with
// std::exp on the spot, no tables and no symmetric accumulation.
inline std::vector<double> oracle_mean_field(const mcof::ScalarRaster& unary, const mcof::ImageRaster& img,
                                             const mcof::CrfParams& p) {
  const int w = img.width(), L = unary.channels();
  const std::size_t n = img.pixel_count();
  std::vector<double> q(unary.values().begin(), unary.values().end());
  for (int it = 0; it < p.iterations; ++it) {
    std::vector<double> next(n * L);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> energy(L);
      for (int l = 0; l < L; ++l) energy[l] = std::log(std::max<double>(unary[i * L + l], 1e-12));
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dx = double(i % w) - double(j % w), dy = double(i / w) - double(j / w);
        const mcof::Rgb a = img.pixel(i), b = img.pixel(j);
        const double dc = double(a.r - b.r) * (a.r - b.r) + double(a.g - b.g) * (a.g - b.g) +
                          double(a.b - b.b) * (a.b - b.b);
        const double d2 = dx * dx + dy * dy;
        const double k = p.w_smooth * std::exp(-d2 / (2 * p.theta_gamma * p.theta_gamma)) +
                         p.w_appear * std::exp(-d2 / (2 * p.theta_alpha * p.theta_alpha) -
                                               dc / (2 * p.theta_beta * p.theta_beta));
        for (int l = 0; l < L; ++l) {
          for (int m = 0; m < L; ++m) {
            if (m != l) energy[l] -= k * q[j * L + m];
          }
        }
      }
      const double top = *std::max_element(energy.begin(), energy.end());
      double sum = 0.0;
      for (int l = 0; l < L; ++l) sum += next[i * L + l] = std::exp(energy[l] - top);
      for (int l = 0; l < L; ++l) next[i * L + l] /= sum;
    }
    q = next;
  }
  return q;
}

}  // namespace testing
