#include "mcof/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcof/raster_io.hpp"

namespace mcof {

void FhParams::validate() const {
  if (!(sigma >= 0.0) || !(k > 0.0) || min_size < 1) {
    throw Error(ErrorKind::Config, "FH parameters require sigma >= 0, k > 0, min_size >= 1");
  }
}

FhParams FhParams::defaults_for(int width, int height) {
  FhParams p;
  if (width * height <= 128 * 128) p.min_size = 10;
  return p;
}

SuperpixelMap::SuperpixelMap(int width, int height, const std::vector<std::int32_t>& labels)
    : width_(width), height_(height) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (width < 1 || height < 1 || labels.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "superpixel labelling does not cover the grid");
  }
  // 4-connected flood fill over equal input labels.
  region_id_.assign(n, -1);
  std::vector<std::uint32_t> stack;
  int next = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (region_id_[start] >= 0) continue;
    const std::int32_t label = labels[start];
    region_pixels_.emplace_back();
    auto& members = region_pixels_.back();
    region_id_[start] = next;
    stack.push_back(static_cast<std::uint32_t>(start));
    while (!stack.empty()) {
      const std::uint32_t p = stack.back();
      stack.pop_back();
      members.push_back(p);
      const int x = static_cast<int>(p % width), y = static_cast<int>(p / width);
      auto visit = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= width || ny >= height) return;
        const std::size_t q = static_cast<std::size_t>(ny) * width + nx;
        if (region_id_[q] < 0 && labels[q] == label) {
          region_id_[q] = next;
          stack.push_back(static_cast<std::uint32_t>(q));
        }
      };
      visit(x - 1, y);
      visit(x + 1, y);
      visit(x, y - 1);
      visit(x, y + 1);
    }
    std::sort(members.begin(), members.end());
    ++next;
  }

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int a = region_of(x, y);
      if (x + 1 < width) {
        const int b = region_of(x + 1, y);
        if (a != b) adjacency_.emplace_back(std::min(a, b), std::max(a, b));
      }
      if (y + 1 < height) {
        const int b = region_of(x, y + 1);
        if (a != b) adjacency_.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  }
  std::sort(adjacency_.begin(), adjacency_.end());
  adjacency_.erase(std::unique(adjacency_.begin(), adjacency_.end()), adjacency_.end());
  neighbors_.assign(region_pixels_.size(), {});
  for (const auto& [a, b] : adjacency_) {
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }

  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::uint32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  std::uint32_t join(std::uint32_t a, std::uint32_t b) {
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }

  std::uint32_t size(std::uint32_t root) const { return size_[root]; }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
  std::vector<std::uint32_t> size_;
};

struct Edge {
  float weight;
  std::uint32_t a;
  std::uint32_t b;
  bool diagonal;
};

// Separable Gaussian blur of one channel with clamped borders; kernel length
// ceil(4 sigma) + 1 on each side, normalized.
std::vector<float> smooth_channel(const std::vector<float>& src, int w, int h, double sigma) {
  if (sigma <= 0.0) return src;
  const int len = static_cast<int>(std::ceil(sigma * 4.0)) + 1;
  std::vector<double> mask(len);
  for (int i = 0; i < len; ++i) mask[i] = std::exp(-0.5 * (i / sigma) * (i / sigma));
  double sum = 0.0;
  for (int i = 1; i < len; ++i) sum += 2.0 * std::fabs(mask[i]);
  sum += std::fabs(mask[0]);
  for (double& m : mask) m /= sum;

  std::vector<float> tmp(src.size()), dst(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = mask[0] * src[y * w + x];
      for (int i = 1; i < len; ++i) {
        acc += mask[i] * (src[y * w + std::max(x - i, 0)] + src[y * w + std::min(x + i, w - 1)]);
      }
      tmp[y * w + x] = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = mask[0] * tmp[y * w + x];
      for (int i = 1; i < len; ++i) {
        acc += mask[i] * (tmp[std::max(y - i, 0) * w + x] + tmp[std::min(y + i, h - 1) * w + x]);
      }
      dst[y * w + x] = static_cast<float>(acc);
    }
  }
  return dst;
}

}  // namespace

SuperpixelMap segment(const ImageRaster& image, const FhParams& params) {
  params.validate();
  const int w = image.width(), h = image.height();
  const std::size_t n = image.pixel_count();

  std::vector<float> channel[3];
  for (int c = 0; c < 3; ++c) {
    std::vector<float> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = image.data()[3 * i + c];
    channel[c] = smooth_channel(raw, w, h, params.sigma);
  }
  auto diff = [&](std::size_t p, std::size_t q) {
    const float dr = channel[0][p] - channel[0][q];
    const float dg = channel[1][p] - channel[1][q];
    const float db = channel[2][p] - channel[2][q];
    return std::sqrt(dr * dr + dg * dg + db * db);
  };

  std::vector<Edge> edges;
  edges.reserve(n * 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint32_t p = static_cast<std::uint32_t>(y * w + x);
      auto add = [&](int nx, int ny) {
        const std::uint32_t q = static_cast<std::uint32_t>(ny * w + nx);
        edges.push_back({diff(p, q), std::min(p, q), std::max(p, q), ny != y && nx != x});
      };
      if (x + 1 < w) add(x + 1, y);
      if (y + 1 < h) add(x, y + 1);
      if (x + 1 < w && y + 1 < h) add(x + 1, y + 1);
      if (x + 1 < w && y > 0) add(x + 1, y - 1);
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) {
    if (l.weight != r.weight) return l.weight < r.weight;
    if (l.a != r.a) return l.a < r.a;
    return l.b < r.b;
  });

  DisjointSet set(n);
  std::vector<double> threshold(n, params.k);
  for (const Edge& e : edges) {
    std::uint32_t a = set.find(e.a);
    std::uint32_t b = set.find(e.b);
    if (a == b) continue;
    if (e.weight <= threshold[a] && e.weight <= threshold[b]) {
      const std::uint32_t root = set.join(a, b);
      threshold[root] = e.weight + params.k / set.size(root);
    }
  }
  // Split merged components into 4-connected pieces before absorbing the
  // small ones, so the size floor holds for the final regions too.
  DisjointSet pieces(n);
  for (const Edge& e : edges) {
    if (e.diagonal || set.find(e.a) != set.find(e.b)) continue;
    const std::uint32_t a = pieces.find(e.a), b = pieces.find(e.b);
    if (a != b) pieces.join(a, b);
  }
  const auto min_size = static_cast<std::uint32_t>(params.min_size);
  for (const Edge& e : edges) {
    if (e.diagonal) continue;
    const std::uint32_t a = pieces.find(e.a);
    const std::uint32_t b = pieces.find(e.b);
    if (a != b && (pieces.size(a) < min_size || pieces.size(b) < min_size)) pieces.join(a, b);
  }

  std::vector<std::int32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::int32_t>(pieces.find(i));
  return SuperpixelMap(w, h, labels);
}

std::vector<double> average_raster_per_region(const SuperpixelMap& sp, const ScalarRaster& raster) {
  check_dims(sp.width(), sp.height(), raster.width(), raster.height(), "average_raster_per_region");
  if (raster.channels() != 1) {
    throw Error(ErrorKind::DimensionMismatch, "average_raster_per_region expects one channel");
  }
  std::vector<double> out(sp.region_count(), 0.0);
  for (int r = 0; r < sp.region_count(); ++r) {
    double sum = 0.0;
    for (std::uint32_t p : sp.pixels(r)) sum += raster[p];
    out[r] = sum / static_cast<double>(sp.pixels(r).size());
  }
  return out;
}

void save_superpixels(const std::filesystem::path& f32r_path,
                      const std::filesystem::path& adjacency_path, const SuperpixelMap& sp) {
  std::vector<float> ids(sp.region_ids().begin(), sp.region_ids().end());
  save_f32r(f32r_path, ScalarRaster(sp.width(), sp.height(), std::move(ids)));
  std::ostringstream out;
  for (const auto& [a, b] : sp.adjacency()) out << a << ' ' << b << '\n';
  write_text_atomic(adjacency_path, out.str());
}

SuperpixelMap load_superpixels(const std::filesystem::path& f32r_path) {
  const ScalarRaster raster = load_scalar_raster(f32r_path, false);
  std::vector<std::int32_t> labels(raster.values().size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const float v = raster[i];
    if (!(v >= 0.0f) || v != std::floor(v)) {
      throw Error(ErrorKind::Format, "region id raster holds a non-integer value");
    }
    labels[i] = static_cast<std::int32_t>(v);
  }
  return SuperpixelMap(raster.width(), raster.height(), labels);
}

ImageRaster render_region_means(const ImageRaster& image, const SuperpixelMap& sp) {
  check_dims(image.width(), image.height(), sp.width(), sp.height(), "render_region_means");
  ImageRaster out(image.width(), image.height());
  for (int r = 0; r < sp.region_count(); ++r) {
    double acc[3] = {0, 0, 0};
    for (std::uint32_t p : sp.pixels(r)) {
      const Rgb c = image.pixel(p);
      acc[0] += c.r;
      acc[1] += c.g;
      acc[2] += c.b;
    }
    const double n = static_cast<double>(sp.pixels(r).size());
    const Rgb mean{static_cast<std::uint8_t>(std::lround(acc[0] / n)),
                   static_cast<std::uint8_t>(std::lround(acc[1] / n)),
                   static_cast<std::uint8_t>(std::lround(acc[2] / n))};
    for (std::uint32_t p : sp.pixels(r)) out.set(p, mean);
  }
  return out;
}

}  // namespace mcof
