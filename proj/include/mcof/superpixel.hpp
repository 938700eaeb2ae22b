#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "mcof/raster.hpp"

namespace mcof {

struct FhParams {
  double sigma = 0.8;
  double k = 100.0;
  int min_size = 50;

  void validate() const;
  // Standard defaults with min_size reduced for images of at most 128x128.
  static FhParams defaults_for(int width, int height);
};

// Dense region labelling of an image plus its 4-adjacency graph.
class SuperpixelMap {
 public:
  SuperpixelMap() = default;
  // Builds the map from a per-pixel labelling. Labels are relabelled to
  // 4-connected components numbered in raster order of first occurrence.
  SuperpixelMap(int width, int height, const std::vector<std::int32_t>& labels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int region_count() const noexcept { return static_cast<int>(region_pixels_.size()); }
  std::size_t pixel_count() const noexcept { return region_id_.size(); }

  std::int32_t region_of(std::size_t pixel) const { return region_id_[pixel]; }
  std::int32_t region_of(int x, int y) const {
    return region_id_[static_cast<std::size_t>(y) * width_ + x];
  }
  const std::vector<std::int32_t>& region_ids() const noexcept { return region_id_; }
  const std::vector<std::uint32_t>& pixels(int region) const { return region_pixels_[region]; }
  const std::vector<std::vector<std::uint32_t>>& region_pixels() const noexcept {
    return region_pixels_;
  }
  // Sorted (a, b) pairs with a < b.
  const std::vector<std::pair<int, int>>& adjacency() const noexcept { return adjacency_; }
  const std::vector<int>& neighbors(int region) const { return neighbors_[region]; }

  friend bool operator==(const SuperpixelMap& a, const SuperpixelMap& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.region_id_ == b.region_id_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::int32_t> region_id_;
  std::vector<std::vector<std::uint32_t>> region_pixels_;
  std::vector<std::pair<int, int>> adjacency_;
  std::vector<std::vector<int>> neighbors_;
};

// Felzenszwalb-Huttenlocher graph segmentation: per-channel Gaussian
// smoothing, 8-connected grid graph with Euclidean RGB weights, Kruskal-order
// merging against Int(C) + k/|C|, then absorption of components smaller than
// min_size. Final regions are 4-connected.
SuperpixelMap segment(const ImageRaster& image, const FhParams& params);

// Mean of a single-channel raster over each region.
std::vector<double> average_raster_per_region(const SuperpixelMap& sp, const ScalarRaster& raster);

// Region ids stored as floats in F32R plus an "a b" adjacency sidecar.
void save_superpixels(const std::filesystem::path& f32r_path,
                      const std::filesystem::path& adjacency_path, const SuperpixelMap& sp);
SuperpixelMap load_superpixels(const std::filesystem::path& f32r_path);

// Fills each region with its mean color; handy for inspecting a segmentation.
ImageRaster render_region_means(const ImageRaster& image, const SuperpixelMap& sp);

}  // namespace mcof
