#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <vector>

#include "mcof/raster.hpp"
#include "mcof/seeding.hpp"
#include "mcof/softmax_model.hpp"
#include "mcof/superpixel.hpp"

namespace mcof {

// Layout of a region descriptor.
struct RegionFeatureLayout {
  static constexpr int kColorHist = 0;      // 3 x 8 bins, each channel sums to 1
  static constexpr int kLabMean = 24;       // L/100, a/128, b/128
  static constexpr int kCentroid = 27;      // ((x+0.5)/W, (y+0.5)/H)
  static constexpr int kArea = 29;          // pixels / (W*H)
  static constexpr int kGradientHist = 30;  // 8 orientation bins, magnitude weighted
  static constexpr int kContrast = 38;      // mean Lab distance across the boundary / 100
  static constexpr int kDim = 39;
};

using RegionFeature = std::array<double, RegionFeatureLayout::kDim>;

std::vector<RegionFeature> extract_features(const ImageRaster& image, const SuperpixelMap& sp);

struct RegionTrainConfig {
  OptimizerConfig optimizer{};  // full batch, lr 0.1, 500 epochs, decay 1e-4
  int hidden = 0;
  int class_count = kDefaultClassCount;
  // Background samples are down-weighted to at most this multiple of the
  // largest object class.
  double background_ratio = 3.0;
  std::uint64_t seed = 0;
};

struct RegionClassifier {
  SoftmaxModel model;
  TrainResult training;
};

// Builds the weighted training batch from labelled regions of every image.
SampleBatch region_training_batch(const std::vector<std::vector<RegionFeature>>& features,
                                  const std::vector<RegionSeedSet>& seeds,
                                  double background_ratio);

// Minimizes the cross-entropy over labelled regions. Throws DegenerateData if
// a class in `required_classes` has no labelled region.
RegionClassifier train_region_classifier(const std::vector<std::vector<RegionFeature>>& features,
                                         const std::vector<RegionSeedSet>& seeds,
                                         const RegionTrainConfig& config,
                                         const std::set<int>& required_classes = {});

struct ObjectRegionSet {
  std::vector<int> labels;
  int classes = 0;
  std::vector<double> posteriors;  // region-major, `classes` values per region

  std::span<const double> posterior(int region) const {
    return {posteriors.data() + static_cast<std::size_t>(region) * classes,
            static_cast<std::size_t>(classes)};
  }
};

// Softmax posteriors and argmax labels; labels outside image_labels and
// background are replaced by background, posteriors are kept as computed.
ObjectRegionSet predict_regions(const std::vector<RegionFeature>& features,
                                const SoftmaxModel& model, const std::set<int>& image_labels);

}  // namespace mcof
