#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "mcof/crf.hpp"
#include "mcof/raster.hpp"
#include "mcof/softmax_model.hpp"
#include "mcof/superpixel.hpp"

namespace mcof {

// Per-pixel descriptor layout.
struct PixelFeatureLayout {
  static constexpr int kLab = 0;          // L/100, a/128, b/128
  static constexpr int kPosition = 3;     // (x+0.5)/W, (y+0.5)/H
  static constexpr int kWindowMean = 5;   // 5x5 Lab mean (scaled like kLab)
  static constexpr int kWindowStd = 8;    // 5x5 Lab standard deviation
  static constexpr int kRegionMean = 11;  // superpixel-averaged Lab
  static constexpr int kGradient = 14;    // Sobel magnitude of L/100
  static constexpr int kDim = 15;
};

// n x kDim matrix, row-major in pixel order.
std::vector<double> extract_pixel_features(const ImageRaster& image, const SuperpixelMap& sp);

// Cross-entropy over labelled pixels normalized once by the total labelled
// count: -(1 / sum_c |S_c|) sum_c sum_{u in S_c} log f_{u,c}.
// `predictions` carries one distribution per pixel (C channels).
double seg_loss(const ScalarRaster& predictions, const LabelRaster& supervision);

struct PixelTrainConfig {
  OptimizerConfig optimizer{60, 0.1, 0.9, 1e-4, 256};
  int hidden = 64;
  int class_count = kDefaultClassCount;
  // Labelled pixels drawn per image and epoch, allocated to classes in
  // proportion to their counts. 0 uses every labelled pixel.
  int max_pixels_per_image = 2000;
  std::uint64_t seed = 0;
};

struct PixelTrainingImage {
  const ImageRaster* image = nullptr;
  const SuperpixelMap* superpixels = nullptr;
  const LabelRaster* supervision = nullptr;
};

struct PixelClassifier {
  SoftmaxModel model;
  TrainResult training;
};

PixelClassifier train_pixel_classifier(const std::vector<PixelTrainingImage>& data,
                                       const PixelTrainConfig& config,
                                       const std::set<int>& required_classes = {});

// Per-pixel class distributions (C channels).
ScalarRaster predict_pixel_proba(const ImageRaster& image, const SuperpixelMap& sp,
                                 const SoftmaxModel& model);

struct PredictOptions {
  // Restrict the argmax to these classes (background is always allowed).
  std::optional<std::set<int>> allowed_classes;
  std::optional<CrfParams> crf;
};

LabelRaster predict_mask(const ImageRaster& image, const SuperpixelMap& sp,
                         const SoftmaxModel& model, const PredictOptions& options = {});

}  // namespace mcof
