#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcof/raster.hpp"
#include "mcof/raster_io.hpp"

namespace mcof {

struct IouReport {
  int classes = 0;
  // Row = ground truth, column = prediction.
  std::vector<std::uint64_t> confusion;
  // NaN-free; entries of excluded classes are 0 and flagged in `included`.
  std::vector<double> per_class_iou;
  std::vector<bool> included;
  double miou = 0.0;

  std::uint64_t count(int gt, int pred) const {
    return confusion[static_cast<std::size_t>(gt) * classes + pred];
  }
};

// Accumulates a confusion matrix over all pixels whose ground truth is not
// IGNORE. IoU_c = TP / (TP + FP + FN); classes with no ground-truth and no
// predicted pixels are excluded from the mean.
IouReport evaluate(const std::vector<LabelRaster>& predictions,
                   const std::vector<LabelRaster>& ground_truth, int class_count);

// Alpha-blends palette colors (alpha 0.5, rounded half up) over the image;
// background and IGNORE pixels are left untouched.
ImageRaster render_overlay(const ImageRaster& image, const LabelRaster& mask,
                           const Palette& palette = voc_palette());

std::string format_iou_table(const IouReport& report);

}  // namespace mcof
