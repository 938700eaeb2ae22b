#include "mcof/evaluation.hpp"

#include <cstdio>
#include <sstream>

namespace mcof {

IouReport evaluate(const std::vector<LabelRaster>& predictions,
                   const std::vector<LabelRaster>& ground_truth, int class_count) {
  if (predictions.empty()) throw Error(ErrorKind::EmptyDataset, "nothing to evaluate");
  if (predictions.size() != ground_truth.size()) {
    throw Error(ErrorKind::DimensionMismatch, "prediction and ground-truth counts differ");
  }
  if (class_count < 1 || class_count > 255) {
    throw Error(ErrorKind::Config, "class count must be in [1, 255]");
  }
  IouReport report;
  report.classes = class_count;
  report.confusion.assign(static_cast<std::size_t>(class_count) * class_count, 0);
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const auto& pred = predictions[k];
    const auto& gt = ground_truth[k];
    check_dims(pred.width(), pred.height(), gt.width(), gt.height(), "evaluate");
    for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
      const std::uint8_t g = gt[i];
      if (g == kIgnore) continue;
      const std::uint8_t p = pred[i];
      if (g >= class_count || p >= class_count) {
        throw Error(ErrorKind::Format, "label outside [0, " + std::to_string(class_count) +
                                           ") in image " + std::to_string(k));
      }
      ++report.confusion[static_cast<std::size_t>(g) * class_count + p];
    }
  }
  report.per_class_iou.assign(class_count, 0.0);
  report.included.assign(class_count, false);
  double sum = 0.0;
  int included = 0;
  for (int c = 0; c < class_count; ++c) {
    std::uint64_t tp = report.count(c, c), fp = 0, fn = 0;
    for (int o = 0; o < class_count; ++o) {
      if (o == c) continue;
      fn += report.count(c, o);
      fp += report.count(o, c);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    report.per_class_iou[c] = static_cast<double>(tp) / static_cast<double>(denom);
    report.included[c] = true;
    sum += report.per_class_iou[c];
    ++included;
  }
  report.miou = included ? sum / included : 0.0;
  return report;
}

ImageRaster render_overlay(const ImageRaster& image, const LabelRaster& mask,
                           const Palette& palette) {
  check_dims(image.width(), image.height(), mask.width(), mask.height(), "render_overlay");
  ImageRaster out = image;
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const std::uint8_t l = mask[i];
    if (l == 0 || l == kIgnore) continue;
    const Rgb a = image.pixel(i), b = palette[l];
    // (x + y + 1) / 2 is 0.5 x + 0.5 y rounded half up.
    out.set(i, {static_cast<std::uint8_t>((a.r + b.r + 1) / 2),
                static_cast<std::uint8_t>((a.g + b.g + 1) / 2),
                static_cast<std::uint8_t>((a.b + b.b + 1) / 2)});
  }
  return out;
}

std::string format_iou_table(const IouReport& report) {
  std::ostringstream out;
  out << "class,iou,included\n";
  char buf[64];
  for (int c = 0; c < report.classes; ++c) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%d\n", c, report.per_class_iou[c],
                  report.included[c] ? 1 : 0);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "miou,%.6f,1\n", report.miou);
  out << buf;
  return out.str();
}

}  // namespace mcof
