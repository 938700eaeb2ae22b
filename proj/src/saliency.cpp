#include "mcof/saliency.hpp"

#include <algorithm>
#include <cmath>

#include "mcof/color.hpp"

namespace mcof {

int LabBins::index(Rgb color) const {
  const Lab lab = rgb_to_lab(color);
  auto quantize = [&](double v, double lo, double hi) {
    const int q = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    return std::clamp(q, 0, bins - 1);
  };
  return (quantize(lab.l, 0.0, 100.0) * bins + quantize(lab.a, -128.0, 128.0)) * bins +
         quantize(lab.b, -128.0, 128.0);
}

LikelihoodModel fit_likelihoods(const ImageRaster& image, const LabelRaster& object_mask,
                                LabBins bins) {
  check_dims(image.width(), image.height(), object_mask.width(), object_mask.height(),
             "fit_likelihoods");
  if (bins.bins < 1) throw Error(ErrorKind::Config, "bins must be positive");
  LikelihoodModel model{bins, std::vector<double>(bins.count(), 0.0),
                        std::vector<double>(bins.count(), 0.0)};
  double n_obj = 0.0, n_bg = 0.0;
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const std::uint8_t m = object_mask[i];
    if (m == kIgnore) continue;
    const int b = bins.index(image.pixel(i));
    if (m >= 1) {
      model.object_hist[b] += 1.0;
      n_obj += 1.0;
    } else {
      model.background_hist[b] += 1.0;
      n_bg += 1.0;
    }
  }
  if (n_obj == 0.0 || n_bg == 0.0) {
    throw Error(ErrorKind::EmptyPartition, "likelihoods need object and background pixels");
  }
  auto normalize = [&](std::vector<double>& hist, double total) {
    double sum = 0.0;
    for (double& v : hist) {
      v = v / total + kLikelihoodFloor;
      sum += v;
    }
    for (double& v : hist) v /= sum;
  };
  normalize(model.object_hist, n_obj);
  normalize(model.background_hist, n_bg);
  return model;
}

double bayes_posterior_value(double saliency, double object_likelihood,
                             double background_likelihood) {
  // Equal likelihoods cancel; done explicitly so the prior comes back
  // unrounded.
  if (object_likelihood == background_likelihood) return saliency;
  if (saliency <= 0.0) return 0.0;
  if (saliency >= 1.0) return 1.0;
  // 1 / (1 + ratio): every rounding step is monotone, so the result never
  // decreases as the prior grows.
  const double ratio = ((1.0 - saliency) * background_likelihood) / (saliency * object_likelihood);
  return 1.0 / (1.0 + ratio);
}

ScalarRaster bayes_posterior(const ScalarRaster& saliency, const LikelihoodModel& model,
                             const ImageRaster& image) {
  check_dims(saliency.width(), saliency.height(), image.width(), image.height(),
             "bayes_posterior");
  ScalarRaster out(image.width(), image.height());
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const int b = model.bins.index(image.pixel(i));
    const double s = std::clamp(static_cast<double>(saliency[i]), 0.0, 1.0);
    out[i] = static_cast<float>(
        bayes_posterior_value(s, model.object_hist[b], model.background_hist[b]));
  }
  return out;
}

RefinedObjectRegions refine(const ImageRaster& image, const SuperpixelMap& sp,
                            const ObjectRegionSet& object_regions, const ScalarRaster& saliency,
                            int class_id, const CrfParams& crf_params, LabBins bins) {
  check_dims(image.width(), image.height(), sp.width(), sp.height(), "refine");
  if (saliency.empty()) throw Error(ErrorKind::MissingSaliency, "refinement needs a saliency map");
  check_dims(image.width(), image.height(), saliency.width(), saliency.height(), "refine");
  if (static_cast<int>(object_regions.labels.size()) != sp.region_count()) {
    throw Error(ErrorKind::DimensionMismatch, "object regions do not match the superpixels");
  }
  for (int l : object_regions.labels) {
    if (l != 0 && l != class_id) {
      throw Error(ErrorKind::MultiClassImage, "refinement applies to single-class images only");
    }
  }

  std::vector<int> object_labels(object_regions.labels);
  const LabelRaster object_mask = render_region_labels(sp, object_labels);
  const LikelihoodModel model = fit_likelihoods(image, object_mask, bins);

  RefinedObjectRegions out;
  out.posterior = bayes_posterior(saliency, model, image);
  const LabelRaster binary = binarize(out.posterior, image, crf_params);
  const RegionSeedSet votes = seeds_from_mask(sp, binary);

  out.labels.source = SeedSource::FromMask;
  out.labels.labels.assign(sp.region_count(), 0);
  for (int r = 0; r < sp.region_count(); ++r) {
    const bool original = object_regions.labels[r] == class_id;
    out.labels.labels[r] = (original || votes.labels[r] == 1) ? class_id : 0;
  }
  return out;
}

}  // namespace mcof
