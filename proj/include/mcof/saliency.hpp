#pragma once

#include <vector>

#include "mcof/crf.hpp"
#include "mcof/raster.hpp"
#include "mcof/region_model.hpp"
#include "mcof/seeding.hpp"
#include "mcof/superpixel.hpp"

namespace mcof {

// Uniform quantization of Lab color: L over [0, 100], a and b over
// [-128, 128), `bins` cells per axis.
struct LabBins {
  int bins = 8;

  int count() const { return bins * bins * bins; }
  int index(Rgb color) const;
};

inline constexpr double kLikelihoodFloor = 1e-6;

// Color likelihoods of object and background pixels.
struct LikelihoodModel {
  LabBins bins;
  std::vector<double> object_hist;
  std::vector<double> background_hist;
};

// Histograms of quantized Lab color over object (mask >= 1) and background
// (mask == 0) pixels; IGNORE pixels are skipped. Each histogram gets
// kLikelihoodFloor added to every bin and is renormalized.
LikelihoodModel fit_likelihoods(const ImageRaster& image, const LabelRaster& object_mask,
                                LabBins bins = {});

// p(obj | v) = s p(v|obj) / (s p(v|obj) + (1 - s) p(v|bg)) per pixel, where s
// is the saliency value.
double bayes_posterior_value(double saliency, double object_likelihood,
                             double background_likelihood);
ScalarRaster bayes_posterior(const ScalarRaster& saliency, const LikelihoodModel& model,
                             const ImageRaster& image);

struct RefinedObjectRegions {
  ScalarRaster posterior;
  RegionSeedSet labels;
};

// Saliency-guided supplement for an image with one object class: fit
// likelihoods from the predicted object regions, compute the posterior,
// binarize it with the CRF, take the per-region majority and union the result
// with the original object regions of `class_id`.
RefinedObjectRegions refine(const ImageRaster& image, const SuperpixelMap& sp,
                            const ObjectRegionSet& object_regions, const ScalarRaster& saliency,
                            int class_id, const CrfParams& crf_params, LabBins bins = {});

}  // namespace mcof
