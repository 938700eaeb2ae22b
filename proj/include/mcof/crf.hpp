#pragma once

#include "mcof/raster.hpp"

namespace mcof {

struct CrfParams {
  int iterations = 5;
  double w_smooth = 3.0;
  double theta_gamma = 3.0;
  double w_appear = 5.0;
  double theta_alpha = 30.0;
  double theta_beta = 13.0;

  void validate() const;
  // Standard defaults with theta_alpha reduced to max(width, height) / 8 for
  // images smaller than 240 pixels on their long side.
  static CrfParams defaults_for(int width, int height);
};

// Largest image handled by the exact quadratic message passing.
inline constexpr std::size_t kCrfMaxPixels = 128 * 128;

// Mean-field inference for a fully connected CRF with a Gaussian smoothness
// kernel, a bilateral appearance kernel and Potts compatibility.
// `unary` holds one distribution over L >= 2 labels per pixel (L channels).
// Q starts at the unary; each iteration computes
//   Q_i(l) ~ exp(log U_i(l) - sum_{l' != l} sum_j k(i, j) Q_j(l')).
// Messages are accumulated in a fixed order, so the result is deterministic.
ScalarRaster mean_field(const ScalarRaster& unary, const ImageRaster& image,
                        const CrfParams& params);

// Two-label CRF over (1 - p, p); returns 1 where the foreground marginal is
// strictly larger, 0 otherwise.
LabelRaster binarize(const ScalarRaster& prob, const ImageRaster& image, const CrfParams& params);

}  // namespace mcof
