#pragma once

#include <cstdint>

#include "mcof/dataset.hpp"

namespace mcof {

// Parameters of the synthetic weakly-labelled benchmark. Every object is a
// body ellipse with a small "head" disk; each class has its own head and body
// colors. Heatmaps only cover the head's bounding box, saliency covers the
// whole object.
struct SynthSpec {
  int image_count = 40;
  int width = 64;
  int height = 64;
  int object_classes = 4;
  // Fraction of images that contain two objects of different classes.
  double multi_class_fraction = 0.3;
  // Per-pixel Gaussian noise (RGB units) on background and objects.
  double pixel_noise = 6.0;
  // Darkening of the body away from the head, as a fraction of its color.
  double body_shading = 0.35;
  // HSV saturation and value of the two parts; hues are spread evenly over
  // the classes.
  double head_saturation = 0.7;
  double head_value = 0.8;
  double body_saturation = 0.62;
  double body_value = 0.72;
  double saliency_noise = 0.1;
  double saliency_blur = 1.5;

  void validate() const;
};

// Deterministic for a given (spec, seed).
Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

}  // namespace mcof
