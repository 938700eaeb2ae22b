#pragma once

#include <array>

#include "mcof/raster.hpp"

namespace mcof {

struct Lab {
  double l = 0.0, a = 0.0, b = 0.0;
};

// sRGB (D65) to CIE L*a*b*. L in [0, 100]; a, b roughly in [-128, 128].
Lab rgb_to_lab(Rgb c);

// Per-pixel Lab conversion of a whole image, 3 doubles per pixel.
std::vector<double> image_to_lab(const ImageRaster& image);

}  // namespace mcof
