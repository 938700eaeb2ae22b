#include "mcof/color.hpp"

#include <cmath>

namespace mcof {

namespace {

const std::array<double, 256>& srgb_linear_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) {
      const double c = i / 255.0;
      t[i] = c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    }
    return t;
  }();
  return table;
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

Lab rgb_to_lab(Rgb c) {
  const auto& lin = srgb_linear_table();
  const double r = lin[c.r], g = lin[c.g], b = lin[c.b];
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  const double fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

std::vector<double> image_to_lab(const ImageRaster& image) {
  std::vector<double> out(image.pixel_count() * 3);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const Lab lab = rgb_to_lab(image.pixel(i));
    out[3 * i] = lab.l;
    out[3 * i + 1] = lab.a;
    out[3 * i + 2] = lab.b;
  }
  return out;
}

}  // namespace mcof
