#include "mcof/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "mcof/parallel.hpp"
#include "mcof/rng.hpp"

namespace mcof {

void SynthSpec::validate() const {
  if (image_count < 1 || width < 16 || height < 16) {
    throw Error(ErrorKind::Config, "synthetic set needs >= 1 image of at least 16x16");
  }
  if (object_classes < 1 || object_classes > 254) {
    throw Error(ErrorKind::Config, "object class count must be in [1, 254]");
  }
  if (multi_class_fraction < 0.0 || multi_class_fraction > 1.0) {
    throw Error(ErrorKind::Config, "multi_class_fraction must be in [0, 1]");
  }
  for (double v : {head_saturation, head_value, body_saturation, body_value, body_shading}) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::Config, "color settings must be in [0, 1]");
  }
  if (!(pixel_noise >= 0.0) || !(saliency_noise >= 0.0) || !(saliency_blur >= 0.0)) {
    throw Error(ErrorKind::Config, "noise and blur settings must be >= 0");
  }
  if (object_classes < 2 && multi_class_fraction > 0.0) {
    throw Error(ErrorKind::Config, "multi-class images need at least two object classes");
  }
}

namespace {

struct ClassColors {
  Rgb head;
  Rgb body;
};

Rgb hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h / 60.0, 6.0);
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) r = c, g = x;
  else if (hp < 2) r = x, g = c;
  else if (hp < 3) g = c, b = x;
  else if (hp < 4) g = x, b = c;
  else if (hp < 5) r = x, b = c;
  else r = c, b = x;
  const double m = v - c;
  auto to8 = [](double u) { return static_cast<std::uint8_t>(std::lround(std::clamp(u, 0.0, 1.0) * 255)); };
  return {to8(r + m), to8(g + m), to8(b + m)};
}

ClassColors class_colors(const SynthSpec& spec, int cls) {
  // Evenly spaced hues; the head is a little brighter and more saturated than
  // the body, close enough that the two share most Lab histogram cells.
  const double hue = 360.0 * (cls - 1) / spec.object_classes + 10.0;
  return {hsv(hue, spec.head_saturation, spec.head_value),
          hsv(hue, spec.body_saturation, spec.body_value)};
}

struct ObjectPlan {
  int cls;
  double cx, cy, rx, ry;
  double hx, hy, hr;
};

std::uint8_t clamp8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

Sample make_sample(const SynthSpec& spec, std::uint64_t seed, int index) {
  Rng rng(seed);
  const int w = spec.width, h = spec.height;
  const double scale = std::min(w, h) / 64.0;
  Sample s;
  char name[32];
  std::snprintf(name, sizeof name, "synth_%04d", index);
  s.name = name;

  const bool multi = spec.object_classes >= 2 && rng.uniform() < spec.multi_class_fraction;
  std::vector<int> classes{1 + static_cast<int>(rng.below(spec.object_classes))};
  if (multi) {
    int other = 1 + static_cast<int>(rng.below(spec.object_classes - 1));
    if (other >= classes[0]) ++other;
    classes.push_back(other);
  }

  std::vector<ObjectPlan> plans;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    ObjectPlan p{};
    p.cls = classes[k];
    const double slot_w = static_cast<double>(w) / classes.size();
    p.rx = rng.uniform(0.55, 0.75) * std::min(slot_w / 2.0, 15.0 * scale);
    p.ry = rng.uniform(11.0, 15.0) * scale;
    p.hr = rng.uniform(4.0, 5.0) * scale;
    const double x_lo = slot_w * k + p.rx + 1, x_hi = slot_w * (k + 1) - p.rx - 1;
    p.cx = x_hi > x_lo ? rng.uniform(x_lo, x_hi) : 0.5 * (x_lo + x_hi);
    const double y_lo = p.ry + 2.0 * p.hr + 1, y_hi = h - p.ry - 1;
    p.cy = y_hi > y_lo ? rng.uniform(y_lo, y_hi) : 0.5 * (y_lo + y_hi);
    p.hx = p.cx + rng.uniform(-0.3, 0.3) * p.rx;
    p.hy = p.cy - p.ry - 0.4 * p.hr;
    plans.push_back(p);
  }

  // Background: muted grey-blue with low-frequency variation.
  const double phase[3] = {rng.uniform(0, 6.28), rng.uniform(0, 6.28), rng.uniform(0, 6.28)};
  const double freq[3] = {rng.uniform(0.05, 0.15), rng.uniform(0.05, 0.15), rng.uniform(0.05, 0.15)};
  const Rgb base{static_cast<std::uint8_t>(rng.range(95, 125)),
                 static_cast<std::uint8_t>(rng.range(100, 125)),
                 static_cast<std::uint8_t>(rng.range(105, 130))};

  s.image = ImageRaster(w, h);
  LabelRaster gt(w, h, 0);
  std::vector<double> body_t(static_cast<std::size_t>(w) * h, -1.0);
  std::vector<bool> is_head(static_cast<std::size_t>(w) * h, false);
  std::vector<int> owner(static_cast<std::size_t>(w) * h, -1);
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const auto& p = plans[k];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double ex = (x + 0.5 - p.cx) / p.rx, ey = (y + 0.5 - p.cy) / p.ry;
        const double hd = std::hypot(x + 0.5 - p.hx, y + 0.5 - p.hy);
        if (hd <= p.hr) {
          owner[i] = static_cast<int>(k);
          is_head[i] = true;
        } else if (ex * ex + ey * ey <= 1.0) {
          owner[i] = static_cast<int>(k);
          is_head[i] = false;
          // 0 at the top of the body (next to the head), 1 at the bottom.
          body_t[i] = std::clamp((y + 0.5 - (p.cy - p.ry)) / (2.0 * p.ry), 0.0, 1.0);
        }
      }
    }
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      double rgb[3];
      if (owner[i] < 0) {
        const double wave = 12.0 * std::sin(freq[0] * x + phase[0]) +
                            8.0 * std::sin(freq[1] * y + phase[1]) +
                            6.0 * std::sin(freq[2] * (x + y) + phase[2]);
        rgb[0] = base.r + wave;
        rgb[1] = base.g + wave;
        rgb[2] = base.b + wave;
      } else {
        const auto& p = plans[owner[i]];
        const ClassColors colors = class_colors(spec, p.cls);
        gt[i] = static_cast<std::uint8_t>(p.cls);
        if (is_head[i]) {
          rgb[0] = colors.head.r;
          rgb[1] = colors.head.g;
          rgb[2] = colors.head.b;
        } else {
          const double shade = 1.0 - spec.body_shading * body_t[i];
          rgb[0] = colors.body.r * shade;
          rgb[1] = colors.body.g * shade;
          rgb[2] = colors.body.b * shade;
        }
      }
      s.image.set(i, {clamp8(rgb[0] + spec.pixel_noise * rng.normal()),
                      clamp8(rgb[1] + spec.pixel_noise * rng.normal()),
                      clamp8(rgb[2] + spec.pixel_noise * rng.normal())});
    }
  }

  // Heatmaps: a bump on the head, cut to the head's bounding box.
  for (const auto& p : plans) {
    ScalarRaster heat(w, h, 0.0f);
    const int x0 = static_cast<int>(std::floor(p.hx - p.hr)), x1 = static_cast<int>(std::ceil(p.hx + p.hr));
    const int y0 = static_cast<int>(std::floor(p.hy - p.hr)), y1 = static_cast<int>(std::ceil(p.hy + p.hr));
    for (int y = std::max(0, y0); y < std::min(h, y1); ++y) {
      for (int x = std::max(0, x0); x < std::min(w, x1); ++x) {
        const double d2 = (x + 0.5 - p.hx) * (x + 0.5 - p.hx) + (y + 0.5 - p.hy) * (y + 0.5 - p.hy);
        heat.at(x, y) = static_cast<float>(std::exp(-d2 / (2.0 * p.hr * p.hr)));
      }
    }
    s.heatmaps.emplace(p.cls, std::move(heat));
    s.labels.insert(p.cls);
  }

  // Saliency: blurred whole-object indicator plus uniform noise.
  std::vector<double> indicator(static_cast<std::size_t>(w) * h, 0.0);
  for (std::size_t i = 0; i < indicator.size(); ++i) indicator[i] = owner[i] >= 0 ? 1.0 : 0.0;
  const double sigma = spec.saliency_blur;
  std::vector<double> blurred = indicator;
  if (sigma > 0.0) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int d = -radius; d <= radius; ++d) ksum += kernel[d + radius] = std::exp(-0.5 * d * d / (sigma * sigma));
    for (double& v : kernel) v /= ksum;
    std::vector<double> tmp(indicator.size());
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d) acc += kernel[d + radius] * indicator[y * w + std::clamp(x + d, 0, w - 1)];
        tmp[y * w + x] = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d) acc += kernel[d + radius] * tmp[std::clamp(y + d, 0, h - 1) * w + x];
        blurred[y * w + x] = acc;
      }
    }
  }
  ScalarRaster saliency(w, h, 0.0f);
  for (std::size_t i = 0; i < blurred.size(); ++i) {
    const double v = blurred[i] + spec.saliency_noise * (2.0 * rng.uniform() - 1.0);
    saliency[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  s.saliency = std::move(saliency);
  s.ground_truth = std::move(gt);
  return s;
}

}  // namespace

Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Dataset dataset;
  dataset.class_count = spec.object_classes + 1;
  dataset.samples.resize(spec.image_count);
  for (int i = 0; i < spec.image_count; ++i) {
    dataset.samples[i] = make_sample(spec, derive_seed(seed, "synth", static_cast<std::uint64_t>(i)), i);
  }
  return dataset;
}

}  // namespace mcof
