#include "mcof/region_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "mcof/color.hpp"

namespace mcof {

std::vector<RegionFeature> extract_features(const ImageRaster& image, const SuperpixelMap& sp) {
  using L = RegionFeatureLayout;
  check_dims(image.width(), image.height(), sp.width(), sp.height(), "extract_features");
  const int w = image.width(), h = image.height();
  const auto lab = image_to_lab(image);
  std::vector<double> gray(image.pixel_count());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const Rgb c = image.pixel(i);
    gray[i] = (0.299 * c.r + 0.587 * c.g + 0.114 * c.b) / 255.0;
  }

  std::vector<RegionFeature> out(sp.region_count());
  for (int r = 0; r < sp.region_count(); ++r) {
    RegionFeature& f = out[r];
    f.fill(0.0);
    const auto& px = sp.pixels(r);
    const double n = static_cast<double>(px.size());
    double sx = 0, sy = 0, boundary_sum = 0;
    int boundary_pairs = 0;
    double grad_total = 0;
    for (std::uint32_t p : px) {
      const Rgb c = image.pixel(p);
      f[L::kColorHist + c.r / 32] += 1.0;
      f[L::kColorHist + 8 + c.g / 32] += 1.0;
      f[L::kColorHist + 16 + c.b / 32] += 1.0;
      f[L::kLabMean] += lab[3 * p];
      f[L::kLabMean + 1] += lab[3 * p + 1];
      f[L::kLabMean + 2] += lab[3 * p + 2];
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      sx += x + 0.5;
      sy += y + 0.5;

      // Gradients only see pixels of the same region; outside samples are
      // replaced by the centre value.
      auto sample = [&](int nx, int ny) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) return gray[p];
        const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
        return sp.region_of(q) == r ? gray[q] : gray[p];
      };
      const double gx = 0.5 * (sample(x + 1, y) - sample(x - 1, y));
      const double gy = 0.5 * (sample(x, y + 1) - sample(x, y - 1));
      const double mag = std::hypot(gx, gy);
      if (mag > 0.0) {
        double angle = std::atan2(gy, gx);
        if (angle < 0) angle += 2.0 * std::numbers::pi;
        const int bin = std::min(7, static_cast<int>(angle / (2.0 * std::numbers::pi) * 8.0));
        f[L::kGradientHist + bin] += mag;
        grad_total += mag;
      }

      const int nbx[4] = {x - 1, x + 1, x, x};
      const int nby[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nbx[k] < 0 || nby[k] < 0 || nbx[k] >= w || nby[k] >= h) continue;
        const std::size_t q = static_cast<std::size_t>(nby[k]) * w + nbx[k];
        if (sp.region_of(q) == r) continue;
        const double dl = lab[3 * p] - lab[3 * q];
        const double da = lab[3 * p + 1] - lab[3 * q + 1];
        const double db = lab[3 * p + 2] - lab[3 * q + 2];
        boundary_sum += std::sqrt(dl * dl + da * da + db * db);
        ++boundary_pairs;
      }
    }
    for (int i = 0; i < 24; ++i) f[L::kColorHist + i] /= n;
    f[L::kLabMean] /= n * 100.0;
    f[L::kLabMean + 1] /= n * 128.0;
    f[L::kLabMean + 2] /= n * 128.0;
    f[L::kCentroid] = sx / n / w;
    f[L::kCentroid + 1] = sy / n / h;
    f[L::kArea] = n / static_cast<double>(image.pixel_count());
    if (grad_total > 0.0) {
      for (int i = 0; i < 8; ++i) f[L::kGradientHist + i] /= grad_total;
    }
    f[L::kContrast] = boundary_pairs ? boundary_sum / boundary_pairs / 100.0 : 0.0;
  }
  return out;
}

SampleBatch region_training_batch(const std::vector<std::vector<RegionFeature>>& features,
                                  const std::vector<RegionSeedSet>& seeds,
                                  double background_ratio) {
  if (features.size() != seeds.size()) {
    throw Error(ErrorKind::DimensionMismatch, "features and seeds cover different image counts");
  }
  std::map<int, int> counts;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (seeds[i].labels.size() != features[i].size()) {
      throw Error(ErrorKind::DimensionMismatch, "seed/feature region count mismatch");
    }
    for (int l : seeds[i].labels) {
      if (l != kUnlabeled) ++counts[l];
    }
  }
  int largest_object = 0;
  for (const auto& [cls, n] : counts) {
    if (cls != 0) largest_object = std::max(largest_object, n);
  }
  double bg_weight = 1.0;
  if (background_ratio > 0.0 && counts.count(0) && largest_object > 0) {
    bg_weight = std::min(1.0, background_ratio * largest_object / counts[0]);
  }

  SampleBatch batch;
  batch.dim = RegionFeatureLayout::kDim;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t r = 0; r < seeds[i].labels.size(); ++r) {
      const int l = seeds[i].labels[r];
      if (l == kUnlabeled) continue;
      batch.add(features[i][r], l, l == 0 ? bg_weight : 1.0);
    }
  }
  return batch;
}

RegionClassifier train_region_classifier(const std::vector<std::vector<RegionFeature>>& features,
                                         const std::vector<RegionSeedSet>& seeds,
                                         const RegionTrainConfig& config,
                                         const std::set<int>& required_classes) {
  SampleBatch batch = region_training_batch(features, seeds, config.background_ratio);
  if (batch.size() == 0) throw Error(ErrorKind::DegenerateData, "no labelled regions");
  std::vector<int> present(config.class_count, 0);
  for (int l : batch.labels) {
    if (l < 0 || l >= config.class_count) {
      throw Error(ErrorKind::DegenerateData, "seed label " + std::to_string(l) + " out of range");
    }
    ++present[l];
  }
  for (int c : required_classes) {
    if (c < 0 || c >= config.class_count || present[c] == 0) {
      throw Error(ErrorKind::DegenerateData, "class " + std::to_string(c) + " has no samples");
    }
  }

  RegionClassifier out{SoftmaxModel(RegionFeatureLayout::kDim, config.hidden, config.class_count),
                       {}};
  out.model.initialize(config.seed);
  out.training = fit(
      out.model, [&](int) -> const SampleBatch& { return batch; }, config.optimizer,
      config.seed ^ 0x5eedULL);
  return out;
}

ObjectRegionSet predict_regions(const std::vector<RegionFeature>& features,
                                const SoftmaxModel& model, const std::set<int>& image_labels) {
  ObjectRegionSet out;
  out.classes = model.classes();
  out.labels.resize(features.size());
  out.posteriors.resize(features.size() * static_cast<std::size_t>(out.classes));
  for (std::size_t r = 0; r < features.size(); ++r) {
    std::span<double> p(out.posteriors.data() + r * out.classes, out.classes);
    model.predict_proba(features[r], p);
    const int best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    out.labels[r] = (best == 0 || image_labels.count(best)) ? best : 0;
  }
  return out;
}

}  // namespace mcof
