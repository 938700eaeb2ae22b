#include "mcof/pixel_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mcof/color.hpp"
#include "mcof/parallel.hpp"
#include "mcof/rng.hpp"

namespace mcof {

std::vector<double> extract_pixel_features(const ImageRaster& image, const SuperpixelMap& sp) {
  using L = PixelFeatureLayout;
  check_dims(image.width(), image.height(), sp.width(), sp.height(), "extract_pixel_features");
  const int w = image.width(), h = image.height();
  const std::size_t n = image.pixel_count();
  std::vector<double> lab = image_to_lab(image);
  for (std::size_t i = 0; i < n; ++i) {
    lab[3 * i] /= 100.0;
    lab[3 * i + 1] /= 128.0;
    lab[3 * i + 2] /= 128.0;
  }

  std::vector<double> region_mean(static_cast<std::size_t>(sp.region_count()) * 3, 0.0);
  for (int r = 0; r < sp.region_count(); ++r) {
    for (std::uint32_t p : sp.pixels(r)) {
      for (int c = 0; c < 3; ++c) region_mean[3 * r + c] += lab[3 * p + c];
    }
    for (int c = 0; c < 3; ++c) region_mean[3 * r + c] /= static_cast<double>(sp.pixels(r).size());
  }

  auto at = [&](int x, int y, int c) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return lab[3 * (static_cast<std::size_t>(y) * w + x) + c];
  };

  std::vector<double> out(n * L::kDim);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      double* f = out.data() + i * L::kDim;
      for (int c = 0; c < 3; ++c) f[L::kLab + c] = lab[3 * i + c];
      f[L::kPosition] = (x + 0.5) / w;
      f[L::kPosition + 1] = (y + 0.5) / h;
      for (int c = 0; c < 3; ++c) {
        double s = 0.0, s2 = 0.0;
        int count = 0;
        for (int dy = -2; dy <= 2; ++dy) {
          for (int dx = -2; dx <= 2; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const double v = lab[3 * (static_cast<std::size_t>(ny) * w + nx) + c];
            s += v;
            s2 += v * v;
            ++count;
          }
        }
        const double mean = s / count;
        f[L::kWindowMean + c] = mean;
        f[L::kWindowStd + c] = std::sqrt(std::max(0.0, s2 / count - mean * mean));
        f[L::kRegionMean + c] = region_mean[3 * sp.region_of(x, y) + c];
      }
      const double gx = (at(x + 1, y - 1, 0) + 2 * at(x + 1, y, 0) + at(x + 1, y + 1, 0)) -
                        (at(x - 1, y - 1, 0) + 2 * at(x - 1, y, 0) + at(x - 1, y + 1, 0));
      const double gy = (at(x - 1, y + 1, 0) + 2 * at(x, y + 1, 0) + at(x + 1, y + 1, 0)) -
                        (at(x - 1, y - 1, 0) + 2 * at(x, y - 1, 0) + at(x + 1, y - 1, 0));
      f[L::kGradient] = std::hypot(gx, gy) / 8.0;
    }
  }
  return out;
}

double seg_loss(const ScalarRaster& predictions, const LabelRaster& supervision) {
  check_dims(predictions.width(), predictions.height(), supervision.width(), supervision.height(),
             "seg_loss");
  const int classes = predictions.channels();
  double total = 0.0;
  std::size_t labelled = 0;
  for (std::size_t i = 0; i < supervision.pixel_count(); ++i) {
    const std::uint8_t y = supervision[i];
    if (y == kIgnore) continue;
    if (y >= classes) throw Error(ErrorKind::DimensionMismatch, "supervision class out of range");
    total += -std::log(std::max(static_cast<double>(predictions[i * classes + y]), 1e-300));
    ++labelled;
  }
  if (labelled == 0) throw Error(ErrorKind::NoLabeledPixels, "supervision has no labelled pixels");
  return total / static_cast<double>(labelled);
}

namespace {

struct PreparedImage {
  std::vector<double> features;
  // Labelled pixel indices grouped by class.
  std::map<int, std::vector<std::uint32_t>> by_class;
  std::size_t labelled = 0;
};

}  // namespace

PixelClassifier train_pixel_classifier(const std::vector<PixelTrainingImage>& data,
                                       const PixelTrainConfig& config,
                                       const std::set<int>& required_classes) {
  using L = PixelFeatureLayout;
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "no training images");
  std::vector<PreparedImage> prepared(data.size());
  std::vector<std::size_t> class_totals(config.class_count, 0);
  std::size_t labelled_total = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& d = data[k];
    check_dims(d.image->width(), d.image->height(), d.supervision->width(),
               d.supervision->height(), "train_pixel_classifier");
    prepared[k].features = extract_pixel_features(*d.image, *d.superpixels);
    for (std::size_t i = 0; i < d.supervision->pixel_count(); ++i) {
      const std::uint8_t y = (*d.supervision)[i];
      if (y == kIgnore) continue;
      if (y >= config.class_count) {
        throw Error(ErrorKind::DegenerateData, "supervision class out of range");
      }
      prepared[k].by_class[y].push_back(static_cast<std::uint32_t>(i));
      ++class_totals[y];
      ++prepared[k].labelled;
    }
    labelled_total += prepared[k].labelled;
  }
  if (labelled_total == 0) throw Error(ErrorKind::NoLabeledPixels, "no labelled pixels");
  for (int c : required_classes) {
    if (c < 0 || c >= config.class_count || class_totals[c] == 0) {
      throw Error(ErrorKind::DegenerateData, "class " + std::to_string(c) + " has no pixels");
    }
  }

  SampleBatch batch;
  batch.dim = L::kDim;
  const bool sample_all = config.max_pixels_per_image <= 0;
  auto append = [&](const PreparedImage& img, std::uint32_t p, int label) {
    batch.add(std::span<const double>(img.features.data() + static_cast<std::size_t>(p) * L::kDim,
                                      L::kDim),
              label);
  };
  int built_epoch = -1;
  auto epoch_batch = [&](int epoch) -> const SampleBatch& {
    if (sample_all && built_epoch >= 0) return batch;
    if (epoch == built_epoch) return batch;
    built_epoch = epoch;
    batch.features.clear();
    batch.labels.clear();
    batch.weights.clear();
    Rng rng(derive_seed(config.seed, "pixel-sample", static_cast<std::uint64_t>(epoch)));
    for (const auto& img : prepared) {
      const std::size_t cap = static_cast<std::size_t>(config.max_pixels_per_image);
      const bool take_all = sample_all || img.labelled <= cap;
      for (const auto& [cls, pixels] : img.by_class) {
        if (take_all) {
          for (std::uint32_t p : pixels) append(img, p, cls);
          continue;
        }
        std::size_t quota = cap * pixels.size() / img.labelled;
        quota = std::clamp<std::size_t>(quota, 1, pixels.size());
        std::vector<std::uint32_t> pool(pixels);
        for (std::size_t i = 0; i < quota; ++i) {
          const std::size_t j = i + rng.below(pool.size() - i);
          std::swap(pool[i], pool[j]);
          append(img, pool[i], cls);
        }
      }
    }
    return batch;
  };

  PixelClassifier out{SoftmaxModel(L::kDim, config.hidden, config.class_count), {}};
  out.model.initialize(config.seed);
  out.training = fit(out.model, epoch_batch, config.optimizer, derive_seed(config.seed, "pixel-sgd"));
  return out;
}

ScalarRaster predict_pixel_proba(const ImageRaster& image, const SuperpixelMap& sp,
                                 const SoftmaxModel& model) {
  using L = PixelFeatureLayout;
  if (model.input_dim() != L::kDim) {
    throw Error(ErrorKind::DimensionMismatch, "model is not a pixel classifier");
  }
  const auto features = extract_pixel_features(image, sp);
  const int classes = model.classes();
  ScalarRaster out(image.width(), image.height(), 0.0f, classes);
  std::vector<double> p(classes);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    model.predict_proba(std::span<const double>(features.data() + i * L::kDim, L::kDim), p);
    for (int c = 0; c < classes; ++c) out[i * classes + c] = static_cast<float>(p[c]);
  }
  return out;
}

LabelRaster predict_mask(const ImageRaster& image, const SuperpixelMap& sp,
                         const SoftmaxModel& model, const PredictOptions& options) {
  ScalarRaster proba = predict_pixel_proba(image, sp, model);
  if (options.crf) proba = mean_field(proba, image, *options.crf);
  const int classes = proba.channels();
  std::vector<bool> allowed(classes, !options.allowed_classes.has_value());
  allowed[0] = true;
  if (options.allowed_classes) {
    for (int c : *options.allowed_classes) {
      if (c >= 0 && c < classes) allowed[c] = true;
    }
  }
  LabelRaster mask(image.width(), image.height());
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    int best = 0;
    for (int c = 1; c < classes; ++c) {
      if (allowed[c] && proba[i * classes + c] > proba[i * classes + best]) best = c;
    }
    mask[i] = static_cast<std::uint8_t>(best);
  }
  return mask;
}

}  // namespace mcof
