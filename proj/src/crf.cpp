#include "mcof/crf.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mcof {

void CrfParams::validate() const {
  if (iterations < 0) throw Error(ErrorKind::Config, "CRF iterations must be >= 0");
  if (!(w_smooth >= 0.0) || !(w_appear >= 0.0)) {
    throw Error(ErrorKind::Config, "CRF kernel weights must be non-negative");
  }
  if (!(theta_gamma > 0.0) || !(theta_alpha > 0.0) || !(theta_beta > 0.0)) {
    throw Error(ErrorKind::Config, "CRF kernel widths must be positive");
  }
}

CrfParams CrfParams::defaults_for(int width, int height) {
  CrfParams p;
  const int side = std::max(width, height);
  if (side < 240) p.theta_alpha = std::max(1.0, side / 8.0);
  return p;
}

namespace {

constexpr double kUnaryFloor = 1e-12;

std::vector<double> gaussian_table(std::size_t size, double theta) {
  std::vector<double> t(size);
  const double inv = 1.0 / (2.0 * theta * theta);
  for (std::size_t d2 = 0; d2 < size; ++d2) t[d2] = std::exp(-static_cast<double>(d2) * inv);
  return t;
}

// Marginals in double precision, pixel-major.
std::vector<double> run_mean_field(const ScalarRaster& unary, const ImageRaster& image,
                                   const CrfParams& params) {
  params.validate();
  check_dims(unary.width(), unary.height(), image.width(), image.height(), "mean_field");
  const int labels = unary.channels();
  if (labels < 2) throw Error(ErrorKind::DimensionMismatch, "mean_field needs at least 2 labels");
  const std::size_t n = image.pixel_count();
  if (params.iterations == 0) {
    return std::vector<double>(unary.values().begin(), unary.values().end());
  }
  if (n > kCrfMaxPixels) {
    throw Error(ErrorKind::Config, "exact CRF inference is limited to 128x128 images");
  }
  const int w = image.width(), h = image.height();

  std::vector<double> log_unary(n * labels);
  for (std::size_t i = 0; i < n * labels; ++i) {
    log_unary[i] = std::log(std::max(static_cast<double>(unary[i]), kUnaryFloor));
  }

  const std::size_t max_d2 = static_cast<std::size_t>((w - 1) * (w - 1) + (h - 1) * (h - 1)) + 1;
  const auto smooth = gaussian_table(max_d2, params.theta_gamma);
  const auto spatial = gaussian_table(max_d2, params.theta_alpha);
  const auto range = gaussian_table(3 * 255 * 255 + 1, params.theta_beta);

  std::vector<double> q(n * labels);
  for (std::size_t i = 0; i < n * labels; ++i) q[i] = unary[i];
  std::vector<double> msg(n * labels);
  const auto rgb = image.data();

  for (int it = 0; it < params.iterations; ++it) {
    std::fill(msg.begin(), msg.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const int xi = static_cast<int>(i % w), yi = static_cast<int>(i / w);
      const int ri = rgb[3 * i], gi = rgb[3 * i + 1], bi = rgb[3 * i + 2];
      double* mi = msg.data() + i * labels;
      const double* qi = q.data() + i * labels;
      for (std::size_t j = i + 1; j < n; ++j) {
        const int dx = static_cast<int>(j % w) - xi, dy = static_cast<int>(j / w) - yi;
        const std::size_t d2 = static_cast<std::size_t>(dx * dx + dy * dy);
        const int dr = rgb[3 * j] - ri, dg = rgb[3 * j + 1] - gi, db = rgb[3 * j + 2] - bi;
        const std::size_t c2 = static_cast<std::size_t>(dr * dr + dg * dg + db * db);
        const double k = params.w_smooth * smooth[d2] + params.w_appear * spatial[d2] * range[c2];
        double* mj = msg.data() + j * labels;
        const double* qj = q.data() + j * labels;
        for (int l = 0; l < labels; ++l) {
          mi[l] += k * qj[l];
          mj[l] += k * qi[l];
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double* mi = msg.data() + i * labels;
      double total = 0.0;
      for (int l = 0; l < labels; ++l) total += mi[l];
      double* qi = q.data() + i * labels;
      double peak = -INFINITY;
      for (int l = 0; l < labels; ++l) {
        qi[l] = log_unary[i * labels + l] - (total - mi[l]);
        peak = std::max(peak, qi[l]);
      }
      double sum = 0.0;
      for (int l = 0; l < labels; ++l) {
        qi[l] = std::exp(qi[l] - peak);
        sum += qi[l];
      }
      for (int l = 0; l < labels; ++l) qi[l] /= sum;
    }
  }

  return q;
}

}  // namespace

ScalarRaster mean_field(const ScalarRaster& unary, const ImageRaster& image,
                        const CrfParams& params) {
  if (params.iterations == 0) {
    params.validate();
    check_dims(unary.width(), unary.height(), image.width(), image.height(), "mean_field");
    if (unary.channels() < 2) {
      throw Error(ErrorKind::DimensionMismatch, "mean_field needs at least 2 labels");
    }
    return unary;
  }
  const auto q = run_mean_field(unary, image, params);
  std::vector<float> out(q.begin(), q.end());
  return ScalarRaster(unary.width(), unary.height(), std::move(out), unary.channels());
}

LabelRaster binarize(const ScalarRaster& prob, const ImageRaster& image, const CrfParams& params) {
  check_dims(prob.width(), prob.height(), image.width(), image.height(), "binarize");
  const std::size_t n = prob.pixel_count();
  std::vector<float> unary(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const float p = std::clamp(prob[i], 0.0f, 1.0f);
    unary[2 * i] = 1.0f - p;
    unary[2 * i + 1] = p;
  }
  const auto q =
      run_mean_field(ScalarRaster(prob.width(), prob.height(), std::move(unary), 2), image, params);
  LabelRaster out(prob.width(), prob.height());
  for (std::size_t i = 0; i < n; ++i) out[i] = q[2 * i + 1] > q[2 * i] ? 1 : 0;
  return out;
}

}  // namespace mcof
