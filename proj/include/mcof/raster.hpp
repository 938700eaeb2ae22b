#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcof/error.hpp"

namespace mcof {

inline constexpr std::uint8_t kIgnore = 255;
inline constexpr int kDefaultClassCount = 21;

// Row-major, channel-interleaved storage shared by the concrete raster types.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, int channels, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    validate_shape(width, height, channels);
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }
  Grid(int width, int height, int channels, std::vector<T> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    validate_shape(width, height, channels);
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
      throw Error(ErrorKind::Format, "raster payload size does not match " + std::to_string(width) +
                                         "x" + std::to_string(height) + "x" +
                                         std::to_string(channels));
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool same_shape(const Grid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 protected:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

 private:
  static void validate_shape(int width, int height, int channels) {
    if (width < 1 || height < 1 || channels < 1) {
      throw Error(ErrorKind::Format, "raster dimensions must be positive");
    }
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// 8-bit RGB image.
class ImageRaster : public Grid<std::uint8_t> {
 public:
  ImageRaster() = default;
  ImageRaster(int width, int height, Rgb fill = {}) : Grid(width, height, 3) {
    for (std::size_t i = 0; i < pixel_count(); ++i) set(i, fill);
  }
  ImageRaster(int width, int height, std::vector<std::uint8_t> rgb)
      : Grid(width, height, 3, std::move(rgb)) {}

  Rgb pixel(std::size_t i) const {
    const auto d = data();
    return {d[3 * i], d[3 * i + 1], d[3 * i + 2]};
  }
  Rgb pixel(int x, int y) const { return pixel(static_cast<std::size_t>(y) * width() + x); }
  void set(std::size_t i, Rgb c) {
    auto d = data();
    d[3 * i] = c.r;
    d[3 * i + 1] = c.g;
    d[3 * i + 2] = c.b;
  }
  void set(int x, int y, Rgb c) { set(static_cast<std::size_t>(y) * width() + x, c); }
};

// Per-pixel class ids in [0, C) or kIgnore.
class LabelRaster : public Grid<std::uint8_t> {
 public:
  LabelRaster() = default;
  LabelRaster(int width, int height, std::uint8_t fill = 0) : Grid(width, height, 1, fill) {}
  LabelRaster(int width, int height, std::vector<std::uint8_t> labels)
      : Grid(width, height, 1, std::move(labels)) {}

  // Throws FormatError when a value lies in [class_count, 255).
  void validate(int class_count) const;
};

// Float raster; single channel for heatmaps/saliency/posteriors, L channels for
// per-pixel distributions.
class ScalarRaster : public Grid<float> {
 public:
  ScalarRaster() = default;
  ScalarRaster(int width, int height, float fill = 0.0f, int channels = 1)
      : Grid(width, height, channels, fill) {}
  ScalarRaster(int width, int height, std::vector<float> values, int channels = 1)
      : Grid(width, height, channels, std::move(values)) {}

  // Replaces NaN with 0 and clamps into [0, 1].
  void clamp_probability();
  bool is_probability() const;
};

}  // namespace mcof
