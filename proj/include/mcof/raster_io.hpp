#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcof/raster.hpp"

namespace mcof {

namespace fs = std::filesystem;

// PNG codec (libpng). Images are decoded to 8-bit RGB; gray, gray+alpha and
// RGBA inputs are converted, 16-bit inputs are rejected.
ImageRaster load_image_png(const fs::path& path);
void save_image_png(const fs::path& path, const ImageRaster& image);

// Labels are read from 8-bit gray or palette PNGs; the stored sample (or
// palette index) is the class id. With class_count > 0, values in
// [class_count, 255) are a FormatError.
LabelRaster load_label_png(const fs::path& path, int class_count = 0);
// Writes an indexed PNG whose palette is the VOC color map.
void save_label_png(const fs::path& path, const LabelRaster& labels);

// In-memory variants used by the file functions and by tests.
ImageRaster decode_image_png(const std::vector<std::uint8_t>& bytes);
LabelRaster decode_label_png(const std::vector<std::uint8_t>& bytes, int class_count = 0);
std::vector<std::uint8_t> encode_image_png(const ImageRaster& image);
std::vector<std::uint8_t> encode_label_png(const LabelRaster& labels);

// F32R container: "F32R", u32le width, u32le height, u32le channels, then
// width*height*channels float32le values.
std::vector<std::uint8_t> encode_f32r(const ScalarRaster& raster);
ScalarRaster decode_f32r(const std::vector<std::uint8_t>& bytes);
void save_f32r(const fs::path& path, const ScalarRaster& raster);

// Loads F32R, or an 8-bit gray PNG scaled by 1/255. Probability rasters are
// clamped into [0, 1].
ScalarRaster load_scalar_raster(const fs::path& path, bool probability = true);

using Palette = std::array<Rgb, 256>;
const Palette& voc_palette();

struct ManifestEntry {
  fs::path image;
  std::vector<int> labels;  // sorted, unique, each in [1, C)
  std::vector<fs::path> heatmaps;  // aligned with labels
  std::optional<fs::path> saliency;
  std::optional<fs::path> ground_truth;
  int line = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int class_count = kDefaultClassCount;
};

// Parses the pipe-separated manifest format. Relative paths are resolved
// against the manifest's directory. A "# classes: N" comment sets the class
// count unless class_count_override > 0. Every referenced file must exist;
// all missing paths are reported together.
DatasetManifest load_manifest(const fs::path& path, int class_count_override = 0);
DatasetManifest parse_manifest(const std::string& text, const fs::path& base_dir,
                               int class_count_override = 0, bool check_files = true);
std::string format_manifest(const DatasetManifest& manifest, const fs::path& base_dir);

std::vector<std::uint8_t> read_file(const fs::path& path);
// Writes through a temporary file and renames it into place.
void write_file_atomic(const fs::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const fs::path& path, const std::string& text);

}  // namespace mcof
