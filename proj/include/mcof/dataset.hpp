#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcof/raster.hpp"
#include "mcof/raster_io.hpp"
#include "mcof/seeding.hpp"

namespace mcof {

// One weakly labelled training image with everything the pipeline reads.
struct Sample {
  std::string name;
  ImageRaster image;
  std::set<int> labels;  // image-level object classes
  HeatmapSet heatmaps;   // one per label
  std::optional<ScalarRaster> saliency;
  std::optional<LabelRaster> ground_truth;

  bool single_class() const { return labels.size() == 1; }
};

struct Dataset {
  std::vector<Sample> samples;
  int class_count = kDefaultClassCount;

  bool has_ground_truth() const;
  // Union of image-level labels plus background.
  std::set<int> present_classes() const;
};

// Loads every raster referenced by the manifest and checks dimensions.
Dataset load_dataset(const DatasetManifest& manifest, int threads = 1);

// Writes images/, gt/, heatmaps/, saliency/ and manifest.txt under `dir`.
DatasetManifest write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace mcof
