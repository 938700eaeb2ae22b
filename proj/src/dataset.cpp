#include "mcof/dataset.hpp"

#include <algorithm>
#include <map>

#include "mcof/parallel.hpp"

namespace mcof {

bool Dataset::has_ground_truth() const {
  return !samples.empty() && std::all_of(samples.begin(), samples.end(),
                                         [](const Sample& s) { return s.ground_truth.has_value(); });
}

std::set<int> Dataset::present_classes() const {
  std::set<int> out{0};
  for (const auto& s : samples) out.insert(s.labels.begin(), s.labels.end());
  return out;
}

Dataset load_dataset(const DatasetManifest& manifest, int threads) {
  if (manifest.entries.empty()) throw Error(ErrorKind::EmptyDataset, "manifest has no entries");
  Dataset dataset;
  dataset.class_count = manifest.class_count;
  dataset.samples.resize(manifest.entries.size());

  std::map<std::string, int> seen;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    std::string name = manifest.entries[i].image.stem().string();
    const int dup = seen[name]++;
    if (dup > 0) name += "_" + std::to_string(dup);
    dataset.samples[i].name = name;
  }

  parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    Sample& s = dataset.samples[i];
    s.image = load_image_png(e.image);
    const int w = s.image.width(), h = s.image.height();
    for (std::size_t k = 0; k < e.labels.size(); ++k) {
      ScalarRaster heat = load_scalar_raster(e.heatmaps[k]);
      check_dims(w, h, heat.width(), heat.height(), e.heatmaps[k].string());
      s.labels.insert(e.labels[k]);
      s.heatmaps.emplace(e.labels[k], std::move(heat));
    }
    if (e.saliency) {
      s.saliency = load_scalar_raster(*e.saliency);
      check_dims(w, h, s.saliency->width(), s.saliency->height(), e.saliency->string());
    }
    if (e.ground_truth) {
      s.ground_truth = load_label_png(*e.ground_truth, manifest.class_count);
      check_dims(w, h, s.ground_truth->width(), s.ground_truth->height(),
                 e.ground_truth->string());
    }
  });
  return dataset;
}

DatasetManifest write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  DatasetManifest manifest;
  manifest.class_count = dataset.class_count;
  for (const auto& s : dataset.samples) {
    ManifestEntry e;
    e.image = dir / "images" / (s.name + ".png");
    save_image_png(e.image, s.image);
    for (const auto& [cls, heat] : s.heatmaps) {
      e.labels.push_back(cls);
      e.heatmaps.push_back(dir / "heatmaps" / (s.name + "_c" + std::to_string(cls) + ".f32r"));
      save_f32r(e.heatmaps.back(), heat);
    }
    if (s.saliency) {
      e.saliency = dir / "saliency" / (s.name + ".f32r");
      save_f32r(*e.saliency, *s.saliency);
    }
    if (s.ground_truth) {
      e.ground_truth = dir / "gt" / (s.name + ".png");
      save_label_png(*e.ground_truth, *s.ground_truth);
    }
    manifest.entries.push_back(std::move(e));
  }
  write_text_atomic(dir / "manifest.txt", format_manifest(manifest, dir));
  return manifest;
}

}  // namespace mcof
