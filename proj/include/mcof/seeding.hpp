#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include "mcof/raster.hpp"
#include "mcof/superpixel.hpp"

namespace mcof {

inline constexpr int kUnlabeled = -1;

enum class SeedSource { Initial, FromMask };

// One label per superpixel region: a class id or kUnlabeled.
struct RegionSeedSet {
  std::vector<int> labels;
  SeedSource source = SeedSource::Initial;

  int labeled_count() const;
  friend bool operator==(const RegionSeedSet&, const RegionSeedSet&) = default;
};

struct SeedParams {
  double tau_fg = 0.7;
  double tau_bg = 0.3;
  // When set, the foreground threshold is tau_fg times the class's largest
  // region average instead of an absolute value.
  bool relative_fg = true;

  void validate() const;
};

// Heatmaps keyed by object class id.
using HeatmapSet = std::map<int, ScalarRaster>;

// Seeds from region-averaged heatmaps. A region is a candidate for class c
// when its average is a strict local maximum over its neighbours or reaches
// the foreground threshold; conflicts go to the higher average (lower id on
// ties). Unclaimed regions become background when every class average is at
// most tau_bg, otherwise stay unlabeled.
RegionSeedSet extract_seeds(const SuperpixelMap& sp, const HeatmapSet& heatmaps,
                            const SeedParams& params);

// Same rule applied to precomputed per-region averages (class -> averages).
RegionSeedSet seeds_from_region_scores(const SuperpixelMap& sp,
                                       const std::map<int, std::vector<double>>& scores,
                                       const SeedParams& params);

// Majority class of the mask inside each region, IGNORE excluded, ties to
// the lower id; all-IGNORE regions are unlabeled.
RegionSeedSet seeds_from_mask(const SuperpixelMap& sp, const LabelRaster& mask);

// Paints region labels onto pixels. Unlabeled regions get `unlabeled_value`.
LabelRaster render_region_labels(const SuperpixelMap& sp, const std::vector<int>& labels,
                                 std::uint8_t unlabeled_value = kIgnore);

void save_seeds_text(const std::filesystem::path& path, const RegionSeedSet& seeds);
RegionSeedSet load_seeds_text(const std::filesystem::path& path, int region_count);

}  // namespace mcof
