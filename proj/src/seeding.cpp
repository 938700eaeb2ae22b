#include "mcof/seeding.hpp"

#include <algorithm>
#include <sstream>

#include "mcof/raster_io.hpp"

namespace mcof {

int RegionSeedSet::labeled_count() const {
  return static_cast<int>(
      std::count_if(labels.begin(), labels.end(), [](int l) { return l != kUnlabeled; }));
}

void SeedParams::validate() const {
  if (!(tau_fg > 0.0 && tau_fg < 1.0) || !(tau_bg > 0.0 && tau_bg < 1.0)) {
    throw Error(ErrorKind::Config, "seed thresholds must lie in (0, 1)");
  }
  if (!(tau_bg < tau_fg)) throw Error(ErrorKind::Config, "tau_bg must be below tau_fg");
}

RegionSeedSet seeds_from_region_scores(const SuperpixelMap& sp,
                                       const std::map<int, std::vector<double>>& scores,
                                       const SeedParams& params) {
  params.validate();
  const int n = sp.region_count();
  RegionSeedSet seeds;
  seeds.source = SeedSource::Initial;
  seeds.labels.assign(n, kUnlabeled);

  std::vector<int> claim(n, kUnlabeled);
  std::vector<double> claim_score(n, 0.0);
  std::vector<double> max_score(n, 0.0);

  // std::map iterates in increasing class id, so a strict > keeps the lower
  // id on equal averages.
  for (const auto& [cls, h] : scores) {
    if (static_cast<int>(h.size()) != n) {
      throw Error(ErrorKind::DimensionMismatch, "region score vector length mismatch");
    }
    const double peak = *std::max_element(h.begin(), h.end());
    const bool has_threshold = !params.relative_fg || peak > 0.0;
    const double fg = params.relative_fg ? params.tau_fg * peak : params.tau_fg;
    for (int r = 0; r < n; ++r) {
      max_score[r] = std::max(max_score[r], h[r]);
      const auto& nb = sp.neighbors(r);
      const bool local_max =
          nb.empty() ? h[r] > 0.0
                     : std::all_of(nb.begin(), nb.end(), [&](int q) { return h[r] > h[q]; });
      const bool above = has_threshold && h[r] >= fg;
      if (!(local_max || above)) continue;
      if (claim[r] == kUnlabeled || h[r] > claim_score[r]) {
        claim[r] = cls;
        claim_score[r] = h[r];
      }
    }
  }
  for (int r = 0; r < n; ++r) {
    if (claim[r] != kUnlabeled) {
      seeds.labels[r] = claim[r];
    } else if (max_score[r] <= params.tau_bg) {
      seeds.labels[r] = 0;
    }
  }
  return seeds;
}

RegionSeedSet extract_seeds(const SuperpixelMap& sp, const HeatmapSet& heatmaps,
                            const SeedParams& params) {
  if (heatmaps.empty()) throw Error(ErrorKind::MissingHeatmap, "no heatmaps supplied");
  std::map<int, std::vector<double>> scores;
  for (const auto& [cls, heat] : heatmaps) {
    if (cls < 1) throw Error(ErrorKind::MissingHeatmap, "heatmap keyed by non-object class");
    scores[cls] = average_raster_per_region(sp, heat);
  }
  return seeds_from_region_scores(sp, scores, params);
}

RegionSeedSet seeds_from_mask(const SuperpixelMap& sp, const LabelRaster& mask) {
  check_dims(sp.width(), sp.height(), mask.width(), mask.height(), "seeds_from_mask");
  RegionSeedSet seeds;
  seeds.source = SeedSource::FromMask;
  seeds.labels.assign(sp.region_count(), kUnlabeled);
  std::vector<int> counts(256);
  for (int r = 0; r < sp.region_count(); ++r) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::uint32_t p : sp.pixels(r)) {
      if (mask[p] != kIgnore) ++counts[mask[p]];
    }
    int best = kUnlabeled, best_count = 0;
    for (int c = 0; c < 255; ++c) {
      if (counts[c] > best_count) {
        best = c;
        best_count = counts[c];
      }
    }
    seeds.labels[r] = best;
  }
  return seeds;
}

LabelRaster render_region_labels(const SuperpixelMap& sp, const std::vector<int>& labels,
                                 std::uint8_t unlabeled_value) {
  if (static_cast<int>(labels.size()) != sp.region_count()) {
    throw Error(ErrorKind::DimensionMismatch, "region label count mismatch");
  }
  LabelRaster out(sp.width(), sp.height());
  for (int r = 0; r < sp.region_count(); ++r) {
    const std::uint8_t v =
        labels[r] == kUnlabeled ? unlabeled_value : static_cast<std::uint8_t>(labels[r]);
    for (std::uint32_t p : sp.pixels(r)) out[p] = v;
  }
  return out;
}

void save_seeds_text(const std::filesystem::path& path, const RegionSeedSet& seeds) {
  std::ostringstream out;
  for (std::size_t r = 0; r < seeds.labels.size(); ++r) out << r << ' ' << seeds.labels[r] << '\n';
  write_text_atomic(path, out.str());
}

RegionSeedSet load_seeds_text(const std::filesystem::path& path, int region_count) {
  const auto bytes = read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  RegionSeedSet seeds;
  seeds.labels.assign(region_count, kUnlabeled);
  std::vector<bool> seen(region_count, false);
  int r = 0, label = 0, line = 0;
  while (in >> r >> label) {
    ++line;
    if (r < 0 || r >= region_count || seen[r] || label < kUnlabeled || label > 254) {
      throw Error(ErrorKind::Parse, path.string() + ": bad seed entry on line " +
                                        std::to_string(line));
    }
    seen[r] = true;
    seeds.labels[r] = label;
  }
  if (!in.eof()) throw Error(ErrorKind::Parse, path.string() + ": malformed seed file");
  if (line != region_count) {
    throw Error(ErrorKind::Parse, path.string() + ": " + std::to_string(line) + " seed entries for " +
                                      std::to_string(region_count) + " regions");
  }
  return seeds;
}

}  // namespace mcof
