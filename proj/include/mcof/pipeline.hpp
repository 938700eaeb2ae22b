#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mcof/crf.hpp"
#include "mcof/dataset.hpp"
#include "mcof/pixel_model.hpp"
#include "mcof/region_model.hpp"
#include "mcof/saliency.hpp"
#include "mcof/seeding.hpp"
#include "mcof/superpixel.hpp"

namespace mcof {

enum class LoopMode { Mcof, DirectIterative };

std::string_view to_string(LoopMode mode);
LoopMode parse_loop_mode(std::string_view text);

struct LoopConfig {
  int max_iterations = 5;
  bool use_saliency = true;
  LoopMode mode = LoopMode::Mcof;
  // Per-image defaults (FhParams::defaults_for, CrfParams::defaults_for) when unset.
  std::optional<FhParams> superpixel;
  std::optional<CrfParams> crf;
  SeedParams seeding;
  RegionTrainConfig region;
  PixelTrainConfig pixel;
  LabBins bins;
  // Run the CRF on PixelNet output before taking the argmax.
  bool pixel_crf = false;
  // Stop once fewer than early_stop_change of the pixels changed label
  // between consecutive mask sets.
  bool early_stop = false;
  double early_stop_change = 0.01;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

// Reads "key = value" lines ('#' comments) on top of `base`. Unknown keys
// and malformed values raise ConfigError with the line number.
LoopConfig parse_loop_config(const std::string& text, LoopConfig base = {});
LoopConfig load_loop_config(const std::filesystem::path& path, LoopConfig base = {});
std::string format_loop_config(const LoopConfig& config);

// Train-set mIoU of each stage; unset when there is no ground truth or the
// stage did not run.
struct StageMetrics {
  std::optional<double> seeds;
  std::optional<double> regionnet;
  std::optional<double> refined;
  std::optional<double> pixelnet;
};

struct IterationState {
  int t = 0;
  std::vector<RegionSeedSet> seeds;
  // Empty when the iteration skipped region mining (direct mode, t >= 1).
  std::vector<ObjectRegionSet> object_regions;
  std::vector<RefinedObjectRegions> refined;
  std::vector<bool> refinement_applied;
  std::vector<LabelRaster> masks;
  std::optional<SoftmaxModel> region_params;
  SoftmaxModel pixel_params;
  StageMetrics metrics;
  // Stages in execution order, e.g. "seeds", "train-region", "refine".
  std::vector<std::string> stage_log;
  // Fraction of pixels whose mask label changed since the previous iteration.
  std::optional<double> mask_change;
};

// Superpixels and region descriptors; computed once per dataset.
struct PreparedDataset {
  std::vector<SuperpixelMap> superpixels;
  std::vector<std::vector<RegionFeature>> region_features;
};

PreparedDataset prepare_dataset(const Dataset& dataset, const LoopConfig& config);

using IterationCallback = std::function<void(const IterationState&)>;

// Runs the iterative loop in config.mode. `on_iteration` sees every state as
// soon as it is complete (used for checkpointing).
std::vector<IterationState> run_loop(const Dataset& dataset, const LoopConfig& config,
                                     const IterationCallback& on_iteration = {},
                                     const PreparedDataset* prepared = nullptr);
std::vector<IterationState> run_mcof(const Dataset& dataset, LoopConfig config,
                                     const IterationCallback& on_iteration = {},
                                     const PreparedDataset* prepared = nullptr);
std::vector<IterationState> run_direct_iterative(const Dataset& dataset, LoopConfig config,
                                                 const IterationCallback& on_iteration = {},
                                                 const PreparedDataset* prepared = nullptr);

// Every region or pixel carrying an object class outside the image's label
// set, one line per offending artifact. Empty when the invariant holds.
std::vector<std::string> closure_violations(const Dataset& dataset, const PreparedDataset& prepared,
                                            const IterationState& state);

// out/iterN/{seeds,regions,refined,masks,params,metrics.csv}
std::filesystem::path iteration_dir(const std::filesystem::path& out, int t);
void save_iteration(const std::filesystem::path& out, const Dataset& dataset,
                    const IterationState& state);
IterationState load_iteration(const std::filesystem::path& out, int t, const Dataset& dataset,
                              const PreparedDataset& prepared);

struct IterationReport {
  struct Row {
    int iteration;
    std::string stage;
    double miou;
  };
  std::vector<Row> rows;
  bool pixelnet_monotone = true;
  // Set when the dataset lacks ground truth; rows are then empty.
  bool missing_ground_truth = false;
};

// Tolerated dip when judging the pixelnet column monotone.
inline constexpr double kMonotoneTolerance = 0.02;

IterationReport iteration_report(const std::vector<IterationState>& history, bool has_ground_truth);
std::string format_report_csv(const IterationReport& report);
// Writes out/metrics.csv and out/iterN/overlays/<name>.png for every
// iteration. Overlays are written even without ground truth.
IterationReport emit_iteration_report(const std::filesystem::path& out, const Dataset& dataset,
                                      const std::vector<IterationState>& history);

}  // namespace mcof
