#include "mcof/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mcof/evaluation.hpp"
#include "mcof/parallel.hpp"

namespace fs = std::filesystem;

namespace mcof {

std::string_view to_string(LoopMode mode) {
  return mode == LoopMode::Mcof ? "mcof" : "direct";
}

LoopMode parse_loop_mode(std::string_view text) {
  if (text == "mcof") return LoopMode::Mcof;
  if (text == "direct" || text == "direct-iterative") return LoopMode::DirectIterative;
  throw Error(ErrorKind::Config, "unknown mode '" + std::string(text) + "' (mcof|direct)");
}

void LoopConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorKind::Config, "max_iterations must be >= 1");
  if (threads < 1) throw Error(ErrorKind::Config, "threads must be >= 1");
  if (!(early_stop_change >= 0.0 && early_stop_change <= 1.0)) {
    throw Error(ErrorKind::Config, "early_stop_change must be in [0, 1]");
  }
  if (bins.bins < 1 || bins.bins > 64) throw Error(ErrorKind::Config, "bins must be in [1, 64]");
  if (superpixel) superpixel->validate();
  if (crf) crf->validate();
  seeding.validate();
  for (const OptimizerConfig* o : {&region.optimizer, &pixel.optimizer}) {
    if (o->epochs < 1 || !(o->learning_rate > 0.0) || o->momentum < 0.0 || o->momentum >= 1.0 ||
        o->weight_decay < 0.0 || o->batch_size < 0) {
      throw Error(ErrorKind::Config, "invalid optimizer settings");
    }
  }
  if (region.hidden < 0 || pixel.hidden < 0) throw Error(ErrorKind::Config, "hidden must be >= 0");
  if (!(region.background_ratio > 0.0)) throw Error(ErrorKind::Config, "background_ratio must be > 0");
  if (pixel.max_pixels_per_image < 0) throw Error(ErrorKind::Config, "max_pixels must be >= 0");
}

// ---- config file ----------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& v) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = static_cast<T>(std::stod(v, &used));
      if (used != v.size() || !std::isfinite(out)) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw std::invalid_argument("not a number: " + v);
    }
  } else {
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      throw std::invalid_argument("not an integer: " + v);
    }
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("not a boolean: " + v);
}

using Setter = std::function<void(LoopConfig&, const std::string&)>;

const std::map<std::string, Setter>& config_setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto fh = [](LoopConfig& c) -> FhParams& {
      if (!c.superpixel) c.superpixel = FhParams{};
      return *c.superpixel;
    };
    auto crf = [](LoopConfig& c) -> CrfParams& {
      if (!c.crf) c.crf = CrfParams{};
      return *c.crf;
    };
    t["iterations"] = [](LoopConfig& c, const std::string& v) { c.max_iterations = parse_number<int>(v); };
    t["mode"] = [](LoopConfig& c, const std::string& v) { c.mode = parse_loop_mode(v); };
    t["use_saliency"] = [](LoopConfig& c, const std::string& v) { c.use_saliency = parse_bool(v); };
    t["seed"] = [](LoopConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v); };
    t["threads"] = [](LoopConfig& c, const std::string& v) { c.threads = parse_number<int>(v); };
    t["early_stop"] = [](LoopConfig& c, const std::string& v) { c.early_stop = parse_bool(v); };
    t["early_stop_change"] = [](LoopConfig& c, const std::string& v) { c.early_stop_change = parse_number<double>(v); };
    t["pixel_crf"] = [](LoopConfig& c, const std::string& v) { c.pixel_crf = parse_bool(v); };
    t["bins"] = [](LoopConfig& c, const std::string& v) { c.bins.bins = parse_number<int>(v); };
    t["fh.sigma"] = [fh](LoopConfig& c, const std::string& v) { fh(c).sigma = parse_number<double>(v); };
    t["fh.k"] = [fh](LoopConfig& c, const std::string& v) { fh(c).k = parse_number<double>(v); };
    t["fh.min_size"] = [fh](LoopConfig& c, const std::string& v) { fh(c).min_size = parse_number<int>(v); };
    t["seed.tau_fg"] = [](LoopConfig& c, const std::string& v) { c.seeding.tau_fg = parse_number<double>(v); };
    t["seed.tau_bg"] = [](LoopConfig& c, const std::string& v) { c.seeding.tau_bg = parse_number<double>(v); };
    t["seed.relative_fg"] = [](LoopConfig& c, const std::string& v) { c.seeding.relative_fg = parse_bool(v); };
    t["crf.iters"] = [crf](LoopConfig& c, const std::string& v) { crf(c).iterations = parse_number<int>(v); };
    t["crf.w_smooth"] = [crf](LoopConfig& c, const std::string& v) { crf(c).w_smooth = parse_number<double>(v); };
    t["crf.theta_gamma"] = [crf](LoopConfig& c, const std::string& v) { crf(c).theta_gamma = parse_number<double>(v); };
    t["crf.w_appear"] = [crf](LoopConfig& c, const std::string& v) { crf(c).w_appear = parse_number<double>(v); };
    t["crf.theta_alpha"] = [crf](LoopConfig& c, const std::string& v) { crf(c).theta_alpha = parse_number<double>(v); };
    t["crf.theta_beta"] = [crf](LoopConfig& c, const std::string& v) { crf(c).theta_beta = parse_number<double>(v); };
    for (const std::string prefix : {"region", "pixel"}) {
      auto opt = [prefix](LoopConfig& c) -> OptimizerConfig& {
        return prefix == "region" ? c.region.optimizer : c.pixel.optimizer;
      };
      t[prefix + ".epochs"] = [opt](LoopConfig& c, const std::string& v) { opt(c).epochs = parse_number<int>(v); };
      t[prefix + ".lr"] = [opt](LoopConfig& c, const std::string& v) { opt(c).learning_rate = parse_number<double>(v); };
      t[prefix + ".momentum"] = [opt](LoopConfig& c, const std::string& v) { opt(c).momentum = parse_number<double>(v); };
      t[prefix + ".decay"] = [opt](LoopConfig& c, const std::string& v) { opt(c).weight_decay = parse_number<double>(v); };
      t[prefix + ".batch"] = [opt](LoopConfig& c, const std::string& v) { opt(c).batch_size = parse_number<int>(v); };
    }
    t["region.hidden"] = [](LoopConfig& c, const std::string& v) { c.region.hidden = parse_number<int>(v); };
    t["region.bg_ratio"] = [](LoopConfig& c, const std::string& v) { c.region.background_ratio = parse_number<double>(v); };
    t["pixel.hidden"] = [](LoopConfig& c, const std::string& v) { c.pixel.hidden = parse_number<int>(v); };
    t["pixel.max_pixels"] = [](LoopConfig& c, const std::string& v) { c.pixel.max_pixels_per_image = parse_number<int>(v); };
    return t;
  }();
  return table;
}

}  // namespace

LoopConfig parse_loop_config(const std::string& text, LoopConfig base) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config, "line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(content).substr(0, eq));
    std::string value = trim(std::string_view(content).substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    const auto& setters = config_setters();
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw Error(ErrorKind::Config, "line " + std::to_string(number) + ": unknown key '" + key + "'");
    }
    try {
      it->second(base, value);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorKind::Config, "line " + std::to_string(number) + " (" + key + "): " + e.what());
    }
  }
  base.validate();
  return base;
}

LoopConfig load_loop_config(const fs::path& path, LoopConfig base) {
  const auto bytes = read_file(path);
  return parse_loop_config(std::string(bytes.begin(), bytes.end()), std::move(base));
}

std::string format_loop_config(const LoopConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "iterations = " << c.max_iterations << "\n"
      << "mode = " << to_string(c.mode) << "\n"
      << "use_saliency = " << (c.use_saliency ? "true" : "false") << "\n"
      << "seed = " << c.seed << "\n"
      << "early_stop = " << (c.early_stop ? "true" : "false") << "\n"
      << "early_stop_change = " << c.early_stop_change << "\n"
      << "pixel_crf = " << (c.pixel_crf ? "true" : "false") << "\n"
      << "bins = " << c.bins.bins << "\n";
  if (c.superpixel) {
    out << "fh.sigma = " << c.superpixel->sigma << "\nfh.k = " << c.superpixel->k
        << "\nfh.min_size = " << c.superpixel->min_size << "\n";
  }
  out << "seed.tau_fg = " << c.seeding.tau_fg << "\nseed.tau_bg = " << c.seeding.tau_bg
      << "\nseed.relative_fg = " << (c.seeding.relative_fg ? "true" : "false") << "\n";
  if (c.crf) {
    out << "crf.iters = " << c.crf->iterations << "\ncrf.w_smooth = " << c.crf->w_smooth
        << "\ncrf.theta_gamma = " << c.crf->theta_gamma << "\ncrf.w_appear = " << c.crf->w_appear
        << "\ncrf.theta_alpha = " << c.crf->theta_alpha << "\ncrf.theta_beta = " << c.crf->theta_beta
        << "\n";
  }
  const std::pair<const char*, const OptimizerConfig*> opts[] = {{"region", &c.region.optimizer},
                                                                 {"pixel", &c.pixel.optimizer}};
  for (const auto& [name, o] : opts) {
    out << name << ".epochs = " << o->epochs << "\n" << name << ".lr = " << o->learning_rate << "\n"
        << name << ".momentum = " << o->momentum << "\n" << name << ".decay = " << o->weight_decay
        << "\n" << name << ".batch = " << o->batch_size << "\n";
  }
  out << "region.hidden = " << c.region.hidden << "\nregion.bg_ratio = " << c.region.background_ratio
      << "\npixel.hidden = " << c.pixel.hidden << "\npixel.max_pixels = " << c.pixel.max_pixels_per_image
      << "\n";
  return out.str();
}

// ---- loop -------------------------------------------------------------------

PreparedDataset prepare_dataset(const Dataset& dataset, const LoopConfig& config) {
  PreparedDataset out;
  const std::size_t n = dataset.samples.size();
  out.superpixels.resize(n);
  out.region_features.resize(n);
  parallel_for(n, config.threads, [&](std::size_t i) {
    const ImageRaster& image = dataset.samples[i].image;
    const FhParams fh = config.superpixel.value_or(FhParams::defaults_for(image.width(), image.height()));
    out.superpixels[i] = segment(image, fh);
    out.region_features[i] = extract_features(image, out.superpixels[i]);
  });
  return out;
}

namespace {

CrfParams crf_for(const LoopConfig& config, const ImageRaster& image) {
  return config.crf.value_or(CrfParams::defaults_for(image.width(), image.height()));
}

void check_inputs(const Dataset& dataset, const LoopConfig& config) {
  if (dataset.samples.empty()) throw Error(ErrorKind::EmptyDataset, "dataset has no images");
  for (const Sample& s : dataset.samples) {
    if (s.labels.empty()) {
      throw Error(ErrorKind::Config, s.name + ": image has no object labels");
    }
    for (int c : s.labels) {
      if (c < 1 || c >= dataset.class_count) {
        throw Error(ErrorKind::Config, s.name + ": label " + std::to_string(c) +
                                           " outside [1, " + std::to_string(dataset.class_count) + ")");
      }
      if (!s.heatmaps.count(c)) {
        throw Error(ErrorKind::MissingHeatmap, s.name + ": no heatmap for class " + std::to_string(c));
      }
    }
    if (config.use_saliency && s.single_class() && !s.saliency) {
      throw Error(ErrorKind::Config, s.name + ": use_saliency is set but the image has no saliency map");
    }
  }
}

std::optional<double> dataset_miou(const Dataset& dataset, const std::vector<LabelRaster>& preds) {
  if (!dataset.has_ground_truth() || preds.size() != dataset.samples.size()) return std::nullopt;
  std::vector<LabelRaster> gts;
  gts.reserve(preds.size());
  for (const Sample& s : dataset.samples) gts.push_back(*s.ground_truth);
  return evaluate(preds, gts, dataset.class_count).miou;
}

std::vector<LabelRaster> render_all(const PreparedDataset& prepared,
                                    const std::vector<std::vector<int>>& labels,
                                    std::uint8_t unlabeled) {
  std::vector<LabelRaster> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out[i] = render_region_labels(prepared.superpixels[i], labels[i], unlabeled);
  }
  return out;
}

template <typename T, typename Fn>
std::vector<std::vector<int>> label_lists(const std::vector<T>& items, Fn&& get) {
  std::vector<std::vector<int>> out;
  out.reserve(items.size());
  for (const T& item : items) out.push_back(get(item));
  return out;
}

double mask_change(const std::vector<LabelRaster>& a, const std::vector<LabelRaster>& b) {
  std::uint64_t changed = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t p = 0; p < a[i].pixel_count(); ++p) changed += a[i][p] != b[i][p];
    total += a[i].pixel_count();
  }
  return total ? static_cast<double>(changed) / static_cast<double>(total) : 0.0;
}

std::vector<IterationState> run_impl(const Dataset& dataset, const LoopConfig& config,
                                     const IterationCallback& on_iteration,
                                     const PreparedDataset* prepared_in) {
  config.validate();
  check_inputs(dataset, config);
  PreparedDataset local;
  if (!prepared_in) local = prepare_dataset(dataset, config);
  const PreparedDataset& prepared = prepared_in ? *prepared_in : local;
  const std::size_t n = dataset.samples.size();
  if (prepared.superpixels.size() != n || prepared.region_features.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "prepared data does not match the dataset");
  }

  std::vector<IterationState> history;
  for (int t = 0; t < config.max_iterations; ++t) {
    IterationState state;
    state.t = t;
    const bool mine_regions = t == 0 || config.mode == LoopMode::Mcof;

    // S: heatmap seeds at t = 0, previous masks afterwards.
    state.seeds.resize(n);
    parallel_for(n, config.threads, [&](std::size_t i) {
      state.seeds[i] = t == 0 ? extract_seeds(prepared.superpixels[i], dataset.samples[i].heatmaps,
                                              config.seeding)
                              : seeds_from_mask(prepared.superpixels[i], history.back().masks[i]);
    });
    state.stage_log.push_back("seeds");

    std::vector<LabelRaster> supervision(n);
    if (mine_regions) {
      RegionTrainConfig rc = config.region;
      rc.class_count = dataset.class_count;
      rc.seed = derive_seed(config.seed, "region", static_cast<std::uint64_t>(t));
      RegionClassifier region = train_region_classifier(prepared.region_features, state.seeds, rc);
      state.stage_log.push_back("train-region");

      state.object_regions.resize(n);
      parallel_for(n, config.threads, [&](std::size_t i) {
        state.object_regions[i] = predict_regions(prepared.region_features[i], region.model,
                                                  dataset.samples[i].labels);
      });
      state.stage_log.push_back("predict-region");
      state.region_params = std::move(region.model);

      state.refined.resize(n);
      state.refinement_applied.assign(n, false);
      std::vector<char> applied(n, 0);
      const bool refine_now = t == 0 && config.use_saliency;
      parallel_for(n, config.threads, [&](std::size_t i) {
        const Sample& s = dataset.samples[i];
        RefinedObjectRegions& r = state.refined[i];
        if (refine_now && s.single_class()) {
          try {
            r = refine(s.image, prepared.superpixels[i], state.object_regions[i], *s.saliency,
                       *s.labels.begin(), crf_for(config, s.image), config.bins);
            applied[i] = 1;
            return;
          } catch (const Error& e) {
            // No object (or no background) region to fit likelihoods on: keep O.
            if (e.kind() != ErrorKind::EmptyPartition) throw;
          }
        }
        r.labels.labels = state.object_regions[i].labels;
        r.labels.source = SeedSource::FromMask;
      });
      for (std::size_t i = 0; i < n; ++i) state.refinement_applied[i] = applied[i] != 0;
      if (refine_now) state.stage_log.push_back("refine");
      for (std::size_t i = 0; i < n; ++i) {
        supervision[i] = render_region_labels(prepared.superpixels[i], state.refined[i].labels.labels);
      }
    } else {
      supervision = history.back().masks;
    }

    PixelTrainConfig pc = config.pixel;
    pc.class_count = dataset.class_count;
    pc.seed = derive_seed(config.seed, "pixel", static_cast<std::uint64_t>(t));
    std::vector<PixelTrainingImage> data(n);
    for (std::size_t i = 0; i < n; ++i) {
      data[i] = {&dataset.samples[i].image, &prepared.superpixels[i], &supervision[i]};
    }
    PixelClassifier pixel = train_pixel_classifier(data, pc);
    state.stage_log.push_back("train-pixel");

    state.masks.resize(n);
    parallel_for(n, config.threads, [&](std::size_t i) {
      const Sample& s = dataset.samples[i];
      PredictOptions options;
      options.allowed_classes = s.labels;
      if (config.pixel_crf) options.crf = crf_for(config, s.image);
      state.masks[i] = predict_mask(s.image, prepared.superpixels[i], pixel.model, options);
    });
    state.stage_log.push_back("predict-pixel");
    state.pixel_params = std::move(pixel.model);
    if (!history.empty()) state.mask_change = mask_change(history.back().masks, state.masks);

    if (dataset.has_ground_truth()) {
      // Unlabelled seed regions count as background.
      state.metrics.seeds = dataset_miou(
          dataset, render_all(prepared, label_lists(state.seeds, [](const RegionSeedSet& s) { return s.labels; }), 0));
      if (mine_regions) {
        state.metrics.regionnet = dataset_miou(
            dataset, render_all(prepared, label_lists(state.object_regions, [](const ObjectRegionSet& o) { return o.labels; }), 0));
        if (t == 0) state.metrics.refined = dataset_miou(dataset, supervision);
      }
      state.metrics.pixelnet = dataset_miou(dataset, state.masks);
    }

    const auto violations = closure_violations(dataset, prepared, state);
    if (!violations.empty()) {
      throw Error(ErrorKind::InvariantViolation,
                  "class closure broken at iteration " + std::to_string(t) + ": " + violations.front());
    }

    if (on_iteration) on_iteration(state);
    history.push_back(std::move(state));
    if (config.early_stop && history.back().mask_change &&
        *history.back().mask_change < config.early_stop_change) {
      break;
    }
  }
  return history;
}

}  // namespace

std::vector<IterationState> run_loop(const Dataset& dataset, const LoopConfig& config,
                                     const IterationCallback& on_iteration,
                                     const PreparedDataset* prepared) {
  return run_impl(dataset, config, on_iteration, prepared);
}

std::vector<IterationState> run_mcof(const Dataset& dataset, LoopConfig config,
                                     const IterationCallback& on_iteration,
                                     const PreparedDataset* prepared) {
  config.mode = LoopMode::Mcof;
  return run_impl(dataset, config, on_iteration, prepared);
}

std::vector<IterationState> run_direct_iterative(const Dataset& dataset, LoopConfig config,
                                                 const IterationCallback& on_iteration,
                                                 const PreparedDataset* prepared) {
  config.mode = LoopMode::DirectIterative;
  return run_impl(dataset, config, on_iteration, prepared);
}

std::vector<std::string> closure_violations(const Dataset& dataset, const PreparedDataset& prepared,
                                            const IterationState& state) {
  std::vector<std::string> out;
  auto allowed = [&](std::size_t i, int label) {
    return label == kUnlabeled || label == 0 || dataset.samples[i].labels.count(label) > 0;
  };
  auto check_regions = [&](const char* stage, std::size_t i, const std::vector<int>& labels) {
    int bad = 0;
    for (int l : labels) bad += !allowed(i, l);
    if (bad) {
      out.push_back(std::string(stage) + " " + dataset.samples[i].name + ": " +
                    std::to_string(bad) + " regions");
    }
  };
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    if (i < state.seeds.size()) check_regions("seeds", i, state.seeds[i].labels);
    if (i < state.object_regions.size()) check_regions("regions", i, state.object_regions[i].labels);
    if (i < state.refined.size()) check_regions("refined", i, state.refined[i].labels.labels);
    if (i < state.masks.size()) {
      std::uint64_t bad = 0;
      for (std::size_t p = 0; p < state.masks[i].pixel_count(); ++p) {
        const int l = state.masks[i][p];
        bad += l != kIgnore && !allowed(i, l);
      }
      if (bad) {
        out.push_back("masks " + dataset.samples[i].name + ": " + std::to_string(bad) + " pixels");
      }
    }
  }
  (void)prepared;
  return out;
}

// ---- checkpoints ------------------------------------------------------------

fs::path iteration_dir(const fs::path& out, int t) { return out / ("iter" + std::to_string(t)); }

namespace {

std::string fmt_miou(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void save_region_labels(const fs::path& path, const std::vector<int>& labels) {
  RegionSeedSet s;
  s.labels = labels;
  save_seeds_text(path, s);
}

ScalarRaster posteriors_raster(const ObjectRegionSet& o) {
  const int regions = static_cast<int>(o.labels.size());
  std::vector<float> values(o.posteriors.begin(), o.posteriors.end());
  return ScalarRaster(o.classes, regions, std::move(values));
}

std::string stage_metrics_csv(const StageMetrics& m) {
  std::string out = "stage,miou\n";
  const std::pair<const char*, const std::optional<double>*> rows[] = {
      {"seeds", &m.seeds}, {"regionnet", &m.regionnet}, {"refined", &m.refined}, {"pixelnet", &m.pixelnet}};
  for (const auto& [name, v] : rows) {
    if (*v) out += std::string(name) + "," + fmt_miou(**v) + "\n";
  }
  return out;
}

}  // namespace

void save_iteration(const fs::path& out, const Dataset& dataset, const IterationState& state) {
  const fs::path dir = iteration_dir(out, state.t);
  const std::size_t n = dataset.samples.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& name = dataset.samples[i].name;
    if (i < state.seeds.size()) save_seeds_text(dir / "seeds" / (name + ".txt"), state.seeds[i]);
    if (i < state.object_regions.size()) {
      const ObjectRegionSet& o = state.object_regions[i];
      save_region_labels(dir / "regions" / (name + ".txt"), o.labels);
      save_f32r(dir / "regions" / (name + "_posterior.f32r"), posteriors_raster(o));
    }
    if (i < state.refined.size()) {
      save_region_labels(dir / "refined" / (name + ".txt"), state.refined[i].labels.labels);
      if (i < state.refinement_applied.size() && state.refinement_applied[i]) {
        save_f32r(dir / "refined" / (name + "_posterior.f32r"), state.refined[i].posterior);
      }
    }
    if (i < state.masks.size()) save_label_png(dir / "masks" / (name + ".png"), state.masks[i]);
  }
  if (state.region_params) save_model(dir / "params" / "region.f32r", *state.region_params);
  save_model(dir / "params" / "pixel.f32r", state.pixel_params);
  std::string log;
  for (const auto& s : state.stage_log) log += s + "\n";
  write_text_atomic(dir / "stages.txt", log);
  write_text_atomic(dir / "metrics.csv", stage_metrics_csv(state.metrics));
}

IterationState load_iteration(const fs::path& out, int t, const Dataset& dataset,
                              const PreparedDataset& prepared) {
  const fs::path dir = iteration_dir(out, t);
  if (!fs::is_directory(dir)) throw Error(ErrorKind::MissingFile, dir.string() + " does not exist");
  IterationState state;
  state.t = t;
  const std::size_t n = dataset.samples.size();
  const bool has_regions = fs::exists(dir / "params" / "region.f32r");
  state.seeds.resize(n);
  state.masks.resize(n);
  if (has_regions) {
    state.object_regions.resize(n);
    state.refined.resize(n);
    state.refinement_applied.assign(n, false);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& name = dataset.samples[i].name;
    const int regions = prepared.superpixels[i].region_count();
    state.seeds[i] = load_seeds_text(dir / "seeds" / (name + ".txt"), regions);
    state.seeds[i].source = t == 0 ? SeedSource::Initial : SeedSource::FromMask;
    if (has_regions) {
      ObjectRegionSet& o = state.object_regions[i];
      o.labels = load_seeds_text(dir / "regions" / (name + ".txt"), regions).labels;
      const ScalarRaster post = load_scalar_raster(dir / "regions" / (name + "_posterior.f32r"), false);
      if (post.height() != regions) {
        throw Error(ErrorKind::DimensionMismatch, name + ": posterior rows do not match regions");
      }
      o.classes = post.width();
      o.posteriors.assign(post.values().begin(), post.values().end());
      RefinedObjectRegions& r = state.refined[i];
      r.labels = load_seeds_text(dir / "refined" / (name + ".txt"), regions);
      r.labels.source = SeedSource::FromMask;
      const fs::path posterior = dir / "refined" / (name + "_posterior.f32r");
      if (fs::exists(posterior)) {
        r.posterior = load_scalar_raster(posterior);
        state.refinement_applied[i] = true;
      }
    }
    state.masks[i] = load_label_png(dir / "masks" / (name + ".png"), dataset.class_count);
  }
  if (has_regions) state.region_params = load_model(dir / "params" / "region.f32r");
  state.pixel_params = load_model(dir / "params" / "pixel.f32r");

  const auto log = read_file(dir / "stages.txt");
  std::istringstream in(std::string(log.begin(), log.end()));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) state.stage_log.push_back(line);
  }
  const auto metrics = read_file(dir / "metrics.csv");
  std::istringstream min(std::string(metrics.begin(), metrics.end()));
  std::string line;
  std::getline(min, line);
  while (std::getline(min, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    const std::string stage = line.substr(0, comma);
    const double v = std::stod(line.substr(comma + 1));
    if (stage == "seeds") state.metrics.seeds = v;
    else if (stage == "regionnet") state.metrics.regionnet = v;
    else if (stage == "refined") state.metrics.refined = v;
    else if (stage == "pixelnet") state.metrics.pixelnet = v;
  }
  return state;
}

// ---- report -----------------------------------------------------------------

IterationReport iteration_report(const std::vector<IterationState>& history, bool has_ground_truth) {
  IterationReport report;
  report.missing_ground_truth = !has_ground_truth;
  if (!has_ground_truth) return report;
  std::optional<double> previous;
  for (const IterationState& s : history) {
    const std::pair<const char*, const std::optional<double>*> stages[] = {
        {"seeds", &s.metrics.seeds},
        {"regionnet", &s.metrics.regionnet},
        {"refined", &s.metrics.refined},
        {"pixelnet", &s.metrics.pixelnet}};
    for (const auto& [name, v] : stages) {
      if (*v) report.rows.push_back({s.t, name, **v});
    }
    if (s.metrics.pixelnet) {
      const double v = *s.metrics.pixelnet;
      if (previous && v < *previous - kMonotoneTolerance) report.pixelnet_monotone = false;
      previous = v;
    }
  }
  return report;
}

std::string format_report_csv(const IterationReport& report) {
  std::string out = "iteration,stage,miou\n";
  for (const auto& row : report.rows) {
    out += std::to_string(row.iteration) + "," + row.stage + "," + fmt_miou(row.miou) + "\n";
  }
  return out;
}

IterationReport emit_iteration_report(const fs::path& out, const Dataset& dataset,
                                      const std::vector<IterationState>& history) {
  for (const IterationState& s : history) {
    for (std::size_t i = 0; i < s.masks.size() && i < dataset.samples.size(); ++i) {
      save_image_png(iteration_dir(out, s.t) / "overlays" / (dataset.samples[i].name + ".png"),
                     render_overlay(dataset.samples[i].image, s.masks[i]));
    }
  }
  IterationReport report = iteration_report(history, dataset.has_ground_truth());
  if (!report.missing_ground_truth) write_text_atomic(out / "metrics.csv", format_report_csv(report));
  return report;
}

}  // namespace mcof
