// mcof command-line driver.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcof/crf.hpp"
#include "mcof/dataset.hpp"
#include "mcof/error.hpp"
#include "mcof/evaluation.hpp"
#include "mcof/parallel.hpp"
#include "mcof/pipeline.hpp"
#include "mcof/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mcof;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  fs::path out = "mcof_out";
};

struct DatasetArgs {
  fs::path manifest;
  int classes = 0;
  std::optional<fs::path> config;
};

struct StageFlags {
  std::optional<double> sigma, k;
  std::optional<int> min_size;
  std::optional<int> crf_iters;
  std::optional<double> crf_wsmooth, crf_wappear, crf_theta_gamma, crf_theta_alpha, crf_theta_beta;
  std::optional<double> tau_fg, tau_bg;
  bool absolute_fg = false;
};

void add_dataset_args(CLI::App* app, DatasetArgs& d) {
  app->add_option("--manifest", d.manifest, "dataset manifest")->required();
  app->add_option("--classes", d.classes, "class count including background (overrides manifest)");
  app->add_option("--config", d.config, "key = value configuration file");
}

void add_stage_flags(CLI::App* app, StageFlags& f) {
  app->add_option("--sigma", f.sigma, "superpixel smoothing sigma");
  app->add_option("--k", f.k, "superpixel merge constant");
  app->add_option("--min-size", f.min_size, "superpixel minimum region size");
  app->add_option("--crf-iters", f.crf_iters, "mean-field iterations");
  app->add_option("--crf-wsmooth", f.crf_wsmooth, "smoothness kernel weight");
  app->add_option("--crf-wappear", f.crf_wappear, "appearance kernel weight");
  app->add_option("--crf-theta-gamma", f.crf_theta_gamma, "smoothness kernel stddev (pixels)");
  app->add_option("--crf-theta-alpha", f.crf_theta_alpha, "appearance kernel spatial stddev (pixels)");
  app->add_option("--crf-theta-beta", f.crf_theta_beta, "appearance kernel color stddev");
  app->add_option("--tau-fg", f.tau_fg, "seed foreground threshold");
  app->add_option("--tau-bg", f.tau_bg, "seed background threshold");
  app->add_flag("--absolute-fg", f.absolute_fg, "treat --tau-fg as an absolute heatmap value");
}

struct TrainFlags {
  std::optional<int> epochs, hidden;
  std::optional<double> lr;
};

void add_train_flags(CLI::App* app, TrainFlags& t) {
  app->add_option("--epochs", t.epochs, "training epochs")->check(CLI::PositiveNumber);
  app->add_option("--lr", t.lr, "learning rate")->check(CLI::PositiveNumber);
  app->add_option("--hidden", t.hidden, "hidden units (0 = linear)")->check(CLI::NonNegativeNumber);
}

template <typename Cfg>
void apply_train_flags(const TrainFlags& t, Cfg& cfg) {
  if (t.epochs) cfg.optimizer.epochs = *t.epochs;
  if (t.lr) cfg.optimizer.learning_rate = *t.lr;
  if (t.hidden) cfg.hidden = *t.hidden;
}

LoopConfig make_config(const Globals& g, const DatasetArgs& d, const StageFlags& f) {
  LoopConfig c;
  if (d.config) c = load_loop_config(*d.config);
  c.seed = g.seed;
  c.threads = g.threads;
  if (f.sigma || f.k || f.min_size) {
    FhParams fh = c.superpixel.value_or(FhParams{});
    if (f.sigma) fh.sigma = *f.sigma;
    if (f.k) fh.k = *f.k;
    if (f.min_size) fh.min_size = *f.min_size;
    c.superpixel = fh;
  }
  if (f.crf_iters || f.crf_wsmooth || f.crf_wappear || f.crf_theta_gamma || f.crf_theta_alpha ||
      f.crf_theta_beta) {
    CrfParams p = c.crf.value_or(CrfParams{});
    if (f.crf_iters) p.iterations = *f.crf_iters;
    if (f.crf_wsmooth) p.w_smooth = *f.crf_wsmooth;
    if (f.crf_wappear) p.w_appear = *f.crf_wappear;
    if (f.crf_theta_gamma) p.theta_gamma = *f.crf_theta_gamma;
    if (f.crf_theta_alpha) p.theta_alpha = *f.crf_theta_alpha;
    if (f.crf_theta_beta) p.theta_beta = *f.crf_theta_beta;
    c.crf = p;
  }
  if (f.tau_fg) c.seeding.tau_fg = *f.tau_fg;
  if (f.tau_bg) c.seeding.tau_bg = *f.tau_bg;
  if (f.absolute_fg) c.seeding.relative_fg = false;
  c.validate();
  return c;
}

Dataset open_dataset(const DatasetArgs& d, const Globals& g) {
  return load_dataset(load_manifest(d.manifest, d.classes), g.threads);
}

void write_region_outputs(const fs::path& dir, const Dataset& ds, const PreparedDataset& prep,
                          const std::vector<std::vector<int>>& labels, std::uint8_t unlabeled) {
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    RegionSeedSet s;
    s.labels = labels[i];
    save_seeds_text(dir / (ds.samples[i].name + ".txt"), s);
    save_label_png(dir / (ds.samples[i].name + ".png"),
                   render_region_labels(prep.superpixels[i], labels[i], unlabeled));
  }
}

std::vector<RegionSeedSet> seeds_for(const Dataset& ds, const PreparedDataset& prep,
                                     const LoopConfig& c, const std::optional<fs::path>& dir) {
  std::vector<RegionSeedSet> seeds(ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    seeds[i] = dir ? load_seeds_text(*dir / (ds.samples[i].name + ".txt"), prep.superpixels[i].region_count())
                   : extract_seeds(prep.superpixels[i], ds.samples[i].heatmaps, c.seeding);
  }
  return seeds;
}

void print_run_summary(const std::vector<IterationState>& history) {
  for (const auto& s : history) {
    std::printf("iteration %d:", s.t);
    auto show = [](const char* name, const std::optional<double>& v) {
      if (v) std::printf(" %s=%.4f", name, *v);
    };
    show("seeds", s.metrics.seeds);
    show("regionnet", s.metrics.regionnet);
    show("refined", s.metrics.refined);
    show("pixelnet", s.metrics.pixelnet);
    if (s.mask_change) std::printf(" change=%.4f", *s.mask_change);
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MCOF weakly-supervised segmentation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "root random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1, 1024));
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  // synth
  SynthSpec spec;
  auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark");
  synth->add_option("--count", spec.image_count, "number of images")->capture_default_str();
  synth->add_option("--width", spec.width)->capture_default_str();
  synth->add_option("--height", spec.height)->capture_default_str();
  synth->add_option("--classes", spec.object_classes, "object classes")->capture_default_str();
  synth->add_option("--multi-fraction", spec.multi_class_fraction)->capture_default_str();
  synth->add_option("--noise", spec.pixel_noise)->capture_default_str();

  // superpixel
  fs::path sp_image;
  StageFlags sp_flags;
  auto* sp_cmd = app.add_subcommand("superpixel", "segment one image into superpixels");
  sp_cmd->add_option("--image", sp_image)->required();
  add_stage_flags(sp_cmd, sp_flags);

  // seed
  DatasetArgs seed_ds;
  StageFlags seed_flags;
  auto* seed_cmd = app.add_subcommand("seed", "extract initial seeds from heatmaps");
  add_dataset_args(seed_cmd, seed_ds);
  add_stage_flags(seed_cmd, seed_flags);

  // train-region
  DatasetArgs tr_ds;
  StageFlags tr_flags;
  std::optional<fs::path> tr_seeds;
  TrainFlags tr_train;
  auto* tr_cmd = app.add_subcommand("train-region", "train the region classifier on seeds");
  add_dataset_args(tr_cmd, tr_ds);
  add_stage_flags(tr_cmd, tr_flags);
  tr_cmd->add_option("--seeds", tr_seeds, "directory of <name>.txt seed files (default: from heatmaps)");
  add_train_flags(tr_cmd, tr_train);

  // refine
  DatasetArgs rf_ds;
  StageFlags rf_flags;
  fs::path rf_model;
  std::optional<int> rf_bins;
  auto* rf_cmd = app.add_subcommand("refine", "predict object regions and refine them with saliency");
  add_dataset_args(rf_cmd, rf_ds);
  add_stage_flags(rf_cmd, rf_flags);
  rf_cmd->add_option("--region-model", rf_model)->required();
  rf_cmd->add_option("--bins", rf_bins, "Lab histogram bins per channel")->check(CLI::Range(1, 64));

  // train-pixel
  DatasetArgs tp_ds;
  StageFlags tp_flags;
  fs::path tp_supervision;
  TrainFlags tp_train;
  auto* tp_cmd = app.add_subcommand("train-pixel", "train the pixel classifier");
  add_dataset_args(tp_cmd, tp_ds);
  add_stage_flags(tp_cmd, tp_flags);
  tp_cmd->add_option("--supervision", tp_supervision,
                     "directory of <name>.png label masks (255 = ignore)")->required();
  add_train_flags(tp_cmd, tp_train);

  // predict
  DatasetArgs pr_ds;
  StageFlags pr_flags;
  fs::path pr_model;
  bool pr_crf = false;
  auto* pr_cmd = app.add_subcommand("predict", "predict masks with a trained pixel classifier");
  add_dataset_args(pr_cmd, pr_ds);
  add_stage_flags(pr_cmd, pr_flags);
  pr_cmd->add_option("--pixel-model", pr_model)->required();
  pr_cmd->add_flag("--crf", pr_crf, "apply the CRF before the argmax");

  // run
  DatasetArgs run_ds;
  StageFlags run_flags;
  std::string run_mode;
  std::optional<int> run_iters;
  bool run_no_saliency = false;
  auto* run_cmd = app.add_subcommand("run", "run the iterative pipeline");
  add_dataset_args(run_cmd, run_ds);
  add_stage_flags(run_cmd, run_flags);
  run_cmd->add_option("--mode", run_mode, "mcof|direct");
  run_cmd->add_option("--iters", run_iters, "maximum iterations");
  run_cmd->add_flag("--no-saliency", run_no_saliency, "skip saliency refinement");

  // eval
  fs::path ev_pred;
  std::optional<fs::path> ev_gt, ev_manifest;
  int ev_classes = 0;
  auto* ev_cmd = app.add_subcommand("eval", "mean IoU of predicted masks");
  ev_cmd->add_option("--pred", ev_pred, "directory of predicted <name>.png masks")->required();
  ev_cmd->add_option("--gt", ev_gt, "directory of ground-truth <name>.png masks");
  ev_cmd->add_option("--manifest", ev_manifest, "take ground truth and names from a manifest");
  ev_cmd->add_option("--classes", ev_classes, "class count including background");

  // overlay
  fs::path ov_image, ov_mask;
  std::optional<fs::path> ov_output;
  auto* ov_cmd = app.add_subcommand("overlay", "blend a mask over an image");
  ov_cmd->add_option("--image", ov_image)->required();
  ov_cmd->add_option("--mask", ov_mask)->required();
  ov_cmd->add_option("--output", ov_output, "output PNG (default <out>/<image stem>_overlay.png)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) {
      const Dataset ds = generate_synthetic(spec, g.seed);
      write_dataset(ds, g.out);
      std::printf("wrote %zu images to %s\n", ds.samples.size(), (g.out / "manifest.txt").c_str());
    } else if (*sp_cmd) {
      const ImageRaster image = load_image_png(sp_image);
      FhParams fh = FhParams::defaults_for(image.width(), image.height());
      if (sp_flags.sigma) fh.sigma = *sp_flags.sigma;
      if (sp_flags.k) fh.k = *sp_flags.k;
      if (sp_flags.min_size) fh.min_size = *sp_flags.min_size;
      fh.validate();
      const SuperpixelMap sp = segment(image, fh);
      const std::string stem = sp_image.stem().string();
      save_superpixels(g.out / (stem + ".f32r"), g.out / (stem + "_adjacency.txt"), sp);
      save_image_png(g.out / (stem + "_regions.png"), render_region_means(image, sp));
      std::printf("%d regions\n", sp.region_count());
    } else if (*seed_cmd) {
      const LoopConfig c = make_config(g, seed_ds, seed_flags);
      const Dataset ds = open_dataset(seed_ds, g);
      const PreparedDataset prep = prepare_dataset(ds, c);
      const auto seeds = seeds_for(ds, prep, c, std::nullopt);
      std::vector<std::vector<int>> labels;
      for (const auto& s : seeds) labels.push_back(s.labels);
      write_region_outputs(g.out / "seeds", ds, prep, labels, kIgnore);
      std::printf("seeds for %zu images in %s\n", ds.samples.size(), (g.out / "seeds").c_str());
    } else if (*tr_cmd) {
      const LoopConfig c = make_config(g, tr_ds, tr_flags);
      const Dataset ds = open_dataset(tr_ds, g);
      const PreparedDataset prep = prepare_dataset(ds, c);
      RegionTrainConfig rc = c.region;
      apply_train_flags(tr_train, rc);
      rc.class_count = ds.class_count;
      rc.seed = derive_seed(c.seed, "region", 0);
      const RegionClassifier rcl = train_region_classifier(prep.region_features,
                                                           seeds_for(ds, prep, c, tr_seeds), rc);
      save_model(g.out / "params" / "region.f32r", rcl.model);
      std::printf("loss %.6f -> %.6f\n", rcl.training.initial_loss, rcl.training.final_loss);
    } else if (*rf_cmd) {
      LoopConfig c = make_config(g, rf_ds, rf_flags);
      if (rf_bins) c.bins.bins = *rf_bins;
      const Dataset ds = open_dataset(rf_ds, g);
      const PreparedDataset prep = prepare_dataset(ds, c);
      const SoftmaxModel model = load_model(rf_model);
      std::vector<std::vector<int>> object_labels, refined_labels;
      int refined = 0;
      for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const Sample& s = ds.samples[i];
        const ObjectRegionSet o = predict_regions(prep.region_features[i], model, s.labels);
        object_labels.push_back(o.labels);
        std::vector<int> r = o.labels;
        if (c.use_saliency && s.single_class() && s.saliency) {
          try {
            r = refine(s.image, prep.superpixels[i], o, *s.saliency, *s.labels.begin(),
                       c.crf.value_or(CrfParams::defaults_for(s.image.width(), s.image.height())),
                       c.bins).labels.labels;
            ++refined;
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::EmptyPartition) throw;
          }
        }
        refined_labels.push_back(std::move(r));
      }
      write_region_outputs(g.out / "regions", ds, prep, object_labels, 0);
      write_region_outputs(g.out / "refined", ds, prep, refined_labels, 0);
      std::printf("refined %d of %zu images\n", refined, ds.samples.size());
    } else if (*tp_cmd) {
      const LoopConfig c = make_config(g, tp_ds, tp_flags);
      const Dataset ds = open_dataset(tp_ds, g);
      const PreparedDataset prep = prepare_dataset(ds, c);
      std::vector<LabelRaster> sup(ds.samples.size());
      std::vector<PixelTrainingImage> data(ds.samples.size());
      for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        sup[i] = load_label_png(tp_supervision / (ds.samples[i].name + ".png"), ds.class_count);
        check_dims(sup[i].width(), sup[i].height(), ds.samples[i].image.width(),
                   ds.samples[i].image.height(), ds.samples[i].name);
        data[i] = {&ds.samples[i].image, &prep.superpixels[i], &sup[i]};
      }
      PixelTrainConfig pc = c.pixel;
      apply_train_flags(tp_train, pc);
      pc.class_count = ds.class_count;
      pc.seed = derive_seed(c.seed, "pixel", 0);
      const PixelClassifier pcl = train_pixel_classifier(data, pc);
      save_model(g.out / "params" / "pixel.f32r", pcl.model);
      std::printf("loss %.6f -> %.6f\n", pcl.training.initial_loss, pcl.training.final_loss);
    } else if (*pr_cmd) {
      const LoopConfig c = make_config(g, pr_ds, pr_flags);
      const Dataset ds = open_dataset(pr_ds, g);
      const PreparedDataset prep = prepare_dataset(ds, c);
      const SoftmaxModel model = load_model(pr_model);
      std::vector<LabelRaster> masks;
      for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const Sample& s = ds.samples[i];
        PredictOptions opt;
        opt.allowed_classes = s.labels;
        if (pr_crf) opt.crf = c.crf.value_or(CrfParams::defaults_for(s.image.width(), s.image.height()));
        masks.push_back(predict_mask(s.image, prep.superpixels[i], model, opt));
        save_label_png(g.out / "masks" / (s.name + ".png"), masks.back());
      }
      if (ds.has_ground_truth()) {
        std::vector<LabelRaster> gts;
        for (const auto& s : ds.samples) gts.push_back(*s.ground_truth);
        std::printf("miou %.6f\n", evaluate(masks, gts, ds.class_count).miou);
      }
    } else if (*run_cmd) {
      LoopConfig c = make_config(g, run_ds, run_flags);
      if (!run_mode.empty()) c.mode = parse_loop_mode(run_mode);
      if (run_iters) c.max_iterations = *run_iters;
      if (run_no_saliency) c.use_saliency = false;
      c.validate();
      const Dataset ds = open_dataset(run_ds, g);
      const auto start = std::chrono::steady_clock::now();
      write_text_atomic(g.out / "config.txt", format_loop_config(c));
      const auto history = run_loop(ds, c, [&](const IterationState& s) { save_iteration(g.out, ds, s); });
      const IterationReport report = emit_iteration_report(g.out, ds, history);
      print_run_summary(history);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("%zu iterations in %.1f s\n", history.size(), secs);
      if (report.missing_ground_truth) {
        std::fprintf(stderr, "error: no ground truth, metrics.csv not written (overlays emitted)\n");
        return 1;
      }
      std::printf("pixelnet monotone: %s\n", report.pixelnet_monotone ? "yes" : "no");
    } else if (*ev_cmd) {
      std::vector<LabelRaster> preds, gts;
      int classes = ev_classes;
      if (ev_manifest) {
        const Dataset ds = load_dataset(load_manifest(*ev_manifest, ev_classes), g.threads);
        if (!ds.has_ground_truth()) throw Error(ErrorKind::MissingFile, "manifest lists no ground truth");
        classes = ds.class_count;
        for (const auto& s : ds.samples) {
          preds.push_back(load_label_png(ev_pred / (s.name + ".png"), classes));
          gts.push_back(*s.ground_truth);
        }
      } else {
        if (!ev_gt) throw Error(ErrorKind::Config, "eval needs --gt or --manifest");
        if (classes == 0) classes = kDefaultClassCount;
        std::vector<fs::path> names;
        for (const auto& e : fs::directory_iterator(*ev_gt)) {
          if (e.path().extension() == ".png") names.push_back(e.path().filename());
        }
        std::sort(names.begin(), names.end());
        for (const auto& n : names) {
          gts.push_back(load_label_png(*ev_gt / n, classes));
          preds.push_back(load_label_png(ev_pred / n, classes));
        }
      }
      const IouReport r = evaluate(preds, gts, classes);
      const std::string table = format_iou_table(r);
      write_text_atomic(g.out / "iou.csv", table);
      std::fputs(table.c_str(), stdout);
    } else if (*ov_cmd) {
      const ImageRaster image = load_image_png(ov_image);
      const LabelRaster mask = load_label_png(ov_mask);
      const fs::path out = ov_output.value_or(g.out / (ov_image.stem().string() + "_overlay.png"));
      save_image_png(out, render_overlay(image, mask));
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.is_validation() ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
