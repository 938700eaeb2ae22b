// Python bindings: numpy in, numpy out.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mcof/crf.hpp"
#include "mcof/evaluation.hpp"
#include "mcof/pipeline.hpp"
#include "mcof/saliency.hpp"
#include "mcof/seeding.hpp"
#include "mcof/superpixel.hpp"
#include "mcof/synthetic.hpp"

namespace py = pybind11;
using namespace mcof;

namespace {

using U8 = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;

ImageRaster to_image(const U8& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw Error(ErrorKind::DimensionMismatch, "image must be HxWx3 uint8");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  return ImageRaster(w, h, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

LabelRaster to_labels(const U8& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::DimensionMismatch, "label map must be HxW uint8");
  return LabelRaster(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                     std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

ScalarRaster to_scalar(const F32& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw Error(ErrorKind::DimensionMismatch, "expected HxW or HxWxC float32");
  const int channels = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  return ScalarRaster(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                      std::vector<float>(a.data(), a.data() + a.size()), channels);
}

template <typename T>
py::array_t<T> to_array(std::span<const T> data, int h, int w, int channels) {
  std::vector<py::ssize_t> shape{h, w};
  if (channels > 1) shape.push_back(channels);
  py::array_t<T> out(shape);
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

py::array_t<std::uint8_t> from_image(const ImageRaster& r) { return to_array(r.data(), r.height(), r.width(), 3); }
py::array_t<std::uint8_t> from_labels(const LabelRaster& r) { return to_array(r.data(), r.height(), r.width(), 1); }
py::array_t<float> from_scalar(const ScalarRaster& r) { return to_array(r.data(), r.height(), r.width(), r.channels()); }

py::dict stage_metrics(const IterationState& s) {
  py::dict d;
  d["iteration"] = s.t;
  d["seeds"] = s.metrics.seeds;
  d["regionnet"] = s.metrics.regionnet;
  d["refined"] = s.metrics.refined;
  d["pixelnet"] = s.metrics.pixelnet;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mcof, m) {
  m.doc() = "Weakly supervised segmentation core";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      exc.attr("validation") = e.is_validation();
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.attr("IGNORE") = kIgnore;
  m.attr("UNLABELED") = kUnlabeled;

  m.def("segment", [](const U8& image, double sigma, double k, int min_size) {
        const FhParams p{sigma, k, min_size};
        p.validate();
        const SuperpixelMap sp = segment(to_image(image), p);
        return to_array<std::int32_t>(sp.region_ids(), sp.height(), sp.width(), 1);
      },
      py::arg("image"), py::arg("sigma") = 0.8, py::arg("k") = 100.0, py::arg("min_size") = 10,
      "Superpixel ids (HxW int32) of an HxWx3 uint8 image.");

  m.def("extract_seeds", [](py::array_t<std::int32_t, py::array::c_style | py::array::forcecast> ids,
                            const std::map<int, F32>& heatmaps, double tau_fg, double tau_bg, bool relative_fg) {
        if (ids.ndim() != 2) throw Error(ErrorKind::DimensionMismatch, "superpixel ids must be HxW");
        const SuperpixelMap sp(static_cast<int>(ids.shape(1)), static_cast<int>(ids.shape(0)),
                               std::vector<std::int32_t>(ids.data(), ids.data() + ids.size()));
        HeatmapSet set;
        for (const auto& [c, h] : heatmaps) set.emplace(c, to_scalar(h));
        const SeedParams p{tau_fg, tau_bg, relative_fg};
        p.validate();
        return extract_seeds(sp, set, p).labels;
      },
      py::arg("superpixels"), py::arg("heatmaps"), py::arg("tau_fg") = 0.7,
      py::arg("tau_bg") = 0.3, py::arg("relative_fg") = true,
      "Per-region seed labels (UNLABELED = -1) from class heatmaps.");

  m.def("bayes_posterior", &bayes_posterior_value, py::arg("saliency"), py::arg("object_likelihood"),
        py::arg("background_likelihood"));

  m.def("mean_field", [](const F32& unary, const U8& image, int iterations, double w_smooth, double theta_gamma,
                         double w_appear, std::optional<double> theta_alpha, double theta_beta) {
        const ImageRaster img = to_image(image);
        CrfParams p = CrfParams::defaults_for(img.width(), img.height());
        p.iterations = iterations;
        p.w_smooth = w_smooth;
        p.theta_gamma = theta_gamma;
        p.w_appear = w_appear;
        if (theta_alpha) p.theta_alpha = *theta_alpha;
        p.theta_beta = theta_beta;
        return from_scalar(mean_field(to_scalar(unary), img, p));
      },
      py::arg("unary"), py::arg("image"), py::arg("iterations") = 5, py::arg("w_smooth") = 3.0,
      py::arg("theta_gamma") = 3.0, py::arg("w_appear") = 5.0, py::arg("theta_alpha") = py::none(),
      py::arg("theta_beta") = 13.0, "Dense CRF marginals (HxWxL) from unary probabilities (HxWxL).");

  m.def("evaluate", [](const std::vector<U8>& preds, const std::vector<U8>& gts, int classes) {
        std::vector<LabelRaster> p, g;
        for (const auto& a : preds) p.push_back(to_labels(a));
        for (const auto& a : gts) g.push_back(to_labels(a));
        const IouReport r = evaluate(p, g, classes);
        py::dict d;
        d["miou"] = r.miou;
        d["per_class_iou"] = r.per_class_iou;
        d["included"] = r.included;
        d["confusion"] = to_array<std::uint64_t>(r.confusion, classes, classes, 1);
        return d;
      },
      py::arg("predictions"), py::arg("ground_truth"), py::arg("classes"));

  m.def("overlay", [](const U8& image, const U8& mask) {
        return from_image(render_overlay(to_image(image), to_labels(mask)));
      },
      py::arg("image"), py::arg("mask"));

  m.def("synthetic", [](int count, int width, int height, int classes, std::uint64_t seed) {
        SynthSpec spec;
        spec.image_count = count;
        spec.width = width;
        spec.height = height;
        spec.object_classes = classes;
        spec.validate();
        const Dataset d = generate_synthetic(spec, seed);
        py::list out;
        for (const Sample& s : d.samples) {
          py::dict item;
          item["name"] = s.name;
          item["image"] = from_image(s.image);
          item["labels"] = s.labels;
          py::dict heat;
          for (const auto& [c, h] : s.heatmaps) heat[py::int_(c)] = from_scalar(h);
          item["heatmaps"] = heat;
          item["saliency"] = from_scalar(*s.saliency);
          item["ground_truth"] = from_labels(*s.ground_truth);
          out.append(item);
        }
        return out;
      },
      py::arg("count") = 40, py::arg("width") = 64, py::arg("height") = 64, py::arg("classes") = 4,
      py::arg("seed") = 0, "Synthetic benchmark samples as dicts of numpy arrays.");

  m.def("run", [](const std::filesystem::path& manifest, std::optional<std::filesystem::path> config,
                  std::optional<std::filesystem::path> out, std::uint64_t seed, std::optional<int> iterations,
                  std::optional<std::string> mode, int threads) {
        LoopConfig c = config ? load_loop_config(*config) : LoopConfig{};
        c.seed = seed;
        c.threads = threads;
        if (iterations) c.max_iterations = *iterations;
        if (mode) c.mode = parse_loop_mode(*mode);
        c.validate();
        const Dataset ds = load_dataset(load_manifest(manifest), threads);
        std::vector<IterationState> history;
        {
          py::gil_scoped_release release;
          history = run_loop(ds, c, [&](const IterationState& s) {
            if (out) save_iteration(*out, ds, s);
          });
          if (out) emit_iteration_report(*out, ds, history);
        }
        py::list rows;
        for (const auto& s : history) rows.append(stage_metrics(s));
        return rows;
      },
      py::arg("manifest"), py::arg("config") = py::none(), py::arg("out") = py::none(), py::arg("seed") = 0,
      py::arg("iterations") = py::none(), py::arg("mode") = py::none(), py::arg("threads") = 1,
      "Run the iterative pipeline on a manifest; returns per-iteration train mIoU.");
}
