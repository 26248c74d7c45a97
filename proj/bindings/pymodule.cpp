// Python bindings. Images and attribution maps cross the boundary as
// numpy float64 arrays of shape (height, width, channels), which matches
// the channel-fastest tensor layout byte for byte.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <stdexcept>

#include "xatk/attack.hpp"
#include "xatk/attribution.hpp"
#include "xatk/data_io.hpp"
#include "xatk/harness.hpp"
#include "xatk/metrics.hpp"
#include "xatk/micronet.hpp"

namespace py = pybind11;
using namespace xatk;

namespace {

py::array_t<double> to_array(const Tensor& t) {
  py::array_t<double> out({t.height(), t.width(), t.channels()});
  std::memcpy(out.mutable_data(), t.data().data(),
              t.size() * sizeof(double));
  return out;
}

Tensor from_array(const py::array_t<double, py::array::c_style |
                                                py::array::forcecast>& a) {
  if (a.ndim() != 3) {
    throw ShapeError("expected a (height, width, channels) array, got " +
                     std::to_string(a.ndim()) + " dimensions");
  }
  const Shape shape{static_cast<int>(a.shape(1)),
                    static_cast<int>(a.shape(0)),
                    static_cast<int>(a.shape(2))};
  std::vector<double> data(a.data(), a.data() + a.size());
  return Tensor(shape, std::move(data));
}

AttributionConfig make_attribution_config(
    const std::string& method, int ig_steps,
    const std::vector<py::array_t<double>>& dls_baselines) {
  AttributionConfig cfg;
  cfg.method = method_from_name(method);
  cfg.ig_steps = ig_steps;
  for (const auto& b : dls_baselines) {
    cfg.dls_baselines.push_back(from_array(b));
  }
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "One-step black-box attack on post-hoc explanations";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("stream",
           static_cast<Rng (Rng::*)(const std::string&) const>(&Rng::stream),
           py::arg("label"))
      .def("uniform", &Rng::uniform)
      .def("gaussian", &Rng::gaussian)
      .def("below", &Rng::below, py::arg("n"))
      .def("permutation", &Rng::permutation, py::arg("n"))
      .def("sample_without_replacement", &Rng::sample_without_replacement,
           py::arg("n"), py::arg("k"));

  py::class_<LabeledDataset>(m, "LabeledDataset")
      .def(py::init<>())
      .def_property_readonly(
          "images",
          [](const LabeledDataset& ds) {
            py::list out;
            for (const auto& img : ds.images) out.append(to_array(img));
            return out;
          })
      .def_readwrite("labels", &LabeledDataset::labels)
      .def_readwrite("class_count", &LabeledDataset::class_count)
      .def_readwrite("provenance", &LabeledDataset::provenance)
      .def("__len__", &LabeledDataset::size)
      .def("image", [](const LabeledDataset& ds,
                       std::size_t i) { return to_array(ds.images.at(i)); })
      .def("add_image",
           [](LabeledDataset& ds, const py::array_t<double>& img, int label) {
             ds.images.push_back(from_array(img));
             ds.labels.push_back(label);
           },
           py::arg("image"), py::arg("label"));

  m.def("generate_toy_dataset", &generate_toy_dataset, py::arg("classes"),
        py::arg("per_class"), py::arg("side"), py::arg("seed"));
  m.def("dataset_save", &dataset_save, py::arg("path"), py::arg("dataset"));
  m.def("dataset_load", &dataset_load, py::arg("path"));
  m.def("ppm_read",
        [](const std::string& path) { return to_array(ppm_read(path)); },
        py::arg("path"));
  m.def("ppm_write",
        [](const std::string& path, const py::array_t<double>& img) {
          ppm_write(path, from_array(img));
        },
        py::arg("path"), py::arg("image"));

  py::class_<EpochStats>(m, "EpochStats")
      .def_readonly("epoch", &EpochStats::epoch)
      .def_readonly("mean_loss", &EpochStats::mean_loss)
      .def_readonly("accuracy", &EpochStats::accuracy);

  py::class_<MicroNet>(m, "MicroNet")
      .def_static("random_init",
                  [](int width, int height, int channels, int classes,
                     std::uint64_t seed) {
                    Rng rng(seed);
                    return MicroNet::random_init(Shape{width, height, channels},
                                                 classes, rng);
                  },
                  py::arg("width"), py::arg("height"), py::arg("channels"),
                  py::arg("classes"), py::arg("seed"))
      .def("train",
           [](MicroNet& net, const LabeledDataset& ds, int epochs, double lr,
              int batch_size, std::uint64_t seed) {
             TrainConfig cfg;
             cfg.epochs = epochs;
             cfg.learning_rate = lr;
             cfg.batch_size = batch_size;
             Rng rng(seed);
             return net.train(ds, cfg, rng);
           },
           py::arg("dataset"), py::arg("epochs") = 100, py::arg("lr") = 0.05,
           py::arg("batch_size") = 16, py::arg("seed") = 0)
      .def("logits",
           [](const MicroNet& net, const py::array_t<double>& x) {
             return net.logits(from_array(x));
           },
           py::arg("x"))
      .def("predict",
           [](const MicroNet& net, const py::array_t<double>& x) {
             return net.predict(from_array(x));
           },
           py::arg("x"))
      .def("input_gradient",
           [](const MicroNet& net, const py::array_t<double>& x, int j) {
             return to_array(net.input_gradient(from_array(x), j));
           },
           py::arg("x"), py::arg("class_index"))
      .def("accuracy", &MicroNet::accuracy, py::arg("dataset"))
      .def_property_readonly("num_classes", &MicroNet::num_classes)
      .def("save_weights", &MicroNet::save_weights, py::arg("path"))
      .def_static("load_weights", &MicroNet::load_weights, py::arg("path"));

  m.def("compute_attribution",
        [](const MicroNet& net, const py::array_t<double>& x, int j,
           const std::string& method, int ig_steps,
           const std::vector<py::array_t<double>>& dls_baselines) {
          const AttributionConfig cfg =
              make_attribution_config(method, ig_steps, dls_baselines);
          return to_array(compute_attribution(net, from_array(x), j, cfg));
        },
        py::arg("model"), py::arg("x"), py::arg("class_index"),
        py::arg("method") = "saliency", py::arg("ig_steps") = 32,
        py::arg("dls_baselines") = std::vector<py::array_t<double>>{});

  m.def("ssim",
        [](const py::array_t<double>& x, const py::array_t<double>& y) {
          return ssim(from_array(x), from_array(y));
        },
        py::arg("x"), py::arg("y"));
  m.def("explanation_change_pct",
        [](const py::array_t<double>& z, const py::array_t<double>& zhat) {
          return explanation_change_pct(from_array(z), from_array(zhat));
        },
        py::arg("z"), py::arg("zhat"));
  m.def("prediction_change", &prediction_change, py::arg("p"),
        py::arg("phat"), py::arg("y_star"));

  py::class_<AttackOutcome>(m, "AttackOutcome")
      .def_property_readonly(
          "corrupted",
          [](const AttackOutcome& o) { return to_array(o.corrupted); })
      .def_property_readonly(
          "indices",
          [](const AttackOutcome& o) { return o.indices.flat_indices; })
      .def_readonly("attack_image_id", &AttackOutcome::attack_image_id)
      .def_readonly("candidate_rank", &AttackOutcome::candidate_rank)
      .def_readonly("explanation_change_pct",
                    &AttackOutcome::explanation_change_pct)
      .def_readonly("ssim", &AttackOutcome::ssim)
      .def_readonly("confidence_change", &AttackOutcome::confidence_change)
      .def_readonly("original_class", &AttackOutcome::original_class)
      .def_readonly("running_up_class", &AttackOutcome::running_up_class)
      .def_readonly("flags", &AttackOutcome::flags);

  m.def("select_running_up", &select_running_up, py::arg("probs"));

  m.def("run_attack",
        [](const MicroNet& net, const py::array_t<double>& x,
           const LabeledDataset& pool, double alpha, double topk,
           int candidates, const std::string& method, int ig_steps,
           const std::vector<py::array_t<double>>& dls_baselines) {
          AttackConfig cfg;
          cfg.alpha = alpha;
          cfg.topk_frac = topk;
          cfg.candidates_per_image = candidates;
          cfg.attribution =
              make_attribution_config(method, ig_steps, dls_baselines);
          return run_attack(net, from_array(x), pool, cfg);
        },
        py::arg("model"), py::arg("x"), py::arg("pool"),
        py::arg("alpha") = 0.09, py::arg("topk") = 0.1,
        py::arg("candidates") = 3, py::arg("method") = "saliency",
        py::arg("ig_steps") = 32,
        py::arg("dls_baselines") = std::vector<py::array_t<double>>{});

  py::class_<ResultRow>(m, "ResultRow")
      .def_readonly("method", &ResultRow::method)
      .def_readonly("alpha", &ResultRow::alpha)
      .def_readonly("topk", &ResultRow::topk)
      .def_readonly("image_id", &ResultRow::image_id)
      .def_readonly("candidate_rank", &ResultRow::candidate_rank)
      .def_readonly("variant", &ResultRow::variant)
      .def_readonly("expl_change_pct", &ResultRow::expl_change_pct)
      .def_readonly("ssim", &ResultRow::ssim)
      .def_readonly("conf_change_pp", &ResultRow::conf_change_pp)
      .def_readonly("running_up_class", &ResultRow::running_up_class)
      .def_readonly("flags", &ResultRow::flags);

  m.def("choose_attack_targets",
        [](const LabeledDataset& pool, int count, std::uint64_t seed) {
          return choose_attack_targets(pool, count,
                                       Rng(seed).stream("targets"));
        },
        py::arg("pool"), py::arg("count"), py::arg("seed"));

  m.def("run_sweep",
        [](const MicroNet& net, const LabeledDataset& pool,
           const LabeledDataset& attack_pool,
           const std::vector<std::size_t>& targets,
           const std::vector<std::string>& methods,
           const std::vector<double>& alphas, const std::vector<double>& topks,
           int candidates, bool include_baseline, std::uint64_t seed,
           int workers) {
          SweepSpec spec;
          spec.methods.clear();
          for (const auto& name : methods) {
            spec.methods.push_back(method_from_name(name));
          }
          spec.alphas = alphas;
          spec.topks = topks;
          spec.candidates = candidates;
          spec.include_baseline = include_baseline;
          spec.master_seed = seed;
          spec.workers = workers;
          return run_sweep(net, pool, attack_pool, targets, spec);
        },
        py::arg("model"), py::arg("pool"), py::arg("attack_pool"),
        py::arg("targets"), py::arg("methods"), py::arg("alphas"),
        py::arg("topks"), py::arg("candidates") = 3,
        py::arg("include_baseline") = true, py::arg("seed") = 0,
        py::arg("workers") = 1);

  m.def("write_result_csv", &write_result_csv, py::arg("path"),
        py::arg("rows"));
  m.def("read_result_csv", &read_result_csv, py::arg("path"));
}
