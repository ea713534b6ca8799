#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "logora/data.hpp"
#include "logora/dtw.hpp"
#include "logora/encoders.hpp"
#include "logora/errors.hpp"
#include "logora/run_config.hpp"
#include "logora/trainer.hpp"

namespace py = pybind11;
using namespace logora;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor::from(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

// [L] or [L, d] array as a sequence of L rows.
SequenceView as_sequence(const Array& a) {
  if (a.ndim() == 1) return SequenceView(std::span<const double>(a.data(), a.size()));
  if (a.ndim() != 2) throw py::value_error("expected a 1-D or 2-D array");
  return SequenceView(std::span<const double>(a.data(), a.size()), a.shape(0), a.shape(1));
}

py::tuple dtw_tuple(const DtwResult& r) {
  py::list path;
  for (const auto& [i, j] : r.path) path.append(py::make_tuple(i, j));
  return py::make_tuple(r.distance, path);
}

py::object json_value(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

Array dataset_values(const Dataset& ds) {
  const auto& m = ds.meta();
  Array out({static_cast<py::ssize_t>(ds.size()), static_cast<py::ssize_t>(m.length),
             static_cast<py::ssize_t>(m.channels)});
  double* dst = out.mutable_data();
  for (const auto& s : ds.samples()) dst = std::copy(s.values.begin(), s.values.end(), dst);
  return out;
}

// Builds a dataset from values[N, T, d] and labels (-1 for unlabeled).
Dataset make_dataset(const Array& values, const std::vector<int>& labels, std::size_t num_classes,
                     const std::string& domain) {
  if (values.ndim() != 3) throw py::value_error("values must have shape [N, T, d]");
  const std::size_t n = values.shape(0), t = values.shape(1), d = values.shape(2);
  if (labels.size() != n) throw py::value_error("need one label per series");
  DatasetMeta meta;
  meta.length = t;
  meta.channels = d;
  meta.num_classes = num_classes;
  for (std::size_t j = 0; j < num_classes; ++j) meta.class_names.push_back("class" + std::to_string(j));
  meta.domain = parse_domain(domain);
  std::vector<TimeSeriesSample> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    samples[i].values.assign(values.data() + i * t * d, values.data() + (i + 1) * t * d);
    samples[i].label = labels[i];
    samples[i].domain = meta.domain;
  }
  return Dataset(std::move(meta), std::move(samples));
}

struct Model {
  LogoraModel model;
};

py::tuple train(const std::string& config_text, const Dataset& source, const Dataset& target,
                std::optional<std::size_t> epochs, std::optional<std::uint64_t> seed, const std::string& ablate,
                const Dataset* eval) {
  RunConfig cfg = parse_run_config(config_text);
  if (epochs) cfg.train.epochs = *epochs;
  if (seed) cfg.train.seed = *seed;
  apply_ablation(cfg.train.weights, ablate);
  bind_dataset_shape(cfg, source.meta());
  auto model = std::make_unique<Model>(Model{LogoraModel(cfg.train.model, cfg.train.seed)});
  std::vector<std::string> lines;
  {
    py::gil_scoped_release release;
    Trainer trainer(model->model, cfg.train);
    for (std::size_t e = 0; e < cfg.train.epochs; ++e) {
      EpochMetrics m = trainer.train_epoch(source, target);
      if (eval != nullptr) m.target_accuracy = evaluate(model->model, *eval).accuracy;
      lines.push_back(m.to_json());
    }
  }
  py::list history;
  for (const auto& line : lines) history.append(json_value(line));
  return py::make_tuple(std::move(model), history);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "LogoRA time-series domain adaptation core";
  static py::exception<Error> error(m, "LogoraError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  m.def("dtw", [](const Array& a, const Array& b) { return dtw_tuple(dtw_distance(as_sequence(a), as_sequence(b))); },
        py::arg("a"), py::arg("b"), "DTW distance and warping path between two [L, d] sequences.");
  m.def("dtw_brute_force",
        [](const Array& a, const Array& b) { return dtw_tuple(dtw_brute_force(as_sequence(a), as_sequence(b))); },
        py::arg("a"), py::arg("b"), "Exhaustive DTW over every warping path (short sequences only).");

  m.def("patch_count", &patch_count, py::arg("length"), py::arg("patch_len"), py::arg("stride"));
  m.def(
      "patchify",
      [](const Array& series, std::size_t patch_len, std::size_t stride) {
        const SequenceView s = as_sequence(series);
        return to_array(patchify(std::span<const double>(series.data(), series.size()), s.length, s.width,
                                 patch_len, stride)
                            .patches);
      },
      py::arg("series"), py::arg("patch_len"), py::arg("stride"), "Split a [T, d] series into [M, patch_len, d].");

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("length", &SynthConfig::length)
      .def_readwrite("channels", &SynthConfig::channels)
      .def_readwrite("num_classes", &SynthConfig::num_classes)
      .def_readwrite("samples_per_class", &SynthConfig::samples_per_class)
      .def_readwrite("motif_length", &SynthConfig::motif_length)
      .def_readwrite("shift_range", &SynthConfig::shift_range)
      .def_readwrite("target_scale", &SynthConfig::target_scale)
      .def_readwrite("target_offset", &SynthConfig::target_offset)
      .def_readwrite("noise_sigma", &SynthConfig::noise_sigma)
      .def_readwrite("seed", &SynthConfig::seed);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("values"), py::arg("labels"), py::arg("num_classes"),
           py::arg("domain") = "source")
      .def_static("load", &load_dataset, py::arg("path"))
      .def("save", [](const Dataset& ds, const std::filesystem::path& p) { save_dataset(ds, p); }, py::arg("path"))
      .def("__len__", &Dataset::size)
      .def_property_readonly("values", &dataset_values)
      .def_property_readonly("labels",
                             [](const Dataset& ds) {
                               std::vector<int> out;
                               for (const auto& s : ds.samples()) out.push_back(s.label);
                               return out;
                             })
      .def_property_readonly("length", [](const Dataset& ds) { return ds.meta().length; })
      .def_property_readonly("channels", [](const Dataset& ds) { return ds.meta().channels; })
      .def_property_readonly("num_classes", [](const Dataset& ds) { return ds.meta().num_classes; })
      .def_property_readonly("class_names", [](const Dataset& ds) { return ds.meta().class_names; })
      .def_property_readonly("domain", [](const Dataset& ds) { return domain_name(ds.meta().domain); })
      .def("circular_shift", &circular_shift, py::arg("shift"));

  m.def("synthesize", &synthesize_uda_pair, py::arg("config"), "Labeled (source, target) synthetic pair.");
  m.def("template_oracle_accuracy", &template_oracle_accuracy, py::arg("config"), py::arg("dataset"));

  py::class_<Model>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return Model{LogoraModel::load(p)}; }, py::arg("path"))
      .def("save", [](const Model& self, const std::filesystem::path& p) { self.model.save(p); }, py::arg("path"))
      .def_property_readonly("config", [](const Model& self) { return json_value(self.model.config().to_json()); })
      .def_property_readonly("parameter_count", [](const Model& self) { return self.model.params().parameter_count(); })
      .def(
          "forward",
          [](Model& self, const Array& x) {
            const ForwardOutput out = self.model.forward(to_tensor(x), false);
            py::dict d;
            d["logits"] = to_array(out.logits);
            d["fused"] = to_array(out.fusion.fused);
            d["global"] = to_array(out.global_rep);
            py::list local, cross;
            for (const auto& t : out.local_reps) local.append(to_array(t));
            for (const auto& t : out.fusion.cross_weights) cross.append(to_array(t));
            d["local"] = local;
            d["cross_weights"] = cross;
            d["self_weights"] = to_array(out.fusion.self_weights);
            return d;
          },
          py::arg("x"), "Inference-mode forward pass on x[B, T, d].")
      .def("predict", [](Model& self, const Dataset& ds) { return predict(self.model, ds); }, py::arg("dataset"))
      .def("evaluate", [](Model& self, const Dataset& ds) { return json_value(evaluate(self.model, ds).to_json()); },
           py::arg("dataset"));

  m.def("train", &train, py::arg("config"), py::arg("source"), py::arg("target"), py::arg("epochs") = py::none(),
        py::arg("seed") = py::none(), py::arg("ablate") = "", py::arg("eval") = nullptr,
        "Train from `key = value` config text. Returns (model, per-epoch metrics).");
}
