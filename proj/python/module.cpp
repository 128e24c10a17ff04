// Copyright 2026 The ctxhourglass Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings: tensor operators on NumPy arrays, checkpoints, data
// generation, training and gradient checks.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ctxh/checkpoint.hpp"
#include "ctxh/config.hpp"
#include "ctxh/error.hpp"
#include "ctxh/gradcheck.hpp"
#include "ctxh/metrics.hpp"
#include "ctxh/ops.hpp"
#include "ctxh/parallel.hpp"
#include "ctxh/synth.hpp"
#include "ctxh/train.hpp"

namespace py = pybind11;
using namespace ctxh;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor<double> to_tensor(const Array& a) {
  if (a.ndim() != 4) throw ShapeError("expected a 4-d array (n, c, h, w), got " + std::to_string(a.ndim()) + "-d");
  const Shape s{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(3))};
  return Tensor<double>(s, std::vector<double>(a.data(), a.data() + a.size()));
}

template <typename T>
py::array_t<double> to_array(const Tensor<T>& t) {
  const Shape& s = t.shape();
  py::array_t<double> out({s.n, s.c, s.h, s.w});
  double* p = out.mutable_data();
  for (std::size_t i = 0; i < t.size(); ++i) p[i] = static_cast<double>(t[i]);
  return out;
}

ConvFilter<double> filter(const Array& w, const Array& b) {
  if (b.ndim() != 1) return {to_tensor(w), to_tensor(b)};
  const auto o = static_cast<std::size_t>(b.shape(0));
  return {to_tensor(w), Tensor<double>({1, o, 1, 1}, std::vector<double>(b.data(), b.data() + o))};
}

py::dict summary_dict(const TrainReport& r) {
  return py::module_::import("json").attr("loads")(summary_json(r).dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hourglass networks with contextual convolutions";

  // Translators run newest first, so the base class goes in before its children.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("conv2d_same", [](const Array& x, const Array& w, const Array& b) {
    return to_array(conv2d_same(to_tensor(x), filter(w, b)));
  }, py::arg("x"), py::arg("weight"), py::arg("bias"));
  m.def("transposed_conv2d", [](const Array& x, const Array& w, const Array& b, std::size_t stride) {
    return to_array(transposed_conv2d(to_tensor(x), filter(w, b), stride));
  }, py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 2);
  m.def("maxpool2", [](const Array& x) { return to_array(maxpool2(to_tensor(x))); });
  m.def("selu", [](const Array& x) { return to_array(selu(to_tensor(x))); });
  m.def("contextual_conv",
        [](const Array& small, const Array& large, const Array& ws, const Array& bs, const Array& wl,
           const Array& bl) {
          return to_array(contextual_conv(to_tensor(small), to_tensor(large), ContextLink<double>{filter(ws, bs),
                                                                                                  filter(wl, bl)}));
        },
        py::arg("small"), py::arg("large"), py::arg("weight_small"), py::arg("bias_small"),
        py::arg("weight_large"), py::arg("bias_large"));
  m.def("context_index_map", [](std::size_t i, std::size_t j, std::size_t h1, std::size_t w1, std::size_t h2,
                                std::size_t w2) {
    const GridIndex g = context_index_map(i, j, h1, w1, h2, w2);
    return py::make_tuple(g.row, g.col);
  });

  py::class_<Network<float>>(m, "Network")
      .def_property_readonly("parameter_count", &Network<float>::parameter_count)
      .def_property_readonly("parameter_names",
                             [](const Network<float>& n) {
                               std::vector<std::string> names;
                               for (const auto& p : n.parameters()) names.push_back(p.name);
                               return names;
                             })
      .def("predict", [](Network<float>& n, const Array& x) {
        return to_array(n.predict(to_tensor(x).cast<float>()));
      });

  m.def("load_checkpoint", [](const std::filesystem::path& path) { return load_checkpoint<float>(path); });
  m.def("unet", [](std::size_t depth, std::size_t base_filters, std::size_t out_channels, bool contextual,
                   std::uint64_t seed) {
    HourglassConfig c;
    c.depth = depth;
    c.base_filters = base_filters;
    c.out_channels = out_channels;
    c.head = out_channels == 1 ? HeadKind::kDensity : HeadKind::kSegmentation;
    return contextual ? build_contextual_unet<float>(c, seed) : build_unet<float>(c, seed);
  }, py::arg("depth") = 2, py::arg("base_filters") = 8, py::arg("out_channels") = 2, py::arg("contextual") = true,
     py::arg("seed") = 0);

  m.def("synth", [](const std::string& task, std::size_t n, const std::filesystem::path& out, std::uint64_t seed) {
    const Rng rng = Rng(seed).derive("synth");
    save_dataset(parse_task(task) == Task::kCount ? synth_counting_set(n, {}, rng) : synth_segmentation_set(n, {}, rng),
                 out);
  }, py::arg("task"), py::arg("n"), py::arg("out"), py::arg("seed"));

  m.def("train", [](const std::filesystem::path& config_path, int threads) {
    const RunConfig config = load_run_config(config_path);
    set_num_threads(threads);
    const Dataset data = load_dataset(config.data.dir, config.data.sigma);
    Network<float> net = build_network(config);
    TrainOptions options;
    options.output_dir = config.output_dir;
    options.seed = config.seed;
    options.checkpoint_metadata = {{"model", std::string(model_name(config.model))}, {"seed", config.seed},
                                   {"sigma", config.data.sigma}};
    TrainReport report;
    {
      py::gil_scoped_release release;
      report = train(net, data, config.train, config.optimizer, config.augmentation, options);
    }
    return summary_dict(report);
  }, py::arg("config"), py::arg("threads") = 1);

  m.def("gradcheck", [](const std::string& scope, std::uint64_t seed) {
    GradCheckOptions options;
    options.seed = seed;
    const auto entries = scope == "network" ? run_network_gradchecks(options) : run_op_gradchecks(options);
    py::list out;
    for (const auto& e : entries) {
      py::dict d;
      d["name"] = e.name;
      d["max_rel_error"] = e.max_rel_error;
      d["passed"] = e.passed;
      out.append(d);
    }
    return out;
  }, py::arg("scope") = "ops", py::arg("seed") = 0);
}
