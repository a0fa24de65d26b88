#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "punn/experiment.hpp"

namespace py = pybind11;
using namespace punn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseMatrix to_matrix(const Array& a) {
  if (a.ndim() == 1) {
    return DenseMatrix(1, a.shape(0), std::vector<double>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() != 2) throw InputShapeError("expected a 1-D or 2-D array");
  return DenseMatrix(a.shape(0), a.shape(1), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const DenseMatrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::tuple dataset_tuple(const Dataset& ds) {
  py::array_t<long long> y(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) y.mutable_data()[i] = static_cast<long long>(ds.labels[i]);
  return py::make_tuple(to_array(ds.features), y);
}

py::object json_to_py(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Json py_to_json(const py::object& o) {
  if (py::isinstance<py::str>(o)) return Json::parse(o.cast<std::string>());
  return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

GammaGrid gamma_grid(const Array& values) {
  GammaGrid g;
  g.values = to_matrix(values);
  return g;
}

}  // namespace

PYBIND11_MODULE(_punn, m) {
  m.doc() = "Partition of unity neural networks";

  static py::exception<Error> base(m, "PunnError");
  static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<NumericError> numeric_error(m, "NumericError", base.ptr());
  static py::exception<DomainError> domain_error(m, "DomainError", base.ptr());
  static py::exception<ParseError> parse_error(m, "ParseError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const NumericError& e) {
      py::set_error(numeric_error, e.what());
    } catch (const DomainError& e) {
      py::set_error(domain_error, e.what());
    } catch (const ParseError& e) {
      py::set_error(parse_error, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def(
      "make_synthetic",
      [](const std::string& kind, std::size_t n, double noise, std::uint64_t seed) {
        return dataset_tuple(make_synthetic(parse_synthetic_kind(kind), n, noise, seed));
      },
      py::arg("kind"), py::arg("n") = 1000, py::arg("noise") = 0.1, py::arg("seed") = 42,
      "Returns (X, y) for moons, circles, xor, helix or rings.");

  m.def(
      "load_csv",
      [](const std::string& path, const std::string& label_column, bool header) {
        return dataset_tuple(load_csv(path, label_column, header));
      },
      py::arg("path"), py::arg("label_column") = "-1", py::arg("header") = true);

  m.def(
      "activation",
      [](const std::string& kind, double t) { return activation_eval(parse_activation(kind), t).value; },
      py::arg("kind"), py::arg("t"));

  m.def(
      "partition_from_gates",
      [](const std::vector<double>& g) { return partition_from_gates(g); }, py::arg("gates"));

  m.def(
      "gamma_from_pmap",
      [](const Array& p) {
        ProbabilityMapGrid grid;
        grid.values = to_matrix(p);
        grid.box.lo.assign(1, 0.0);
        grid.box.hi.assign(1, 1.0);
        grid.box.resolution.assign(1, grid.values.rows());
        return to_array(gamma_from_pmap(grid).values);
      },
      py::arg("p"), "Gate targets gamma (n x (k-1)) for probability rows p (n x k).");

  m.def(
      "exact_reconstruct", [](const Array& gamma) { return to_array(exact_reconstruct(gamma_grid(gamma))); },
      py::arg("gamma"));

  m.def(
      "phi_targets", [](const Array& gamma) { return to_array(phi_targets(gamma_grid(gamma)).values); },
      py::arg("gamma"));

  m.def(
      "run_config",
      [](const py::object& config, bool write_outputs) {
        const ExperimentConfig cfg = parse_config(py_to_json(config));
        py::list out;
        for (const RunRecord& r : run_experiment(cfg, write_outputs)) out.append(json_to_py(r.to_json()));
        return out;
      },
      py::arg("config"), py::arg("write_outputs") = false,
      "Runs an experiment config (dict or JSON text) and returns one record per seed.");

  m.def(
      "density_demo",
      [](const py::object& config) { return json_to_py(run_density_demo(parse_density_demo(py_to_json(config)))); },
      py::arg("config"));

  m.def("fnv1a_hex", &fnv1a_hex, py::arg("text"));

  py::class_<ModelFile>(m, "Model")
      .def_static("load", &load_model, py::arg("path"))
      .def("save", [](const ModelFile& f, const std::string& path) { save_model(f, path); }, py::arg("path"))
      .def_property_readonly("param_count", [](const ModelFile& f) { return model_param_count(f.model); })
      .def_property_readonly("input_dim", [](const ModelFile& f) { return model_input_dim(f.model); })
      .def_property_readonly("num_classes", [](const ModelFile& f) { return model_num_classes(f.model); })
      .def_property_readonly("config_hash", [](const ModelFile& f) { return f.config_hash; })
      .def_property_readonly("seed", [](const ModelFile& f) { return f.seed; })
      .def(
          "predict_proba",
          [](const ModelFile& f, const Array& x) {
            DenseMatrix z = to_matrix(x);
            if (!f.stats.empty()) f.stats.apply(z);
            return to_array(model_predict_proba(f.model, z));
          },
          py::arg("x"), "Class probabilities for raw inputs.")
      .def(
          "explain",
          [](const ModelFile& f, const std::vector<double>& x) {
            const DecisionTrace t = explain(f, x);
            py::list steps;
            for (const auto& s : t.steps) {
              py::dict d;
              d["gate"] = s.gate;
              d["acceptance"] = s.acceptance;
              d["mass_before"] = s.mass_before;
              d["partition"] = s.partition;
              d["mass_after"] = s.mass_after;
              d["class"] = s.cls;
              steps.append(d);
            }
            py::dict out;
            out["steps"] = steps;
            out["h"] = t.h;
            out["probs"] = t.probs;
            out["predicted"] = t.predicted;
            return out;
          },
          py::arg("x"))
      .def(
          "grid_csv",
          [](const ModelFile& f, const std::vector<double>& bounds, std::size_t resolution) {
            if (bounds.size() != 4) throw ConfigError("bounds need 4 values");
            std::ostringstream out;
            write_grid_csv(grid_eval(f, GridBounds{bounds[0], bounds[1], bounds[2], bounds[3]}, resolution), out);
            return out.str();
          },
          py::arg("bounds"), py::arg("resolution"));
}
