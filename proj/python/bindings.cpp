#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "horolab/acceptance.hpp"
#include "horolab/datri.hpp"
#include "horolab/error.hpp"
#include "horolab/experiment.hpp"
#include "horolab/horospherical.hpp"
#include "horolab/sampling.hpp"

namespace py = pybind11;
using namespace horolab;

namespace {

// Model descriptor from a Python dict {"model": ..., "params": {...}, "factors": [...]}.
ModelDescriptor descriptor_from(const py::dict& d) {
  ModelDescriptor out;
  out.tag = py::cast<std::string>(d["model"]);
  if (d.contains("params"))
    for (const auto& kv : py::cast<py::dict>(d["params"]))
      out.params[py::cast<std::string>(kv.first)] = py::cast<double>(kv.second);
  if (d.contains("factors"))
    for (const auto& f : py::cast<py::list>(d["factors"])) out.factors.push_back(descriptor_from(py::cast<py::dict>(f)));
  return out;
}

py::object cell_to_python(const Cell& c) {
  struct Visitor {
    py::object operator()(std::monostate) const { return py::none(); }
    py::object operator()(std::int64_t x) const { return py::int_(x); }
    py::object operator()(double x) const { return py::float_(x); }
    py::object operator()(bool x) const { return py::bool_(x); }
    py::object operator()(const std::string& s) const { return py::str(s); }
  };
  return std::visit(Visitor{}, c);
}

}  // namespace

PYBIND11_MODULE(_horolab, m) {
  m.doc() = "Horospherical geometry of model manifolds: Jacobi tensors, horospherical profiles, "
            "Busemann functions, conjugate points and D'Atri checks.";

  static py::object error_type = py::exception<Error>(m, "HorolabError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(e.what());
      exc.attr("kind") = to_string(e.kind());
      exc.attr("value") = e.value() ? py::object(py::float_(*e.value())) : py::none();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.attr("__version__") = version();

  // Manifolds ----------------------------------------------------------------------------
  py::class_<ManifoldSpec>(m, "ManifoldSpec")
      .def_property_readonly("dimension", &ManifoldSpec::dimension)
      .def_property_readonly("tag", &ManifoldSpec::tag)
      .def_property_readonly("is_product", &ManifoldSpec::is_product)
      .def_property_readonly("curvature_bound", [](const ManifoldSpec& s) -> std::optional<double> {
        if (const auto& b = s.curvature_bounds()) return b->r0;
        return std::nullopt;
      })
      .def("metric", &ManifoldSpec::metric, py::arg("point"))
      .def("in_domain", &ManifoldSpec::in_domain, py::arg("point"))
      .def("__repr__", [](const ManifoldSpec& s) { return "<ManifoldSpec " + s.tag() + ">"; });

  m.def("euclidean", &make_euclidean, py::arg("n"));
  m.def("hyperbolic", &make_hyperbolic, py::arg("n"), py::arg("k") = 1.0);
  m.def("product", &make_product, py::arg("left"), py::arg("right"));
  m.def("sl2r", &make_sl2r, py::arg("a"), py::arg("b"));
  m.def("heisenberg", &make_heisenberg, py::arg("b"));
  m.def("bump", &make_bump_metric, py::arg("n"), py::arg("amplitude"), py::arg("width"), py::arg("seed"));
  m.def("make_model", [](const py::dict& d) { return make_model(descriptor_from(d)); }, py::arg("descriptor"),
        "Builds a model from {'model': tag, 'params': {...}, 'factors': [...]}.");

  py::class_<TangentVector>(m, "TangentVector")
      .def(py::init([](const Vec& base, const Vec& components) { return TangentVector{base, components}; }),
           py::arg("base"), py::arg("components"))
      .def_readwrite("base", &TangentVector::base)
      .def_readwrite("components", &TangentVector::components)
      .def("reversed", &TangentVector::reversed);

  m.def("unit_vector", &unit_vector, py::arg("spec"), py::arg("point"), py::arg("components"));
  m.def("default_anchor", &default_anchor, py::arg("spec"));
  m.def("sample_unit_vectors", &sample_unit_vectors, py::arg("spec"), py::arg("anchor"), py::arg("count"),
        py::arg("seed"));
  m.def("orthonormal_frame", &orthonormal_frame, py::arg("spec"), py::arg("v"));
  m.def("jacobi_operator",
        [](const ManifoldSpec& s, const TangentVector& v) { return jacobi_operator(s, v, orthonormal_frame(s, v)); },
        py::arg("spec"), py::arg("v"), "R_v in orthonormal_frame(spec, v).");
  m.def("sectional_curvature", &sectional_curvature, py::arg("spec"), py::arg("point"), py::arg("u"), py::arg("w"));
  m.def("distance", &distance, py::arg("spec"), py::arg("p"), py::arg("q"));

  // Jacobi tensors -----------------------------------------------------------------------
  m.def("stable_tensor",
        [](const ManifoldSpec& s, const TangentVector& v, double tol, double r_max) {
          LimitOptions o;
          o.tol = tol;
          o.r_max = r_max;
          const StableTensorResult r = stable_tensor(integrate_geodesic(s, v, 0.0, r_max), o);
          return py::make_tuple(r.S, r.residual, r.r_used);
        },
        py::arg("spec"), py::arg("v"), py::arg("tol") = 1e-6, py::arg("r_max") = 64.0,
        "S(v) by r-doubling; returns (S, residual, r_used).");
  m.def("det_a", &det_a, py::arg("spec"), py::arg("v"), py::arg("t"), py::arg("tol") = 1e-11);

  // Horospherical profile ----------------------------------------------------------------
  py::class_<HorosphericalProfile>(m, "HorosphericalProfile")
      .def_readonly("S", &HorosphericalProfile::S)
      .def_readonly("U", &HorosphericalProfile::U)
      .def_readonly("D", &HorosphericalProfile::D)
      .def_readonly("frame", &HorosphericalProfile::frame)
      .def_readonly("h", &HorosphericalProfile::h)
      .def_readonly("h_reverse", &HorosphericalProfile::h_reverse)
      .def_readonly("det_D", &HorosphericalProfile::det_D)
      .def_readonly("trace_D", &HorosphericalProfile::trace_D)
      .def_readonly("norm_D", &HorosphericalProfile::norm_D)
      .def_readonly("rank", &HorosphericalProfile::rank)
      .def_property_readonly("det_trace_equality",
                             [](const HorosphericalProfile& p) { return p.checks.det_trace_equality; })
      .def_property_readonly("identity_residual",
                             [](const HorosphericalProfile& p) { return p.checks.h_plus_h_reverse_eq_trace_D; });

  m.def("profile", [](const ManifoldSpec& s, const TangentVector& v) { return profile(s, v); }, py::arg("spec"),
        py::arg("v"));
  m.def("profiles",
        [](const ManifoldSpec& s, const std::vector<TangentVector>& vs, int jobs) { return profiles(s, vs, {}, jobs); },
        py::arg("spec"), py::arg("vectors"), py::arg("jobs") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("busemann",
        [](const ManifoldSpec& s, const TangentVector& v, const Vec& x) { return busemann(s, v, x).value; },
        py::arg("spec"), py::arg("v"), py::arg("x"));

  // Conjugate points and D'Atri ----------------------------------------------------------
  py::class_<ConjugateScanResult>(m, "ConjugateScanResult")
      .def_readonly("t_grid", &ConjugateScanResult::t_grid)
      .def_readonly("det_values", &ConjugateScanResult::det_values)
      .def_readonly("first_conjugate_time", &ConjugateScanResult::first_conjugate_time)
      .def_readonly("truncated", &ConjugateScanResult::truncated)
      .def_property_readonly("roots", [](const ConjugateScanResult& r) {
        std::vector<double> out;
        for (const auto& z : r.zero_crossings) out.push_back(z.t);
        return out;
      });
  m.def("conjugate_scan", &conjugate_scan, py::arg("spec"), py::arg("v"), py::arg("T"), py::arg("dt") = 0.05,
        py::arg("tol") = 1e-11, py::call_guard<py::gil_scoped_release>());

  py::class_<DAtriReport>(m, "DAtriReport")
      .def_readonly("max_asymmetry", &DAtriReport::max_asymmetry)
      .def_readonly("harmonic_spread", &DAtriReport::harmonic_spread)
      .def_readonly("samples", &DAtriReport::samples)
      .def_readonly("excluded", &DAtriReport::excluded)
      .def_readonly("mean_det", &DAtriReport::mean_det);
  m.def("datri_check", &datri_check, py::arg("spec"), py::arg("vectors"), py::arg("t_grid"), py::arg("jobs") = 1,
        py::arg("tol") = 1e-11, py::call_guard<py::gil_scoped_release>());

  // Experiments --------------------------------------------------------------------------
  m.def("experiments", [] {
    py::dict out;
    for (const auto& e : experiments()) out[py::str(e.name)] = e.pipeline;
    return out;
  });
  m.def("run_config",
        [](const std::string& text, int jobs) {
          const ExperimentConfig c = parse_config(text, "<python>");
          ExperimentReport r;
          {
            py::gil_scoped_release release;
            r = run_experiment(c, jobs);
          }
          py::list rows;
          for (const auto& row : r.rows) {
            py::dict d;
            for (std::size_t i = 0; i < row.size(); ++i) d[py::str(r.columns[i])] = cell_to_python(row[i]);
            rows.append(d);
          }
          py::dict out;
          out["experiment"] = r.experiment;
          out["pass"] = r.pass;
          out["max_deviation"] = r.max_deviation;
          out["columns"] = r.columns;
          out["rows"] = rows;
          out["failures"] = r.failures;
          out["warnings"] = r.warnings;
          out["csv"] = report_csv(r);
          out["json"] = report_json(r);
          return out;
        },
        py::arg("text"), py::arg("jobs") = 1,
        "Parses a YAML/JSON experiment config, runs it and returns the report as a dict.");
  m.def("verify_paper",
        [](int jobs) {
          std::vector<CriterionResult> results;
          {
            py::gil_scoped_release release;
            results = run_acceptance(jobs);
          }
          py::list out;
          for (const auto& r : results)
            out.append(py::dict(py::arg("id") = r.id, py::arg("name") = r.name, py::arg("pass") = r.pass,
                                py::arg("detail") = r.detail));
          return out;
        },
        py::arg("jobs") = 4, "Runs the acceptance criteria; returns one dict per criterion.");
}
