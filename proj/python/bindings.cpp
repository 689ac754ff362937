#include "nctorus/acceptance.hpp"
#include "nctorus/harness.hpp"
#include "nctorus/spectral.hpp"
#include "nctorus/symbol.hpp"

#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace nct;

namespace {

// JSON crosses the boundary as text; the Python side wraps it with json.loads.
std::string report_text(const RunResult& r) { return r.report.dump(); }

RunOptions options(const std::string& out_dir, double tolerance_scale) {
  RunOptions o;
  o.out_dir = out_dir;
  o.tolerance_scale = tolerance_scale;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Noncommutative two torus: algebra, symbols and spectral checks";
  m.attr("__version__") = library_version();

  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  py::class_<NcElement>(m, "NcElement")
      .def(py::init([](double theta) { return NcElement(DeformationAngle(theta)); }), py::arg("theta"))
      .def_static("monomial",
                  [](int mm, int n, cplx c, double theta) { return make_monomial(mm, n, c, DeformationAngle(theta)); },
                  py::arg("m"), py::arg("n"), py::arg("c"), py::arg("theta"))
      .def_static("from_json", [](const std::string& s) { return nc_element_from_json(Json::parse(s)); })
      .def("to_json", [](const NcElement& a) { return to_json(a).dump(); })
      .def_property_readonly("theta", [](const NcElement& a) { return a.theta().value(); })
      .def("coeff", &NcElement::coeff)
      .def("add", &NcElement::add)
      .def("__len__", &NcElement::size)
      .def("__add__", [](const NcElement& a, const NcElement& b) { return a + b; })
      .def("__sub__", [](const NcElement& a, const NcElement& b) { return a - b; })
      .def("__mul__", [](const NcElement& a, const NcElement& b) { return mul(a, b); })
      .def("__mul__", [](const NcElement& a, cplx c) { return a * c; })
      .def("__rmul__", [](const NcElement& a, cplx c) { return c * a; })
      .def("adjoint", [](const NcElement& a) { return adjoint(a); })
      .def("trace", [](const NcElement& a) { return trace_t(a); })
      .def("delta", [](const NcElement& a, int axis) { return delta(axis, a); })
      .def("__repr__", [](const NcElement& a) { return "NcElement(" + to_string(a) + ")"; });

  m.def("golden", [] { return DeformationAngle::golden().value(); });
  m.def("max_abs_difference", &max_abs_difference);

  m.def("flat_spectrum", [](double re, double im, int n) { return flat_spectrum(ModuliPoint(re, im), n); },
        py::arg("tau_re"), py::arg("tau_im"), py::arg("bandwidth"));
  m.def(
      "weyl_slope",
      [](std::vector<double> ev, int bandwidth, double box_limit) {
        const CountingData cd(std::move(ev), bandwidth, kDefaultCeilingFraction, box_limit);
        const SlopeFit f = weyl_slope(cd);
        return py::dict(py::arg("slope") = f.slope, py::arg("stderr") = f.stderr_slope,
                        py::arg("ceiling") = cd.ceiling(), py::arg("ceiling_source") = cd.ceiling_source());
      },
      py::arg("eigenvalues"), py::arg("bandwidth"), py::arg("box_limit") = std::numeric_limits<double>::infinity());
  m.def("box_ceiling", [](double re, double im, int n) { return box_ceiling(ModuliPoint(re, im), n); });
  m.def("dixmier_estimate", [](std::vector<double> values) {
    const DixmierEstimate e = dixmier_estimate(DixmierData(std::move(values)));
    return py::dict(py::arg("value") = e.value, py::arg("drift") = e.drift, py::arg("cesaro") = e.cesaro,
                    py::arg("count") = e.count);
  });
  m.def(
      "resolvent_residue",
      [](double c0, double re, double im, double theta) {
        return residue(classicalize_resolvent(c0, ModuliPoint(re, im), 2, DeformationAngle(theta)));
      },
      py::arg("c0") = 1.0, py::arg("tau_re") = 0.0, py::arg("tau_im") = 1.0, py::arg("theta") = 0.5);
  m.def("compose_json", [](const std::string& p, const std::string& q, int cutoff) {
    return to_json(compose(graded_symbol_from_json(Json::parse(p)), graded_symbol_from_json(Json::parse(q)), cutoff))
        .dump();
  });

  m.def("default_config", [] { return emit_config(default_config()).dump(); });
  m.def("normalize_config", [](const std::string& text) { return emit_config(load_config(text)).dump(); });
  auto runner = [&m](const char* name, RunResult (*fn)(const ExperimentConfig&, const RunOptions&)) {
    m.def(
        name,
        [fn](const std::string& config, const std::string& out_dir, double scale) {
          const RunResult r = fn(load_config(config), options(out_dir, scale));
          return py::make_tuple(r.pass, report_text(r));
        },
        py::arg("config"), py::arg("out_dir"), py::arg("tolerance_scale") = 1.0);
  };
  runner("run_weyl", &run_weyl);
  runner("run_heat", &run_heat);
  runner("run_residue", &run_residue);
  runner("run_connes_trace", &run_connes_trace);

  m.def(
      "run_criterion",
      [](int id, double scale) {
        const CriterionResult r = run_criterion(id, scale);
        return py::dict(py::arg("id") = r.id, py::arg("name") = r.name, py::arg("pass") = r.pass,
                        py::arg("detail") = r.detail, py::arg("seconds") = r.seconds);
      },
      py::arg("id"), py::arg("tolerance_scale") = 1.0);
}
