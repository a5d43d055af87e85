#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nlssvm/harness.hpp"
#include "nlssvm/metrics.hpp"
#include "nlssvm/ode_model.hpp"

namespace py = pybind11;
using namespace nlssvm;

namespace {

// Python-side exception; carries the kebab-case kind as `.kind`.
py::object error_type;

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw py::value_error("expected a one-dimensional array");
  return {a.data(), a.data() + a.size()};
}

py::dict problem_dict(const BenchmarkProblem& p) {
  py::dict d;
  d["id"] = p.id;
  d["name"] = p.name;
  d["t_begin"] = p.t_begin;
  d["t_end"] = p.t_end;
  d["order"] = p.order();
  d["linear"] = p.is_linear();
  d["kind"] = p.conditions.kind == Conditions::Kind::Ivp ? "ivp" : "bvp";
  py::dict defaults;
  defaults["n"] = p.defaults.n;
  defaults["m"] = p.defaults.m;
  defaults["sigma2"] = p.defaults.sigma2;
  defaults["gamma"] = p.defaults.gamma;
  defaults["newton_iters"] = p.defaults.newton_iters;
  d["defaults"] = defaults;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Nystrom-accelerated LS-SVM solvers for ODE benchmarks";
  m.attr("__version__") = kArtifactVersion;

  error_type = py::reinterpret_borrow<py::object>(
      py::handle(PyErr_NewException("nlssvm.NlssvmError", PyExc_RuntimeError, nullptr)));
  m.attr("NlssvmError") = error_type;
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(e.what());
      exc.attr("kind") = std::string(e.kind_name());
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<ErrorMetrics>(m, "ErrorMetrics")
      .def_readonly("mae", &ErrorMetrics::mae)
      .def_readonly("rmse", &ErrorMetrics::rmse)
      .def_readonly("linf", &ErrorMetrics::linf)
      .def_readonly("r2", &ErrorMetrics::r2)
      .def("__repr__", [](const ErrorMetrics& e) {
        return "ErrorMetrics(mae=" + format_number(e.mae) + ", rmse=" + format_number(e.rmse) +
               ", linf=" + format_number(e.linf) + ")";
      });

  py::class_<Timings>(m, "Timings")
      .def_readonly("train_seconds", &Timings::train_seconds)
      .def_readonly("predict_seconds", &Timings::predict_seconds)
      .def_property_readonly("total", &Timings::total);

  py::class_<MetricDelta>(m, "MetricDelta")
      .def_readonly("r2", &MetricDelta::r2)
      .def_readonly("mae", &MetricDelta::mae)
      .def_readonly("rmse", &MetricDelta::rmse)
      .def_readonly("linf", &MetricDelta::linf)
      .def_readonly("mae_percent", &MetricDelta::mae_percent)
      .def_readonly("rmse_percent", &MetricDelta::rmse_percent)
      .def_readonly("linf_percent", &MetricDelta::linf_percent)
      .def_readonly("speedup_total", &MetricDelta::speedup_total)
      .def_readonly("speedup_train", &MetricDelta::speedup_train);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("problem_id", &RunConfig::problem_id)
      .def_readwrite("n", &RunConfig::n)
      .def_readwrite("m", &RunConfig::m)
      .def_readwrite("sigma2", &RunConfig::sigma2)
      .def_readwrite("gamma", &RunConfig::gamma)
      .def_readwrite("eab_order", &RunConfig::eab_order)
      .def_readwrite("seed", &RunConfig::seed)
      .def_property(
          "strategy", [](const RunConfig& c) { return to_string(c.strategy); },
          [](RunConfig& c, const std::string& s) { c.strategy = parse_sampling_kind(s); })
      .def_property(
          "solver", [](const RunConfig& c) { return std::string(solver_name(c.solver)); },
          [](RunConfig& c, const std::string& s) { c.solver = parse_solver(s); })
      .def_property(
          "max_iters", [](const RunConfig& c) { return c.newton.max_iters; },
          [](RunConfig& c, int v) { c.newton.max_iters = v; })
      .def_property(
          "tol", [](const RunConfig& c) { return c.newton.tol; },
          [](RunConfig& c, double v) { c.newton.tol = v; })
      .def("validate", &validate_config)
      .def("__repr__", [](const RunConfig& c) {
        return "RunConfig(problem_id=" + std::to_string(c.problem_id) + ", solver=" +
               std::string(solver_name(c.solver)) + ", n=" + std::to_string(c.n) +
               ", m=" + std::to_string(c.m) + ")";
      });

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("config", &RunResult::config)
      .def_readonly("status", &RunResult::status)
      .def_readonly("message", &RunResult::message)
      .def_readonly("metrics", &RunResult::metrics)
      .def_readonly("timings", &RunResult::timings)
      .def_readonly("newton_trace", &RunResult::newton_trace)
      .def_readonly("created_at", &RunResult::created_at)
      .def_property_readonly("ok", &RunResult::ok)
      .def_property_readonly("m_eff", [](const RunResult& r) { return r.diagnostics.m_eff; })
      .def_property_readonly("has_model", [](const RunResult& r) { return r.model.has_value(); })
      .def(
          "predict",
          [](const RunResult& r, const py::array_t<double>& t, int derivative) {
            if (!r.model) throw Error(ErrorKind::MissingModel, "result carries no model parameters");
            const auto points = to_vector(t);
            return Vector(predict_stored(*r.model, points, derivative));
          },
          py::arg("t"), py::arg("derivative") = 0)
      .def("to_json", &to_json_line)
      .def_static("from_json", &from_json_line);

  m.def(
      "defaults",
      [](int problem, const std::string& solver) { return defaults_for(problem, parse_solver(solver)); },
      py::arg("problem"), py::arg("solver") = "nls",
      "Tabulated configuration of a benchmark problem for the given solver.");
  m.def("solve", &run, py::arg("config"), py::call_guard<py::gil_scoped_release>(),
        "Fit or march the configured solver and score it on the training grid.");
  m.def("compare", &compare_runs, py::arg("baseline"), py::arg("candidate"));

  m.def(
      "compute_errors",
      [](const py::array_t<double>& predicted, const py::array_t<double>& reference) {
        const auto p = to_vector(predicted), r = to_vector(reference);
        return compute_errors(p, r);
      },
      py::arg("predicted"), py::arg("reference"));

  m.def("catalog", [] {
    py::list out;
    for (const auto& p : catalog()) out.append(problem_dict(p));
    return out;
  });
  m.def("problem", [](int id) { return problem_dict(problem_by_id(id)); }, py::arg("id"));
  m.def(
      "reference",
      [](int id, const py::array_t<double>& t, int derivative) {
        const auto points = to_vector(t);
        return Vector(reference_solution(problem_by_id(id), points, derivative));
      },
      py::arg("problem"), py::arg("t"), py::arg("derivative") = 0,
      "Exact solution (or one of its derivatives) of a catalog problem.");
  m.def(
      "validate",
      [](int id) {
        const auto rep = validate_problem(problem_by_id(id));
        py::dict out;
        for (const auto& c : rep.checks) out[py::str(c.name)] = py::make_tuple(c.passed, c.magnitude, c.threshold);
        return py::make_tuple(rep.passed(), out);
      },
      py::arg("problem"));

  m.def(
      "plot_data",
      [](const RunConfig& config) {
        const auto pts = plot_data(config);
        const auto n = static_cast<Eigen::Index>(pts.size());
        Vector t(n), ref(n), pred(n), err(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          t[i] = pts[i].t;
          ref[i] = pts[i].y_reference;
          pred[i] = pts[i].y_predicted;
          err[i] = pts[i].abs_error;
        }
        py::dict d;
        d["t"] = t;
        d["y_reference"] = ref;
        d["y_predicted"] = pred;
        d["abs_error"] = err;
        return d;
      },
      py::arg("config"), "Reference and prediction on the 1000-point plotting grid.");
}
