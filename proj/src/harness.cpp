#include "nlssvm/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <json.hpp>

#include "nlssvm/baselines.hpp"
#include "nlssvm/error.hpp"
#include "nlssvm/linear_solver.hpp"

namespace nlssvm {

namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string utc_timestamp(const char* format) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

StoredModel store(const PrimalModel& model) {
  StoredModel s;
  s.landmarks = model.map.landmarks();
  s.sigma2 = model.map.kernel().sigma2();
  s.drop_tol = model.map.drop_tol();
  s.omega.assign(model.omega.data(), model.omega.data() + model.omega.size());
  s.bias = model.bias;
  return s;
}

PrimalModel restore(const StoredModel& s) {
  auto map = NystromFeatureMap::build(RbfKernel(s.sigma2), s.landmarks, s.drop_tol);
  if (map.rank() != static_cast<int>(s.omega.size()))
    throw Error(ErrorKind::MissingModel, "stored weights do not match the rebuilt feature map");
  Vector omega = Eigen::Map<const Vector>(s.omega.data(), static_cast<Eigen::Index>(s.omega.size()));
  return PrimalModel{std::move(map), std::move(omega), s.bias, Vector()};
}

struct Fitted {
  std::optional<PrimalModel> model;
  Vector values;  // on the training grid
  Timings timings;
  SolverDiagnostics diagnostics;
  std::vector<double> trace;
};

Fitted fit_nls(const BenchmarkProblem& problem, const RunConfig& c,
               const std::vector<double>& grid) {
  Fitted out;
  if (problem.is_linear()) {
    const int m = c.solver == SolverKind::FullFeature ? c.n : c.m;
    auto fit = fit_linear(problem, grid, c.sampling(), m, c.sigma2, c.gamma);
    const auto report = check_kkt(fit.model, fit.system);
    out.diagnostics.kkt_relative_residual = report.relative_residual();
    out.diagnostics.kkt_condition_residual = report.max_condition_residual();
    out.diagnostics.m_eff = fit.model.map.rank();
    out.timings.train_seconds = fit.train_seconds;
    out.model = std::move(fit.model);
  } else {
    const auto start = Clock::now();
    const RbfKernel kernel(c.sigma2);
    auto map = NystromFeatureMap::build(kernel, select_landmarks(c.sampling(), grid, c.m, kernel));
    // Problem 15 goes through its hand-written Jacobian blocks.
    NewtonResult res = problem.id == 15
                           ? solve_problem15(map, grid, c.gamma, c.newton)
                           : solve_benchmark_nonlinear(problem, map, grid, c.gamma, c.newton);
    out.timings.train_seconds = seconds_since(start);
    out.diagnostics.m_eff = map.rank();
    out.diagnostics.newton_converged = res.trace.converged;
    out.diagnostics.newton_iterations = res.trace.iterations();
    out.trace = res.trace.residual_norms;
    out.model = std::move(res.model);
  }
  const auto start = Clock::now();
  out.values = predict(*out.model, 0, grid);
  out.timings.predict_seconds = seconds_since(start);
  return out;
}

Fitted march(const BenchmarkProblem& problem, const RunConfig& c) {
  const StepperConfig cfg = c.solver == SolverKind::Rk4
                                ? StepperConfig::rk4(0.0)
                                : StepperConfig::adams_bashforth(0.0, c.eab_order);
  const auto start = Clock::now();
  const Trajectory traj = integrate_problem(problem, c.n, cfg);
  const double elapsed = seconds_since(start);
  if (!traj.finite)
    throw Error(ErrorKind::NonFinite,
                "march overflowed at step " + std::to_string(traj.first_nonfinite));
  Fitted out;
  out.values = traj.values();
  // A march has no separate training phase; the one measurement fills both.
  out.timings = {elapsed, elapsed};
  return out;
}

Fitted fit(const BenchmarkProblem& problem, const RunConfig& c,
           const std::vector<double>& grid) {
  switch (c.solver) {
    case SolverKind::Nls:
    case SolverKind::FullFeature:
      return fit_nls(problem, c, grid);
    case SolverKind::Rk4:
    case SolverKind::Eab:
      return march(problem, c);
  }
  throw Error(ErrorKind::InvalidConfig, "unknown solver");
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

double get_number(const json& j, const char* key) {
  const auto& v = j.at(key);
  return v.is_null() ? NAN : v.get<double>();
}

json config_json(const RunConfig& c) {
  return {
      {"problem_id", c.problem_id},
      {"n", c.n},
      {"m", c.m},
      {"sigma2", c.sigma2},
      {"gamma", c.gamma},
      {"strategy", to_string(c.strategy)},
      {"solver", solver_name(c.solver)},
      {"eab_order", c.eab_order},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"newton",
       {{"max_iters", c.newton.max_iters},
        {"tol", c.newton.tolerance(c.gamma)},
        {"damping", c.newton.damping == NewtonOptions::Damping::Backtracking ? "backtracking"
                                                                              : "none"},
        {"require_convergence", c.newton.require_convergence}}},
  };
}

RunConfig config_from(const json& j) {
  RunConfig c;
  c.problem_id = j.at("problem_id").get<int>();
  c.n = j.at("n").get<int>();
  c.m = j.at("m").get<int>();
  c.sigma2 = j.at("sigma2").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.strategy = parse_sampling_kind(j.at("strategy").get<std::string>());
  c.solver = parse_solver(j.at("solver").get<std::string>());
  c.eab_order = j.value("eab_order", 4);
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output_dir = j.value("output_dir", std::string("results"));
  const auto& nw = j.at("newton");
  c.newton.max_iters = nw.at("max_iters").get<int>();
  c.newton.tol = nw.at("tol").get<double>();
  c.newton.damping = nw.at("damping").get<std::string>() == "backtracking"
                         ? NewtonOptions::Damping::Backtracking
                         : NewtonOptions::Damping::None;
  c.newton.require_convergence = nw.at("require_convergence").get<bool>();
  return c;
}

std::vector<double> plot_grid(const BenchmarkProblem& problem) {
  return uniform_grid(problem.t_begin, problem.t_end, kPlotPoints);
}

std::vector<PlotPoint> to_points(const BenchmarkProblem& problem,
                                 const std::vector<double>& grid, const Vector& predicted) {
  const Vector ref = reference_solution(problem, grid);
  std::vector<PlotPoint> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out[i] = {grid[i], ref[k], predicted[k], std::abs(predicted[k] - ref[k])};
  }
  return out;
}

}  // namespace

std::string_view solver_name(SolverKind kind) noexcept {
  switch (kind) {
    case SolverKind::Nls: return "nls";
    case SolverKind::FullFeature: return "full_feature";
    case SolverKind::Rk4: return "rk4";
    case SolverKind::Eab: return "eab";
  }
  return "nls";
}

SolverKind parse_solver(std::string_view name) {
  if (name == "nls") return SolverKind::Nls;
  if (name == "full_feature") return SolverKind::FullFeature;
  if (name == "rk4") return SolverKind::Rk4;
  if (name == "eab") return SolverKind::Eab;
  throw Error(ErrorKind::InvalidConfig, "unknown solver '" + std::string(name) + "'");
}

SamplingStrategy RunConfig::sampling() const {
  switch (strategy) {
    case SamplingStrategy::Kind::Random: return SamplingStrategy::random(seed);
    case SamplingStrategy::Kind::LeverageScore: return SamplingStrategy::leverage(seed);
    case SamplingStrategy::Kind::Equidistant: break;
  }
  return SamplingStrategy::equidistant();
}

RunConfig defaults_for(int problem_id, SolverKind solver) {
  const auto& p = problem_by_id(problem_id);
  RunConfig c;
  c.problem_id = problem_id;
  c.n = p.defaults.n;
  c.m = solver == SolverKind::FullFeature ? p.defaults.n : p.defaults.m;
  c.sigma2 = p.defaults.sigma2;
  c.gamma = p.defaults.gamma;
  c.solver = solver;
  if (p.defaults.newton_iters > 0) c.newton.max_iters = p.defaults.newton_iters;
  c.newton.require_convergence = false;
  return c;
}

void validate_config(const RunConfig& c) {
  const auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (c.problem_id < 1 || c.problem_id > static_cast<int>(catalog().size()))
    bad("problem id must be in 1.." + std::to_string(catalog().size()));
  const auto& p = problem_by_id(c.problem_id);
  if (c.n < 3) bad("n must be at least 3");
  if (c.solver == SolverKind::Nls || c.solver == SolverKind::FullFeature) {
    if (c.m < 1) bad("m must be positive");
    if (c.m > c.n) bad("m = " + std::to_string(c.m) + " exceeds n = " + std::to_string(c.n));
    if (!(c.sigma2 > 0.0) || !std::isfinite(c.sigma2)) bad("sigma2 must be positive");
    if (!(c.gamma > 0.0) || !std::isfinite(c.gamma)) bad("gamma must be positive");
  }
  if (c.solver == SolverKind::FullFeature) {
    if (!p.is_linear()) bad("full_feature handles linear problems only");
    if (c.n > kFullFeatureLimit)
      throw Error(ErrorKind::MemoryGuard,
                  "full_feature limited to " + std::to_string(kFullFeatureLimit) + " points");
  }
  if (c.solver == SolverKind::Eab && (c.eab_order < 2 || c.eab_order > 4))
    bad("eab order must be 2..4");
  if (!p.is_linear() && c.newton.max_iters < 1) bad("max_iters must be positive");
}

RunResult run(const RunConfig& config) {
  validate_config(config);
  const auto& problem = problem_by_id(config.problem_id);
  const auto grid = uniform_grid(problem.t_begin, problem.t_end, config.n);
  Fitted f = fit(problem, config, grid);

  RunResult r;
  r.config = config;
  r.created_at = utc_timestamp("%Y-%m-%dT%H:%M:%SZ");
  r.metrics = compute_errors(as_span(f.values), as_span(reference_solution(problem, grid)));
  r.timings = f.timings;
  r.diagnostics = f.diagnostics;
  r.newton_trace = std::move(f.trace);
  if (f.model) r.model = store(*f.model);
  return r;
}

RunResult run_recorded(const RunConfig& config) {
  try {
    return run(config);
  } catch (const Error& err) {
    RunResult r;
    r.config = config;
    r.created_at = utc_timestamp("%Y-%m-%dT%H:%M:%SZ");
    r.status = std::string(err.kind_name());
    r.message = err.what();
    r.metrics = {NAN, NAN, NAN, std::nullopt};
    r.timings = {NAN, NAN};
    if (const auto* ne = dynamic_cast<const NewtonError*>(&err))
      r.newton_trace = ne->trace().residual_norms;
    return r;
  }
}

MetricDelta compare_runs(const RunResult& a, const RunResult& b) {
  if (!a.ok() || !b.ok())
    throw Error(ErrorKind::IncompatibleRuns, "cannot compare a failed run");
  if (a.config.problem_id != b.config.problem_id || a.config.n != b.config.n)
    throw Error(ErrorKind::IncompatibleRuns, "runs differ in problem or evaluation grid");
  return compare_metrics(a.metrics, a.timings, b.metrics, b.timings);
}

std::string to_json_line(const RunResult& r) {
  json j;
  j["config"] = config_json(r.config);
  j["status"] = r.status;
  j["message"] = r.message;
  j["metrics"] = {{"mae", r.metrics.mae},
                  {"rmse", r.metrics.rmse},
                  {"linf", r.metrics.linf},
                  {"r2", opt(r.metrics.r2)}};
  j["timings"] = {{"train_seconds", r.timings.train_seconds},
                  {"predict_seconds", r.timings.predict_seconds}};
  j["newton_trace"] = r.newton_trace;
  const auto& d = r.diagnostics;
  j["diagnostics"] = {{"m_eff", d.m_eff},
                      {"kkt_relative_residual", opt(d.kkt_relative_residual)},
                      {"kkt_condition_residual", opt(d.kkt_condition_residual)},
                      {"newton_converged", opt(d.newton_converged)},
                      {"newton_iterations", opt(d.newton_iterations)}};
  if (r.model)
    j["model"] = {{"landmarks", r.model->landmarks},
                  {"sigma2", r.model->sigma2},
                  {"drop_tol", r.model->drop_tol},
                  {"omega", r.model->omega},
                  {"bias", r.model->bias}};
  else
    j["model"] = nullptr;
  j["created_at"] = r.created_at;
  j["artifact_version"] = r.artifact_version;
  return j.dump();
}

RunResult from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("malformed result record: ") + e.what());
  }
  try {
    RunResult r;
    r.config = config_from(j.at("config"));
    r.status = j.at("status").get<std::string>();
    r.message = j.value("message", std::string());
    const auto& m = j.at("metrics");
    r.metrics = {get_number(m, "mae"), get_number(m, "rmse"), get_number(m, "linf"),
                 get_opt<double>(m, "r2")};
    const auto& t = j.at("timings");
    r.timings = {get_number(t, "train_seconds"), get_number(t, "predict_seconds")};
    r.newton_trace = j.value("newton_trace", std::vector<double>());
    const auto& d = j.at("diagnostics");
    r.diagnostics.m_eff = d.value("m_eff", 0);
    r.diagnostics.kkt_relative_residual = get_opt<double>(d, "kkt_relative_residual");
    r.diagnostics.kkt_condition_residual = get_opt<double>(d, "kkt_condition_residual");
    r.diagnostics.newton_converged = get_opt<bool>(d, "newton_converged");
    r.diagnostics.newton_iterations = get_opt<int>(d, "newton_iterations");
    if (j.contains("model") && !j.at("model").is_null()) {
      const auto& mj = j.at("model");
      StoredModel s;
      s.landmarks = mj.at("landmarks").get<std::vector<double>>();
      s.sigma2 = mj.at("sigma2").get<double>();
      s.drop_tol = mj.at("drop_tol").get<double>();
      s.omega = mj.at("omega").get<std::vector<double>>();
      s.bias = mj.at("bias").get<double>();
      r.model = std::move(s);
    }
    r.created_at = j.value("created_at", std::string());
    r.artifact_version = j.value("artifact_version", std::string());
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("incomplete result record: ") + e.what());
  }
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::vector<std::string> csv_header() {
  return {"problem", "solver", "n", "m", "strategy", "seed", "status", "MAE", "RMSE",
          "Linf", "R2", "train_s", "predict_s", "m_eff", "newton_iterations",
          "newton_converged", "created_at", "message"};
}

std::vector<std::string> csv_row(const RunResult& r) {
  const auto& c = r.config;
  const auto& d = r.diagnostics;
  return {std::to_string(c.problem_id),
          std::string(solver_name(c.solver)),
          std::to_string(c.n),
          std::to_string(c.m),
          to_string(c.strategy),
          std::to_string(c.seed),
          r.status,
          format_number(r.metrics.mae),
          format_number(r.metrics.rmse),
          format_number(r.metrics.linf),
          r.metrics.r2 ? format_number(*r.metrics.r2) : "",
          format_number(r.timings.train_seconds),
          format_number(r.timings.predict_seconds),
          std::to_string(d.m_eff),
          d.newton_iterations ? std::to_string(*d.newton_iterations) : "",
          d.newton_converged ? (*d.newton_converged ? "true" : "false") : "",
          r.created_at,
          r.message};
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      out += f;
      continue;
    }
    out += '"';
    for (char ch : f) {
      if (ch == '"') out += '"';
      out += ch;
    }
    out += '"';
  }
  out += '\n';
  return out;
}

std::filesystem::path fresh_path(const std::filesystem::path& dir, const std::string& stem,
                                 const std::string& ext) {
  std::filesystem::create_directories(dir);
  const std::string base = stem + "-" + utc_timestamp("%Y%m%dT%H%M%SZ");
  auto path = dir / (base + "." + ext);
  for (int k = 1; std::filesystem::exists(path); ++k)
    path = dir / (base + "-" + std::to_string(k) + "." + ext);
  return path;
}

ResultWriter::ResultWriter(const std::filesystem::path& dir, const std::string& stem) {
  jsonl_path_ = fresh_path(dir, stem, "jsonl");
  jsonl_.open(jsonl_path_, std::ios::binary | std::ios::app);
  csv_path_ = fresh_path(dir, stem, "csv");
  csv_.open(csv_path_, std::ios::binary | std::ios::app);
  if (!jsonl_ || !csv_)
    throw Error(ErrorKind::InvalidConfig, "cannot open result files in " + dir.string());
  csv_ << csv_line(csv_header());
  csv_.flush();
}

void ResultWriter::append(const RunResult& result) {
  const std::lock_guard<std::mutex> lock(mutex_);
  jsonl_ << to_json_line(result) << '\n';
  csv_ << csv_line(csv_row(result));
  jsonl_.flush();
  csv_.flush();
}

void Overrides::apply(RunConfig& c) const {
  if (n) {
    c.n = *n;
    if (c.solver == SolverKind::FullFeature) c.m = *n;
  }
  if (m && c.solver != SolverKind::FullFeature) c.m = *m;
  if (max_iters) c.newton.max_iters = *max_iters;
  if (sigma2) c.sigma2 = *sigma2;
  if (gamma) c.gamma = *gamma;
  if (tol) c.newton.tol = *tol;
  if (strategy) c.strategy = *strategy;
  if (seed) c.seed = *seed;
}

std::vector<RunResult> bench(const std::vector<int>& problems,
                             const std::vector<SolverKind>& solvers,
                             const Overrides& overrides) {
  std::vector<RunResult> out;
  for (int id : problems)
    for (SolverKind s : solvers) {
      RunConfig c;
      try {
        c = defaults_for(id, s);
      } catch (const Error& err) {
        c.problem_id = id;
        c.solver = s;
        RunResult r;
        r.config = c;
        r.status = std::string(err.kind_name());
        r.message = err.what();
        r.metrics = {NAN, NAN, NAN, std::nullopt};
        r.timings = {NAN, NAN};
        out.push_back(std::move(r));
        continue;
      }
      overrides.apply(c);
      out.push_back(run_recorded(c));
    }
  return out;
}

SweepAxis parse_axis(std::string_view name) {
  if (name == "n") return SweepAxis::N;
  if (name == "m") return SweepAxis::M;
  if (name == "sigma2") return SweepAxis::Sigma2;
  if (name == "gamma") return SweepAxis::Gamma;
  throw Error(ErrorKind::InvalidConfig, "unknown sweep axis '" + std::string(name) + "'");
}

std::vector<SweepRow> sweep(const RunConfig& base, SweepAxis axis,
                            const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i]))
      throw Error(ErrorKind::InvalidConfig, "sweep values must be positive");
    if (i && !(values[i] > values[i - 1]))
      throw Error(ErrorKind::InvalidConfig, "sweep values must be ascending");
  }
  std::vector<SweepRow> out;
  for (double v : values) {
    RunConfig c = base;
    switch (axis) {
      case SweepAxis::N:
        c.n = static_cast<int>(std::lround(v));
        if (c.solver == SolverKind::FullFeature) c.m = c.n;
        break;
      case SweepAxis::M: c.m = static_cast<int>(std::lround(v)); break;
      case SweepAxis::Sigma2: c.sigma2 = v; break;
      case SweepAxis::Gamma: c.gamma = v; break;
    }
    out.push_back({v, run_recorded(c)});
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw Error(ErrorKind::LengthMismatch, "slope needs two or more paired values");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(x.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Vector predict_stored(const StoredModel& model, std::span<const double> points, int ell) {
  return predict(restore(model), ell, points);
}

std::vector<PlotPoint> plot_data(const RunResult& result) {
  if (!result.model)
    throw Error(ErrorKind::MissingModel, "result carries no model parameters");
  const auto& problem = problem_by_id(result.config.problem_id);
  const auto grid = plot_grid(problem);
  return to_points(problem, grid, predict(restore(*result.model), 0, grid));
}

std::vector<PlotPoint> plot_data(const RunConfig& config) {
  if (config.solver == SolverKind::Rk4 || config.solver == SolverKind::Eab) {
    validate_config(config);
    const auto& problem = problem_by_id(config.problem_id);
    RunConfig c = config;
    c.n = kPlotPoints;
    return to_points(problem, plot_grid(problem), march(problem, c).values);
  }
  return plot_data(run(config));
}

}  // namespace nlssvm
