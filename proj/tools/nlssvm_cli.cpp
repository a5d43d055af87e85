// Command-line harness: solve, bench, sweep, plot-data, validate.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "nlssvm/error.hpp"
#include "nlssvm/harness.hpp"

using namespace nlssvm;

namespace {

struct Flags {
  int problem = 0;
  std::optional<int> n, m, max_iters, eab_order;
  std::optional<double> sigma2, gamma, tol;
  std::optional<std::string> strategy;
  std::string solver = "nls";
  std::uint64_t seed = 0;
  std::string out = "results";
  bool defaults = false;
  bool backtracking = false;
  bool require_convergence = false;
};

RunConfig build_config(const Flags& f, int problem, SolverKind solver) {
  RunConfig c = defaults_for(problem, solver);
  if (!f.defaults) {
    std::vector<std::string> missing;
    if (!f.n) missing.push_back("--n");
    if (!f.m && solver != SolverKind::FullFeature && solver != SolverKind::Rk4 &&
        solver != SolverKind::Eab)
      missing.push_back("--m");
    if (!f.sigma2 && (solver == SolverKind::Nls || solver == SolverKind::FullFeature))
      missing.push_back("--sigma2");
    if (!f.gamma && (solver == SolverKind::Nls || solver == SolverKind::FullFeature))
      missing.push_back("--gamma");
    if (!missing.empty()) {
      std::string list;
      for (const auto& s : missing) list += (list.empty() ? "" : ", ") + s;
      throw Error(ErrorKind::InvalidConfig, "missing " + list + " (or pass --defaults)");
    }
  }
  Overrides o;
  o.n = f.n;
  o.m = f.m;
  o.max_iters = f.max_iters;
  o.sigma2 = f.sigma2;
  o.gamma = f.gamma;
  o.tol = f.tol;
  if (f.strategy) o.strategy = parse_sampling_kind(*f.strategy);
  o.seed = f.seed;
  o.apply(c);
  if (f.eab_order) c.eab_order = *f.eab_order;
  if (f.backtracking) c.newton.damping = NewtonOptions::Damping::Backtracking;
  c.newton.require_convergence = f.require_convergence;
  c.output_dir = f.out;
  return c;
}

void print_summary(const RunResult& r) {
  std::cout << "problem " << r.config.problem_id << " solver " << solver_name(r.config.solver)
            << " status " << r.status << " MAE " << format_number(r.metrics.mae) << " RMSE "
            << format_number(r.metrics.rmse) << " Linf " << format_number(r.metrics.linf)
            << " train_s " << format_number(r.timings.train_seconds) << " predict_s "
            << format_number(r.timings.predict_seconds) << '\n';
}

int cmd_solve(const Flags& f) {
  if (f.problem == 0) throw Error(ErrorKind::InvalidConfig, "--problem is required");
  const RunConfig c = build_config(f, f.problem, parse_solver(f.solver));
  validate_config(c);
  ResultWriter writer(c.output_dir, "solve");
  const RunResult r = run_recorded(c);
  writer.append(r);
  print_summary(r);
  std::cout << "wrote " << writer.jsonl_path().string() << '\n';
  if (!r.ok()) {
    std::cerr << "error: " << r.status << ": " << r.message << '\n';
    return 1;
  }
  return 0;
}

int cmd_bench(const Flags& f, const std::vector<int>& problems,
              const std::vector<std::string>& solver_names) {
  std::vector<SolverKind> solvers;
  for (const auto& s : solver_names) solvers.push_back(parse_solver(s));
  Flags cell = f;
  cell.defaults = true;  // bench cells start from the tabulated values
  ResultWriter writer(f.out, "bench");
  const auto table = fresh_path(f.out, "bench-table", "csv");
  std::ofstream tab(table, std::ios::binary);
  const std::vector<std::string> header{"problem", "solver", "status", "MAE",     "RMSE",
                                        "Linf",    "R2",     "train_s", "predict_s"};
  tab << csv_line(header);
  std::cout << csv_line(header);
  int failures = 0;
  for (int id : problems)
    for (SolverKind s : solvers) {
      RunResult r;
      try {
        r = run_recorded(build_config(cell, id, s));
      } catch (const Error& err) {
        r.config.problem_id = id;
        r.config.solver = s;
        r.status = std::string(err.kind_name());
        r.message = err.what();
        r.metrics = {NAN, NAN, NAN, std::nullopt};
        r.timings = {NAN, NAN};
      }
      failures += r.ok() ? 0 : 1;
      writer.append(r);
      const std::vector<std::string> row{
          std::to_string(id), std::string(solver_name(s)), r.status,
          format_number(r.metrics.mae), format_number(r.metrics.rmse),
          format_number(r.metrics.linf), r.metrics.r2 ? format_number(*r.metrics.r2) : "",
          format_number(r.timings.train_seconds), format_number(r.timings.predict_seconds)};
      tab << csv_line(row);
      std::cout << csv_line(row) << std::flush;
    }
  std::cerr << "table: " << table.string() << ", failed cells: " << failures << '\n';
  return 0;
}

int cmd_sweep(const Flags& f, const std::string& axis_name, const std::vector<double>& values) {
  if (f.problem == 0) throw Error(ErrorKind::InvalidConfig, "--problem is required");
  const SweepAxis axis = parse_axis(axis_name);
  const RunConfig base = build_config(f, f.problem, parse_solver(f.solver));
  ResultWriter writer(f.out, "sweep");
  const auto rows = sweep(base, axis, values);
  std::cout << csv_line({axis_name, "train_s", "predict_s", "MAE", "status"});
  std::vector<double> xs, ts;
  for (const auto& row : rows) {
    writer.append(row.result);
    std::cout << csv_line({format_number(row.value), format_number(row.result.timings.train_seconds),
                           format_number(row.result.timings.predict_seconds),
                           format_number(row.result.metrics.mae), row.result.status});
    if (row.result.ok()) {
      xs.push_back(row.value);
      ts.push_back(row.result.timings.train_seconds);
    }
  }
  if (xs.size() >= 2) std::cerr << "log-log slope of train_s: " << loglog_slope(xs, ts) << '\n';
  return 0;
}

int cmd_plot(const Flags& f, const std::string& result_file, int index,
             const std::string& output) {
  std::vector<PlotPoint> points;
  if (!result_file.empty()) {
    std::ifstream in(result_file);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read " + result_file);
    std::string line;
    for (int i = 0; i <= index; ++i)
      if (!std::getline(in, line))
        throw Error(ErrorKind::MissingModel, "no record " + std::to_string(index) + " in " + result_file);
    points = plot_data(from_json_line(line));
  } else {
    if (f.problem == 0) throw Error(ErrorKind::InvalidConfig, "--problem or --result is required");
    points = plot_data(build_config(f, f.problem, parse_solver(f.solver)));
  }
  std::ofstream file;
  if (!output.empty()) {
    file.open(output, std::ios::binary);
    if (!file) throw Error(ErrorKind::InvalidConfig, "cannot write " + output);
  }
  std::ostream& os = output.empty() ? std::cout : file;
  os << csv_line({"t", "y_reference", "y_predicted", "abs_error"});
  for (const auto& p : points)
    os << csv_line({format_number(p.t), format_number(p.y_reference),
                    format_number(p.y_predicted), format_number(p.abs_error)});
  return 0;
}

int cmd_validate() {
  int failed = 0;
  for (const auto& p : catalog()) {
    const auto report = validate_problem(p);
    for (const auto& c : report.checks) {
      std::cout << "problem " << p.id << ' ' << c.name << ' ' << (c.passed ? "PASS" : "FAIL")
                << ' ' << format_number(c.magnitude) << " <= " << format_number(c.threshold)
                << '\n';
    }
    failed += report.passed() ? 0 : 1;
  }
  std::cout << (failed ? "FAIL" : "PASS") << ": " << catalog().size() - failed << '/'
            << catalog().size() << " problems validated\n";
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nystrom-accelerated LS-SVM ODE solver harness"};
  app.set_config("--config", "", "TOML file of flag values; command-line flags win");
  app.fallthrough();
  app.require_subcommand(1);

  Flags f;
  app.add_option("--problem", f.problem, "Benchmark problem id (1-16)");
  app.add_option("--n", f.n, "Grid points");
  app.add_option("--m", f.m, "Landmarks");
  app.add_option("--sigma2", f.sigma2, "RBF width sigma^2");
  app.add_option("--gamma", f.gamma, "Regularization gamma");
  app.add_option("--strategy", f.strategy, "equidistant | random | leverage");
  app.add_option("--solver", f.solver, "nls | full_feature | rk4 | eab");
  app.add_option("--max-iters", f.max_iters, "Newton iteration budget");
  app.add_option("--tol", f.tol, "Newton tolerance on |F|_inf");
  app.add_option("--eab-order", f.eab_order, "Adams-Bashforth order (2-4)");
  app.add_option("--seed", f.seed, "Seed for random and leverage sampling");
  app.add_option("--out", f.out, "Directory for result files");
  app.add_flag("--defaults", f.defaults, "Take unset hyperparameters from the problem's table");
  app.add_flag("--backtracking", f.backtracking, "Halve Newton steps while |F| increases");
  app.add_flag("--require-convergence", f.require_convergence,
               "Fail when Newton misses tol within the budget");

  auto* solve = app.add_subcommand("solve", "Run one configuration");

  auto* bench_cmd = app.add_subcommand("bench", "Problems x solvers at the tabulated defaults");
  std::vector<int> problems;
  std::vector<std::string> solvers;
  bench_cmd->add_option("--problems", problems, "Problem ids")->delimiter(',');
  bench_cmd->add_option("--solvers", solvers, "Solvers")->delimiter(',');

  auto* sweep_cmd = app.add_subcommand("sweep", "One run per value along an axis");
  std::string axis;
  std::vector<double> values;
  sweep_cmd->add_option("--axis", axis, "n | m | sigma2 | gamma")->required();
  sweep_cmd->add_option("--values", values, "Ascending positive values")->required()->delimiter(',');

  auto* plot = app.add_subcommand("plot-data", "Per-point CSV on a 1000-point grid");
  std::string result_file, output;
  int index = 0;
  plot->add_option("--result", result_file, "JSONL result file with a stored model");
  plot->add_option("--index", index, "Record number within the result file");
  plot->add_option("-o,--output", output, "CSV path (default stdout)");

  auto* validate = app.add_subcommand("validate", "Check all catalog references");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*solve) return cmd_solve(f);
    if (*bench_cmd) return cmd_bench(f, problems, solvers);
    if (*sweep_cmd) return cmd_sweep(f, axis, values);
    if (*plot) return cmd_plot(f, result_file, index, output);
    if (*validate) return cmd_validate();
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind_name() << ": " << e.what() << '\n';
    return e.kind() == ErrorKind::InvalidConfig ? 2 : 1;
  }
  return 0;
}
