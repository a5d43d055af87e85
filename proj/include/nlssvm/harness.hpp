#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlssvm/metrics.hpp"
#include "nlssvm/nonlinear_solver.hpp"
#include "nlssvm/nystrom.hpp"

namespace nlssvm {

inline constexpr const char* kArtifactVersion = "0.1.0";

enum class SolverKind { Nls, FullFeature, Rk4, Eab };

std::string_view solver_name(SolverKind kind) noexcept;
SolverKind parse_solver(std::string_view name);  // InvalidConfig on unknown names

struct RunConfig {
  int problem_id = 1;
  int n = 0;
  int m = 0;
  double sigma2 = 1.0;
  double gamma = 1.0;
  SamplingStrategy::Kind strategy = SamplingStrategy::Kind::Equidistant;
  SolverKind solver = SolverKind::Nls;
  int eab_order = 4;
  NewtonOptions newton;
  std::uint64_t seed = 0;
  std::string output_dir = "results";

  SamplingStrategy sampling() const;
};

/// The problem's tabulated (n, m, sigma2, gamma, iterations). Harness runs do
/// not require Newton to reach tol within the budget; the trace records
/// whether it did.
RunConfig defaults_for(int problem_id, SolverKind solver = SolverKind::Nls);

/// Throws InvalidConfig for an unknown problem, m > n, non-positive values or
/// a solver that cannot handle the problem.
void validate_config(const RunConfig& config);

/// Enough to rebuild the predictor without re-solving.
struct StoredModel {
  std::vector<double> landmarks;
  double sigma2 = 1.0;
  double drop_tol = kDefaultDropTol;
  std::vector<double> omega;
  double bias = 0.0;
};

/// y_hat^(ell) of a stored model at arbitrary points; rebuilds the feature
/// map. Throws MissingModel when the weights do not fit the rebuilt map.
Vector predict_stored(const StoredModel& model, std::span<const double> points, int ell = 0);

struct SolverDiagnostics {
  int m_eff = 0;  // retained Nystrom rank
  std::optional<double> kkt_relative_residual;
  std::optional<double> kkt_condition_residual;
  std::optional<bool> newton_converged;
  std::optional<int> newton_iterations;
};

struct RunResult {
  RunConfig config;
  std::string status = "ok";  // or the error kind name
  std::string message;
  ErrorMetrics metrics;
  Timings timings;
  std::vector<double> newton_trace;  // residual norms, nonlinear runs only
  SolverDiagnostics diagnostics;
  std::optional<StoredModel> model;
  std::string created_at;
  std::string artifact_version = kArtifactVersion;

  bool ok() const { return status == "ok"; }
};

/// Runs the configured pipeline and scores it on the training grid.
/// Solver errors propagate.
RunResult run(const RunConfig& config);
/// As run(), but a failure becomes a result with status set to the error kind.
RunResult run_recorded(const RunConfig& config);

/// Metric differences b - a and time ratios a / b. Throws IncompatibleRuns
/// unless both runs succeeded on the same problem and grid size.
MetricDelta compare_runs(const RunResult& a, const RunResult& b);

std::string to_json_line(const RunResult& result);
RunResult from_json_line(const std::string& line);

/// Columns of the per-run CSV and of the bench table.
std::vector<std::string> csv_header();
std::vector<std::string> csv_row(const RunResult& result);
std::string csv_line(const std::vector<std::string>& fields);  // RFC 4180, LF
std::string format_number(double value);                       // %.17g

/// Creates `<dir>/<stem>-<UTC timestamp>[-k].<ext>`, never reusing a name.
std::filesystem::path fresh_path(const std::filesystem::path& dir,
                                 const std::string& stem, const std::string& ext);

/// Single appender for the JSONL and CSV files of one invocation.
class ResultWriter {
 public:
  explicit ResultWriter(const std::filesystem::path& dir, const std::string& stem = "run");
  void append(const RunResult& result);
  const std::filesystem::path& jsonl_path() const { return jsonl_path_; }
  const std::filesystem::path& csv_path() const { return csv_path_; }

 private:
  std::mutex mutex_;
  std::filesystem::path jsonl_path_, csv_path_;
  std::ofstream jsonl_, csv_;
};

/// problems x solvers at defaults, with `overrides` applied to each cell.
/// Failures are recorded per cell.
struct Overrides {
  std::optional<int> n, m, max_iters;
  std::optional<double> sigma2, gamma, tol;
  std::optional<SamplingStrategy::Kind> strategy;
  std::optional<std::uint64_t> seed;
  void apply(RunConfig& config) const;
};

std::vector<RunResult> bench(const std::vector<int>& problems,
                             const std::vector<SolverKind>& solvers,
                             const Overrides& overrides = {});

enum class SweepAxis { N, M, Sigma2, Gamma };
SweepAxis parse_axis(std::string_view name);

struct SweepRow {
  double value = 0.0;
  RunResult result;
};

/// One run per value with everything else from `base`. Values must be
/// positive and ascending.
std::vector<SweepRow> sweep(const RunConfig& base, SweepAxis axis,
                            const std::vector<double>& values);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct PlotPoint {
  double t, y_reference, y_predicted, abs_error;
};

inline constexpr int kPlotPoints = 1000;

/// Evaluates a stored model on the 1000-point plotting grid. Throws
/// MissingModel when the result carries no model.
std::vector<PlotPoint> plot_data(const RunResult& result);
/// Solves `config` and evaluates on the plotting grid; marching baselines are
/// run directly on that grid.
std::vector<PlotPoint> plot_data(const RunConfig& config);

}  // namespace nlssvm
