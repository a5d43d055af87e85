#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nlssvm/error.hpp"
#include "nlssvm/linear_solver.hpp"
#include "nlssvm/nystrom.hpp"
#include "nlssvm/ode_model.hpp"
#include "nlssvm/types.hpp"

namespace nlssvm {

/// Unknowns of the nonlinear primal problem, laid out as
/// x = [omega (rank); b; lambda (one per condition); y_aux (constraint points)].
struct NewtonState {
  Vector omega;
  double bias = 0.0;
  Vector multipliers;
  Vector y_aux;
  int iteration = 0;
  double residual_norm = 0.0;

  Vector pack() const;
  void unpack(const Vector& x);
  Eigen::Index size() const {
    return omega.size() + 1 + multipliers.size() + y_aux.size();
  }
};

struct NewtonOptions {
  enum class Damping { None, Backtracking };
  enum class Jacobian { Analytic, FiniteDifference };
  using Start = NewtonStart;

  int max_iters = 50;
  /// Infinity-norm tolerance on F. Non-positive selects 1e-10 * (1 + gamma).
  double tol = 0.0;
  Damping damping = Damping::None;
  double shrink = 0.5;
  int max_halvings = 30;
  Jacobian jacobian = Jacobian::Analytic;
  Start start = Start::Auto;
  double warmup_switch = 0.1;
  double fd_step = 1e-6;  // relative: h_k = fd_step * (1 + |x_k|)
  /// Throw MaxItersExceeded when the budget runs out before tol is met.
  bool require_convergence = true;
  /// Residual norm treated as divergence.
  double divergence_limit = 1e12;

  double tolerance(double gamma) const { return tol > 0.0 ? tol : 1e-10 * (1.0 + gamma); }
};

struct NewtonTrace {
  std::vector<double> residual_norms;  // |F(x_k)|_inf, k = 0 .. iterations
  std::vector<double> merit_norms;     // |F(x_k)|_2, the backtracking merit
  std::vector<double> step_norms;      // |x_{k+1} - x_k|_inf
  std::vector<int> halvings;           // step halvings per step
  std::vector<bool> exact_steps;       // false for Gauss-Newton warm-up steps
  bool converged = false;
  double tol = 0.0;

  int iterations() const { return static_cast<int>(step_norms.size()); }
  double final_residual() const {
    return residual_norms.empty() ? 0.0 : residual_norms.back();
  }
};

/// Newton failure that keeps the iteration history for diagnosis.
class NewtonError : public Error {
 public:
  NewtonError(ErrorKind kind, const std::string& what, NewtonTrace trace,
              std::optional<NewtonState> state = std::nullopt)
      : Error(kind, what), trace_(std::move(trace)), state_(std::move(state)) {}
  const NewtonTrace& trace() const noexcept { return trace_; }
  const std::optional<NewtonState>& state() const noexcept { return state_; }

 private:
  NewtonTrace trace_;
  std::optional<NewtonState> state_;
};

/// Everything the residual and Jacobian need about one nonlinear problem.
struct NonlinearProblem {
  const NonlinearOdeSpec* spec = nullptr;
  std::vector<Condition> conditions;
  const NystromFeatureMap* map = nullptr;
  std::vector<double> points;   // constraint points
  std::vector<Matrix> psi;      // psi[j] = Psi^(j) over the points, j = 0..p
  Matrix g_omega;               // condition rows
  Vector g_bias;
  double gamma = 0.0;

  int order() const { return spec->order; }
  Eigen::Index rank() const { return map->rank(); }
  Eigen::Index side() const {
    return rank() + 1 + static_cast<Eigen::Index>(conditions.size()) +
           static_cast<Eigen::Index>(points.size());
  }
};

NonlinearProblem make_problem(const NonlinearOdeSpec& spec, const Conditions& cond,
                              const NystromFeatureMap& map,
                              std::span<const double> grid, double gamma);

/// Gradient of the Lagrangian
///   1/2 |omega|^2 + gamma/2 sum e_i^2 + gamma/2 sum xi_i^2 + sum lambda_mu g_mu
/// with e_i = phi^(p)_i omega - f(t_i, y_i, phi'_i omega, ..., phi^(p-1)_i omega)
/// and xi_i = y_i - phi_i omega - b; the multiplier block is the constraint
/// violation g_mu.
Vector residual(const NonlinearProblem& problem, const Vector& x);
/// Exact Jacobian of residual(); needs the second partials.
Matrix jacobian(const NonlinearProblem& problem, const Vector& x);
/// jacobian() without the terms weighted by the ODE error e; positive
/// semidefinite in the (omega, b, y) block.
Matrix gauss_newton_matrix(const NonlinearProblem& problem, const Vector& x);
/// Central-difference Jacobian of residual() with h_k = step * (1 + |x_k|).
Matrix jacobian_fd(const NonlinearProblem& problem, const Vector& x, double step);

/// Lagrangian value, used to cross-check residual() numerically.
double lagrangian(const NonlinearProblem& problem, const Vector& x);

/// First-order IVP layout: stacked [Y1 (omega); Y2 (b); Y3 (lambda); Y4 (y)].
Vector residual_first_order(const NewtonState& state, const NonlinearOdeSpec& spec,
                            const Conditions& cond, const NystromFeatureMap& map,
                            std::span<const double> grid, double gamma);
Matrix jacobian_first_order(const NewtonState& state, const NonlinearOdeSpec& spec,
                            const Conditions& cond, const NystromFeatureMap& map,
                            std::span<const double> grid, double gamma);

/// Default starting point: omega = 0, lambda = 0, b = y_aux = the initial value
/// (IVP) or the mean boundary value (BVP). ExplicitMarch instead fills y_aux
/// from an RK4 march of the first-order form on the grid.
NewtonState initial_state(const NonlinearProblem& problem,
                          const BenchmarkProblem* benchmark = nullptr,
                          NewtonInit init = NewtonInit::Constant,
                          std::span<const double> grid = {});

struct NewtonResult {
  PrimalModel model;
  NewtonState state;
  NewtonTrace trace;
};

/// Newton iteration J dx = -F from `start`. A step whose residual is not
/// finite (f evaluated outside its domain) is halved until it is, with or
/// without damping.
NewtonResult newton_solve(const NonlinearProblem& problem, NewtonState start,
                          const NewtonOptions& opts);

/// Chooses the analytic Jacobian when second partials exist and falls back
/// to finite differences otherwise.
NewtonResult solve_nonlinear(const NonlinearOdeSpec& spec, const Conditions& cond,
                             const NystromFeatureMap& map,
                             std::span<const double> grid, double gamma,
                             const NewtonOptions& opts,
                             std::optional<NewtonState> start = std::nullopt);

/// Convenience for catalog problems: honours the problem's Newton seed.
NewtonResult solve_benchmark_nonlinear(const BenchmarkProblem& problem,
                                       const NystromFeatureMap& map,
                                       std::span<const double> grid, double gamma,
                                       const NewtonOptions& opts);

/// Hand-written blocks for y'' = -y + 2 y'^2 / y with y(-1) = y(1) = q,
/// unknowns [omega; b; lambda_1; lambda_2; y_aux].
Vector residual_problem15(const Vector& x, const NystromFeatureMap& map,
                          std::span<const double> grid, double gamma, double q);
Matrix jacobian_problem15(const Vector& x, const NystromFeatureMap& map,
                          std::span<const double> grid, double gamma, double q,
                          bool curvature = true);
NewtonResult solve_problem15(const NystromFeatureMap& map,
                             std::span<const double> grid, double gamma,
                             const NewtonOptions& opts);

/// A fitted pair counts as pre-floor when its later value exceeds the
/// smallest value in the sequence by this factor.
inline constexpr double kFloorFactor = 100.0;
inline constexpr double kQuadraticThreshold = 1.7;

struct ConvergenceReport {
  double order = 0.0;      // fitted slope of log r_{k+1} against log r_k
  double constant = 0.0;   // r_{k+1} / r_k^2 on the last fitted pair
  int pairs_used = 0;
  int pre_floor_end = 0;   // index of the last residual in the fitted segment
  bool sub_quadratic = false;
  /// Same fit over the step norms |x_{k+1} - x_k|, which track the error
  /// |x_k - x*| once the iteration is local. Zero when fewer than two pairs.
  double step_order = 0.0;
  int step_pairs_used = 0;
};

/// Fits the local order over the last (up to three) residual pairs of the
/// final contracting run of exact steps, leaving out pairs that reach within
/// kFloorFactor of the smallest residual. Throws InsufficientTrace when fewer
/// than two pairs remain.
ConvergenceReport convergence_diagnostics(const NewtonTrace& trace);

}  // namespace nlssvm
