#pragma once

#include <span>
#include <vector>

#include "nlssvm/error.hpp"
#include "nlssvm/nystrom.hpp"
#include "nlssvm/ode_model.hpp"
#include "nlssvm/types.hpp"

namespace nlssvm {

/// y_hat(t) = omega^T phi(t) + b, plus the condition multipliers.
struct PrimalModel {
  NystromFeatureMap map;
  Vector omega;
  double bias = 0.0;
  Vector multipliers;

  double value(int ell, double t) const;
};

/// y_hat^(ell) at every point; the bias only enters ell = 0.
Vector predict(const PrimalModel& model, int ell, std::span<const double> points);

/// Points where the ODE is collocated: t_2..t_n for IVPs, t_2..t_{n-1} for
/// BVPs.
std::vector<double> constraint_points(const Conditions& conditions,
                                      std::span<const double> grid);

/// Dense KKT system of the primal problem
///
///   min 1/2 |omega|^2 + gamma/2 |D omega + c b - r|^2
///   s.t. phi^(mu)(t_c) omega + [mu = 0] b = value   (one row per condition)
///
/// with D = Psi^(p) - sum_k diag(f_k) Psi^(p-k) and c = -f_p.
struct AssembledSystem {
  Matrix matrix;
  Vector rhs;
  std::vector<double> constraint_points;
  double gamma = 0.0;
  int order = 1;
  int rank = 0;
  Matrix design;       // D, constraint points x rank
  Vector bias_column;  // c
  Vector forcing;      // r at the constraint points
  std::vector<Condition> conditions;

  Eigen::Index side() const { return matrix.rows(); }
};

AssembledSystem assemble(const LinearOdeSpec& spec, const Conditions& conditions,
                         const NystromFeatureMap& map,
                         std::span<const double> grid, double gamma);

/// LU with partial pivoting after symmetric diagonal equilibration, followed
/// by iterative refinement. Throws SingularSystem when the reciprocal
/// condition estimate of the equilibrated matrix falls below machine epsilon.
PrimalModel solve(const AssembledSystem& system, const NystromFeatureMap& map);

struct KktReport {
  double system_residual = 0.0;  // |M x - rhs|_inf
  double rhs_norm = 0.0;         // |rhs|_inf
  Vector condition_residuals;    // y_hat^(mu)(t_c) - value
  Vector ode_residuals;          // e_i over the constraint points

  double relative_residual() const {
    return rhs_norm > 0.0 ? system_residual / rhs_norm : system_residual;
  }
  double max_condition_residual() const {
    return condition_residuals.size() ? condition_residuals.cwiseAbs().maxCoeff()
                                      : 0.0;
  }
};

KktReport check_kkt(const PrimalModel& model, const AssembledSystem& system);

/// Landmark selection, feature map, assembly and solve for a catalog problem.
/// train_seconds covers all four stages.
struct LinearFit {
  PrimalModel model;
  AssembledSystem system;
  double train_seconds = 0.0;
};

LinearFit fit_linear(const BenchmarkProblem& problem, std::span<const double> grid,
                     const SamplingStrategy& strategy, int m, double sigma2,
                     double gamma, double drop_tol = kDefaultDropTol);

/// Dense solve shared by the linear and Newton paths: symmetric row-max
/// equilibration, LU with partial pivoting and iterative refinement. Throws
/// `on_singular` when the reciprocal condition estimate of the equilibrated
/// matrix drops below machine epsilon.
Vector solve_equilibrated(const Matrix& a, const Vector& rhs, ErrorKind on_singular,
                          int refinement_steps = 3);

/// Fills the condition rows: entry (mu, :) = [phi^(d)(t_c), [d = 0]].
void condition_rows(const std::vector<Condition>& conditions,
                    const NystromFeatureMap& map, Matrix& g_omega, Vector& g_bias);

}  // namespace nlssvm
