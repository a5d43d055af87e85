#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nlssvm/types.hpp"

namespace nlssvm {

using ScalarFn = std::function<double(double)>;

/// y^(p) = sum_{k=1..p} f_k(t) y^(p-k) + r(t).
struct LinearOdeSpec {
  int order = 1;
  std::vector<ScalarFn> coeffs;  // f_1 .. f_p
  ScalarFn forcing;
};

/// The state handed to a nonlinear right-hand side is (y, y', ..., y^(p-1)).
using RhsFn = std::function<double(double t, std::span<const double> state)>;
/// Writes df/dstate_j, j = 0..p-1.
using RhsGradFn = std::function<void(double t, std::span<const double> state,
                                     std::span<double> grad)>;
/// Writes d2f/(dstate_i dstate_j) into a row-major p x p buffer.
using RhsHessFn = std::function<void(double t, std::span<const double> state,
                                     std::span<double> hess)>;

/// y^(p) = f(t, y, y', ..., y^(p-1)).
struct NonlinearOdeSpec {
  int order = 1;
  RhsFn rhs;
  RhsGradFn partials;
  RhsHessFn second_partials;  // optional; enables exact Newton Jacobians
};

/// y^(derivative)(point) = value.
struct Condition {
  double point = 0.0;
  int derivative = 0;
  double value = 0.0;
};

struct Conditions {
  enum class Kind { Ivp, Bvp };
  Kind kind = Kind::Ivp;
  std::vector<Condition> items;

  static Conditions ivp(double t0, std::vector<double> values);
  /// Value conditions at both ends.
  static Conditions bvp(double t0, double q0, double t1, double q1);
};

struct ProblemDefaults {
  int n = 1000;
  int m = 50;
  double sigma2 = 1.0;
  double gamma = 1e7;
  int newton_iters = 0;  // 0 for linear problems
};

/// How the auxiliary Newton unknowns are seeded.
enum class NewtonInit {
  Constant,       // omega = 0, b = y_i = v_1 (IVP) or mean boundary value (BVP)
  ExplicitMarch,  // y_i from an explicit RK4 march of the ODE on the grid
};

/// Newton: exact steps throughout. GaussNewton: drop the curvature terms
/// until one step cuts |F|_inf by the warm-up factor, then take exact steps.
/// Auto defers to the problem's hint and otherwise means Newton.
enum class NewtonStart { Auto, Newton, GaussNewton };

struct BenchmarkProblem {
  int id = 0;
  std::string name;
  double t_begin = 0.0;
  double t_end = 1.0;
  std::variant<LinearOdeSpec, NonlinearOdeSpec> spec;
  Conditions conditions;
  /// Exact solution derivative y*^(ell)(t), ell = 0..4.
  std::function<double(int ell, double t)> reference;
  ProblemDefaults defaults;
  /// y^(p)(t_begin) along the solution when the coefficients are singular
  /// at t_begin; consumed only by the marching integrators.
  std::optional<double> left_limit_highest;
  NewtonInit newton_init = NewtonInit::Constant;
  NewtonStart newton_start = NewtonStart::Newton;

  int order() const;
  bool is_linear() const {
    return std::holds_alternative<LinearOdeSpec>(spec);
  }
  const LinearOdeSpec& linear() const { return std::get<LinearOdeSpec>(spec); }
  const NonlinearOdeSpec& nonlinear() const {
    return std::get<NonlinearOdeSpec>(spec);
  }
};

/// The sixteen benchmark problems, indexed by id - 1.
const std::vector<BenchmarkProblem>& catalog();
/// Throws InvalidConfig for ids outside 1..16.
const BenchmarkProblem& problem_by_id(int id);

/// Uniform grid of n points over the problem domain, endpoints included.
std::vector<double> uniform_grid(double t_begin, double t_end, int n);

/// y*(t) for every point. Throws OutOfDomain for points outside the domain.
Vector reference_solution(const BenchmarkProblem& problem,
                          std::span<const double> points, int ell = 0);

/// Residual y^(p) - f(...) of an arbitrary trajectory given its derivatives
/// derivs[j] = y^(j)(t), j = 0..p.
double ode_residual(const BenchmarkProblem& problem, double t,
                    std::span<const double> derivs);

/// First-order companion system of a problem, state (y, ..., y^(p-1)).
struct FirstOrderForm {
  int dimension = 1;
  std::function<void(double t, std::span<const double> state,
                      std::span<double> dstate)>
      rhs;
  /// From the conditions for IVPs; from the reference derivatives at t_begin
  /// for BVPs (shooting with the known slope).
  std::vector<double> initial_state;
};

FirstOrderForm first_order_form(const BenchmarkProblem& problem);

/// Adaptive Dormand-Prince integration of an IVP at abs/rel tolerance tol.
/// Throws InvalidArgument for BVPs.
Vector integrate_reference(const BenchmarkProblem& problem,
                           std::span<const double> points, double tol = 1e-12);

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double magnitude = 0.0;
  double threshold = 0.0;
};

struct ValidationReport {
  int problem_id = 0;
  std::vector<ValidationCheck> checks;

  bool passed() const;
  const ValidationCheck* find(const std::string& name) const;
};

/// Substitutes the reference into the ODE (200 interior points, scaled by
/// max |y^(p)|, threshold 1e-8), checks the conditions (1e-10) and, for
/// nonlinear problems, the supplied partials against finite differences.
ValidationReport validate_problem(const BenchmarkProblem& problem);

}  // namespace nlssvm
