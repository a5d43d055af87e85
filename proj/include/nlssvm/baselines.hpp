#pragma once

#include <vector>

#include "nlssvm/linear_solver.hpp"
#include "nlssvm/ode_model.hpp"
#include "nlssvm/types.hpp"

namespace nlssvm {

struct StepperConfig {
  enum class Method { Rk4, AdamsBashforth };

  Method method = Method::Rk4;
  int ab_order = 4;  // 2..4; the first ab_order - 1 steps use RK4
  double step = 0.0;

  static StepperConfig rk4(double h) { return {Method::Rk4, 4, h}; }
  static StepperConfig adams_bashforth(double h, int order = 4) {
    return {Method::AdamsBashforth, order, h};
  }
};

/// Fixed-step samples of the companion system. When the state overflows the
/// march stops and `finite` is cleared; the samples taken so far are kept.
struct Trajectory {
  std::vector<double> times;
  Matrix states;  // row k = state at times[k]
  bool finite = true;
  int first_nonfinite = -1;

  /// First component, i.e. y itself.
  Vector values() const { return states.col(0); }
};

/// Marches from t_begin to t_end. The step must divide the interval length
/// to within 1e-12 (relative); throws InvalidArgument otherwise.
Trajectory integrate(const FirstOrderForm& form, double t_begin, double t_end,
                     const StepperConfig& config);

/// Marches a catalog problem on the uniform n-point grid of its domain. BVPs
/// start from the reference slope at t_begin (shooting with the known slope).
Trajectory integrate_problem(const BenchmarkProblem& problem, int n,
                             const StepperConfig& config);

struct BaselineTimings {
  double train_seconds = 0.0;
  double predict_seconds = 0.0;
};

struct FullFeatureResult {
  PrimalModel model;
  BaselineTimings timings;
};

/// Largest grid accepted by the m = n baseline.
inline constexpr int kFullFeatureLimit = 5000;

/// The Nystrom pipeline with every grid point as a landmark. Linear problems
/// only; throws MemoryGuard above kFullFeatureLimit points.
FullFeatureResult full_feature_baseline(const BenchmarkProblem& problem, int n,
                                        double gamma, double sigma2,
                                        double drop_tol = kDefaultDropTol);

}  // namespace nlssvm
