#include "nlssvm/baselines.hpp"

#include <array>
#include <chrono>
#include <cmath>

#include "nlssvm/error.hpp"

namespace nlssvm {

namespace {

using Clock = std::chrono::steady_clock;

// Adams-Bashforth weights, newest derivative first.
constexpr std::array<std::array<double, 4>, 5> kAbWeights{{
    {0.0, 0.0, 0.0, 0.0},
    {1.0, 0.0, 0.0, 0.0},
    {3.0 / 2.0, -1.0 / 2.0, 0.0, 0.0},
    {23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0, 0.0},
    {55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0},
}};

Vector derivative(const FirstOrderForm& form, double t, const Vector& x) {
  Vector dx(x.size());
  form.rhs(t, {x.data(), static_cast<std::size_t>(x.size())},
           {dx.data(), static_cast<std::size_t>(dx.size())});
  return dx;
}

Vector rk4_step(const FirstOrderForm& form, double t, const Vector& x, double h) {
  const Vector k1 = derivative(form, t, x);
  const Vector k2 = derivative(form, t + 0.5 * h, x + 0.5 * h * k1);
  const Vector k3 = derivative(form, t + 0.5 * h, x + 0.5 * h * k2);
  const Vector k4 = derivative(form, t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

Trajectory integrate(const FirstOrderForm& form, double t_begin, double t_end,
                     const StepperConfig& config) {
  const double length = t_end - t_begin;
  const double h = config.step;
  if (!(h > 0.0) || !(length > 0.0))
    throw Error(ErrorKind::InvalidArgument, "step and interval must be positive");
  const double ratio = length / h;
  const auto steps = static_cast<long>(std::llround(ratio));
  if (steps < 1 || std::abs(static_cast<double>(steps) * h - length) > 1e-12 * length)
    throw Error(ErrorKind::InvalidArgument, "step does not divide the interval");
  if (config.method == StepperConfig::Method::AdamsBashforth &&
      (config.ab_order < 2 || config.ab_order > 4))
    throw Error(ErrorKind::InvalidArgument, "Adams-Bashforth order must be 2..4");
  if (static_cast<int>(form.initial_state.size()) != form.dimension)
    throw Error(ErrorKind::InvalidArgument, "initial state has the wrong size");

  Trajectory out;
  out.times.resize(static_cast<std::size_t>(steps + 1));
  out.states.resize(steps + 1, form.dimension);
  Vector x = Eigen::Map<const Vector>(form.initial_state.data(), form.dimension);
  out.times[0] = t_begin;
  out.states.row(0) = x.transpose();

  const int order = config.method == StepperConfig::Method::Rk4 ? 0 : config.ab_order;
  const auto& w = kAbWeights[static_cast<std::size_t>(order)];
  std::vector<Vector> history;  // newest first

  for (long k = 0; k < steps; ++k) {
    const double t = t_begin + static_cast<double>(k) * h;
    if (order == 0 || k < order - 1) {
      if (order != 0) history.insert(history.begin(), derivative(form, t, x));
      x = rk4_step(form, t, x, h);
    } else {
      history.insert(history.begin(), derivative(form, t, x));
      history.resize(static_cast<std::size_t>(order));
      Vector incr = Vector::Zero(x.size());
      for (int j = 0; j < order; ++j)
        incr += w[static_cast<std::size_t>(j)] * history[static_cast<std::size_t>(j)];
      x += h * incr;
    }
    const long row = k + 1;
    out.times[static_cast<std::size_t>(row)] =
        row == steps ? t_end : t_begin + static_cast<double>(row) * h;
    if (!x.allFinite()) {
      out.finite = false;
      out.first_nonfinite = static_cast<int>(row);
      out.times.resize(static_cast<std::size_t>(row));
      out.states.conservativeResize(row, Eigen::NoChange);
      return out;
    }
    out.states.row(row) = x.transpose();
  }
  return out;
}

Trajectory integrate_problem(const BenchmarkProblem& problem, int n,
                             const StepperConfig& config) {
  if (n < 2) throw Error(ErrorKind::InvalidCount, "grid needs at least 2 points");
  StepperConfig cfg = config;
  if (!(cfg.step > 0.0))
    cfg.step = (problem.t_end - problem.t_begin) / static_cast<double>(n - 1);
  return integrate(first_order_form(problem), problem.t_begin, problem.t_end, cfg);
}

FullFeatureResult full_feature_baseline(const BenchmarkProblem& problem, int n,
                                        double gamma, double sigma2, double drop_tol) {
  if (!problem.is_linear())
    throw Error(ErrorKind::InvalidArgument, "full-feature baseline needs a linear problem");
  if (n > kFullFeatureLimit)
    throw Error(ErrorKind::MemoryGuard,
                "full-feature baseline limited to " + std::to_string(kFullFeatureLimit) +
                    " points");
  const auto grid = uniform_grid(problem.t_begin, problem.t_end, n);
  auto fit = fit_linear(problem, grid, SamplingStrategy::equidistant(), n, sigma2,
                        gamma, drop_tol);
  const auto start = Clock::now();
  const Vector pred = predict(fit.model, 0, grid);
  const double predict_seconds =
      std::chrono::duration<double>(Clock::now() - start).count();
  (void)pred;
  return {std::move(fit.model), {fit.train_seconds, predict_seconds}};
}

}  // namespace nlssvm
