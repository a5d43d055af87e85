#include <doctest.h>

#include <cmath>

#include "nlssvm/baselines.hpp"
#include "nlssvm/error.hpp"

using namespace nlssvm;

namespace {

double max_error(const BenchmarkProblem& p, int steps, const StepperConfig& base) {
  StepperConfig cfg = base;
  cfg.step = (p.t_end - p.t_begin) / steps;
  const auto traj = integrate(first_order_form(p), p.t_begin, p.t_end, cfg);
  const Vector ref = reference_solution(p, traj.times);
  return (traj.values() - ref).cwiseAbs().maxCoeff();
}

double fitted_order(const BenchmarkProblem& p, const StepperConfig& cfg, std::vector<int> steps) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int s : steps) {
    const double lx = std::log((p.t_end - p.t_begin) / s);
    const double ly = std::log(max_error(p, s, cfg));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(steps.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("constant solution stays constant") {
    FirstOrderForm form;
    form.dimension = 1;
    form.rhs = [](double, std::span<const double>, std::span<double> dx) { dx[0] = 0.0; };
    form.initial_state = {2.5};
    for (auto cfg : {StepperConfig::rk4(0.1), StepperConfig::adams_bashforth(0.1, 2),
                     StepperConfig::adams_bashforth(0.1, 4)}) {
      const auto traj = integrate(form, 0.0, 1.0, cfg);
      CHECK(traj.finite);
      CHECK(traj.times.size() == 11);
      CHECK(traj.values().cwiseAbs().maxCoeff() == 2.5);
      CHECK(traj.values().minCoeff() == 2.5);
    }
  }

  TEST_CASE("problem 2 with RK4 at h = 1e-3") {
    const auto& p = problem_by_id(2);
    const auto traj = integrate(first_order_form(p), p.t_begin, p.t_end, StepperConfig::rk4(10.0 / 10000));
    const Vector ref = reference_solution(p, traj.times);
    CHECK((traj.values() - ref).cwiseAbs().mean() <= 1.5e-6);
  }

  TEST_CASE("RK4 halving the step divides the error by about 16") {
    const auto& p = problem_by_id(2);
    const double coarse = max_error(p, 200, StepperConfig::rk4(0));
    const double fine = max_error(p, 400, StepperConfig::rk4(0));
    CHECK(coarse / fine == doctest::Approx(16.0).epsilon(0.25));
    CHECK(fitted_order(p, StepperConfig::rk4(0), {100, 200, 400, 800}) >= 3.6);
    CHECK(fitted_order(p, StepperConfig::rk4(0), {100, 200, 400, 800}) <= 4.4);
  }

  TEST_CASE("Adams-Bashforth orders") {
    const auto& p = problem_by_id(2);
    for (int k = 2; k <= 4; ++k) {
      const double order = fitted_order(p, StepperConfig::adams_bashforth(0, k), {200, 400, 800, 1600});
      INFO("AB" << k);
      CHECK(std::abs(order - k) <= 0.5);
    }
  }

  TEST_CASE("higher-order problems return the first component") {
    const auto& p = problem_by_id(9);
    const auto traj = integrate_problem(p, 1001, StepperConfig::rk4(0));
    CHECK(traj.states.cols() == 2);
    CHECK((traj.values() - reference_solution(p, traj.times)).cwiseAbs().maxCoeff() <= 1e-8);
  }

  TEST_CASE("BVP shooting uses the reference slope") {
    const auto& p = problem_by_id(12);
    const auto traj = integrate_problem(p, 1001, StepperConfig::rk4(0));
    CHECK(std::abs(traj.values()[1000]) <= 1e-8);
  }

  TEST_CASE("overflow is reported, not thrown") {
    FirstOrderForm form;
    form.dimension = 1;
    form.rhs = [](double, std::span<const double> x, std::span<double> dx) { dx[0] = -1e6 * x[0]; };
    form.initial_state = {1.0};
    const auto traj = integrate(form, 0.0, 1.0, StepperConfig::rk4(0.01));
    CHECK_FALSE(traj.finite);
    CHECK(traj.first_nonfinite > 0);
    CHECK(static_cast<int>(traj.times.size()) == traj.first_nonfinite);
  }

  TEST_CASE("step must divide the interval") {
    const auto& p = problem_by_id(2);
    CHECK_THROWS_AS(integrate(first_order_form(p), 0.0, 1.0, StepperConfig::rk4(0.3)), Error);
    CHECK_THROWS_AS(integrate(first_order_form(p), 0.0, 1.0, StepperConfig::adams_bashforth(0.1, 5)), Error);
  }

  TEST_CASE("full-feature baseline") {
    const auto& p2 = problem_by_id(2);
    const auto grid = uniform_grid(p2.t_begin, p2.t_end, 800);
    const auto full = full_feature_baseline(p2, 800, 1e7, 10.0);
    const auto small = fit_linear(p2, grid, SamplingStrategy::equidistant(), 50, 10.0, 1e7);
    const Vector ref = reference_solution(p2, grid);
    CHECK((predict(full.model, 0, grid) - ref).cwiseAbs().mean() <= 1e-4);
    CHECK((predict(small.model, 0, grid) - ref).cwiseAbs().mean() <= 1e-4);
    CHECK(full.model.map.landmark_count() == 800);

    // Same landmarks as an m = n equidistant run, so the same numbers.
    const auto& p12 = problem_by_id(12);
    const auto g20 = uniform_grid(p12.t_begin, p12.t_end, 20);
    const auto a = full_feature_baseline(p12, 20, 1e7, 1.0);
    const auto b = fit_linear(p12, g20, SamplingStrategy::equidistant(), 20, 1.0, 1e7);
    CHECK(a.model.omega == b.model.omega);
    CHECK(a.model.bias == b.model.bias);

    try {
      full_feature_baseline(p2, kFullFeatureLimit + 1, 1e7, 10.0);
      FAIL("expected MemoryGuard");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MemoryGuard);
    }
    CHECK_THROWS_AS(full_feature_baseline(problem_by_id(4), 100, 1e6, 10.0), Error);
  }

  TEST_CASE("problem 12 full-feature stays within 10x of the Nystrom run") {
    const auto& p = problem_by_id(12);
    const auto grid = uniform_grid(p.t_begin, p.t_end, 1000);
    const Vector ref = reference_solution(p, grid);
    const auto full = full_feature_baseline(p, 1000, 1e7, 1.0);
    const auto small = fit_linear(p, grid, SamplingStrategy::equidistant(), 20, 1.0, 1e7);
    const double mf = (predict(full.model, 0, grid) - ref).cwiseAbs().mean();
    const double ms = (predict(small.model, 0, grid) - ref).cwiseAbs().mean();
    CHECK(mf <= 10.0 * ms);
  }
}
