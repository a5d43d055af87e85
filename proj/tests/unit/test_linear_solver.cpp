#include <doctest.h>

#include <limits>

#include "nlssvm/error.hpp"
#include "nlssvm/linear_solver.hpp"
#include "oracles.hpp"

using namespace nlssvm;

namespace {

LinearFit fit_defaults(int id) {
  const auto& p = problem_by_id(id);
  const auto g = uniform_grid(p.t_begin, p.t_end, p.defaults.n);
  return fit_linear(p, g, SamplingStrategy::equidistant(), p.defaults.m, p.defaults.sigma2,
                    p.defaults.gamma);
}

double mae(const LinearFit& fit, const BenchmarkProblem& p, const std::vector<double>& g) {
  return (predict(fit.model, 0, g) - reference_solution(p, g)).cwiseAbs().mean();
}

}  // namespace

TEST_SUITE("linear_solver") {
  TEST_CASE("zero problem gives the zero model") {
    LinearOdeSpec spec{1, {[](double) { return 0.0; }}, [](double) { return 0.0; }};
    const auto g = uniform_grid(0.0, 1.0, 30);
    const auto map = NystromFeatureMap::build(RbfKernel(1.0), uniform_grid(0.0, 1.0, 6));
    const auto sys = assemble(spec, Conditions::ivp(0.0, {0.0}), map, g, 1e6);
    CHECK(sys.side() == map.rank() + 2);
    const auto model = solve(sys, map);
    CHECK(model.omega.cwiseAbs().maxCoeff() == 0.0);
    CHECK(model.bias == 0.0);
    CHECK(predict(model, 0, g).cwiseAbs().maxCoeff() == 0.0);
    const auto report = check_kkt(model, sys);
    CHECK(report.system_residual <= std::numeric_limits<double>::epsilon());
  }

  TEST_CASE("system sides") {
    const auto& p12 = problem_by_id(12);
    const auto g = uniform_grid(p12.t_begin, p12.t_end, 1000);
    const auto map = NystromFeatureMap::build(RbfKernel(1.0),
                                              select_landmarks(SamplingStrategy::equidistant(), g, 20, RbfKernel(1.0)));
    const auto sys = assemble(p12.linear(), p12.conditions, map, g, 1e7);
    CHECK(sys.side() == map.rank() + 3);
    if (map.rank() == 20) CHECK(sys.side() == 23);
    CHECK(sys.constraint_points.size() == 998);  // BVP drops both ends

    const auto& p2 = problem_by_id(2);
    const auto g2 = uniform_grid(p2.t_begin, p2.t_end, 100);
    const auto map2 = NystromFeatureMap::build(RbfKernel(10.0), uniform_grid(0.0, 10.0, 10));
    const auto sys2 = assemble(p2.linear(), p2.conditions, map2, g2, 1e7);
    CHECK(sys2.side() == map2.rank() + 2);
    CHECK(sys2.constraint_points.size() == 99);  // IVP drops t_1
    CHECK(sys2.matrix.allFinite());
  }

  TEST_CASE("problem 12 at defaults") {
    const auto& p = problem_by_id(12);
    const auto g = uniform_grid(p.t_begin, p.t_end, p.defaults.n);
    const auto fit = fit_defaults(12);
    CHECK(mae(fit, p, g) <= 3.2e-8);
    CHECK(check_kkt(fit.model, fit.system).max_condition_residual() <= 1e-8);
  }

  TEST_CASE("problem 1 at defaults") {
    const auto& p = problem_by_id(1);
    const auto g = uniform_grid(p.t_begin, p.t_end, p.defaults.n);
    CHECK(mae(fit_defaults(1), p, g) <= 7.9e-3);
  }

  TEST_CASE("conditions hold on every linear benchmark") {
    for (const auto& p : catalog()) {
      if (!p.is_linear()) continue;
      INFO("problem " << p.id);
      const auto fit = fit_defaults(p.id);
      const auto r = check_kkt(fit.model, fit.system);
      CHECK(r.max_condition_residual() <= 1e-8);
      // Backward stability of the dense solve: the residual is at the level
      // of rounding in M x.
      const Eigen::Index side = fit.system.side();
      Vector x(side);
      x << fit.model.omega, fit.model.bias, fit.model.multipliers;
      const Vector scale = fit.system.matrix.cwiseAbs() * x.cwiseAbs() + fit.system.rhs.cwiseAbs();
      const Vector res = (fit.system.matrix * x - fit.system.rhs).cwiseAbs();
      CHECK(res.cwiseQuotient(scale.cwiseMax(1e-300)).maxCoeff() <=
            64.0 * side * std::numeric_limits<double>::epsilon());
    }
  }

  TEST_CASE("derivative prediction and initial value on problem 2") {
    const auto& p = problem_by_id(2);
    const auto g = uniform_grid(p.t_begin, p.t_end, 1000);
    const auto fit = fit_linear(p, g, SamplingStrategy::equidistant(), 50, 10.0, 1e7);
    CHECK(fit.model.value(0, 0.0) == doctest::Approx(1.0).epsilon(1e-4));
    for (double t : {0.5, 2.0, 7.5}) {
      const double fd = oracle::derivative([&](double s) { return fit.model.value(0, s); }, t, 1e-2);
      CHECK(oracle::rel(fit.model.value(1, t), fd) <= 1e-4);
    }
  }

  TEST_CASE("more features do not hurt") {
    const auto& p = problem_by_id(2);
    const auto g = uniform_grid(p.t_begin, p.t_end, 500);
    const auto small = fit_linear(p, g, SamplingStrategy::equidistant(), 50, 10.0, 1e7);
    const auto full = fit_linear(p, g, SamplingStrategy::equidistant(), 500, 10.0, 1e7);
    CHECK(mae(full, p, g) <= mae(small, p, g) + 1e-6);
  }

  TEST_CASE("invalid input") {
    const auto& p = problem_by_id(12);
    const auto g = uniform_grid(p.t_begin, p.t_end, 50);
    const auto map = NystromFeatureMap::build(RbfKernel(1.0), uniform_grid(0.0, 1.0, 5));
    CHECK_THROWS_AS(assemble(p.linear(), p.conditions, map, g, 0.0), Error);
    LinearOdeSpec five{5, std::vector<ScalarFn>(5, [](double) { return 0.0; }), [](double) { return 0.0; }};
    try {
      assemble(five, p.conditions, map, g, 1.0);
      FAIL("expected UnsupportedOrder");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnsupportedOrder);
    }
    const std::vector<double> two{0.0, 1.0};
    CHECK_THROWS_AS(assemble(p.linear(), p.conditions, map, two, 1.0), Error);
    CHECK_THROWS_AS(fit_linear(problem_by_id(4), g, SamplingStrategy::equidistant(), 5, 1.0, 1.0), Error);
  }

  TEST_CASE("singular matrix is reported") {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 0) = 1.0;
    a(1, 1) = 1.0;
    a(2, 0) = 1.0;
    try {
      solve_equilibrated(a, Vector::Ones(3), ErrorKind::SingularSystem);
      FAIL("expected SingularSystem");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SingularSystem);
    }
  }
}
