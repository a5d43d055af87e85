#include <doctest.h>

#include "nlssvm/error.hpp"
#include "nlssvm/ode_model.hpp"

using namespace nlssvm;

namespace {

// Substitutes an exact solution into a linear spec: max |y'' - f1 y' - f2 y - r|.
double linear_defect(const BenchmarkProblem& p, double (*y)(int, double)) {
  const auto& s = p.linear();
  double worst = 0.0;
  for (double t : uniform_grid(p.t_begin, p.t_end, 101)) {
    double rhs = s.forcing(t);
    for (int k = 1; k <= s.order; ++k) rhs += s.coeffs[static_cast<std::size_t>(k - 1)](t) * y(s.order - k, t);
    worst = std::max(worst, std::abs(y(s.order, t) - rhs));
  }
  return worst;
}

}  // namespace

TEST_SUITE("ode_model") {
  TEST_CASE("catalog shape") {
    REQUIRE(catalog().size() == 16);
    for (int id = 1; id <= 16; ++id) {
      const auto& p = problem_by_id(id);
      CHECK(p.id == id);
      CHECK(static_cast<int>(p.conditions.items.size()) == p.order());
      CHECK(p.defaults.m <= p.defaults.n);
    }
    CHECK_THROWS_AS(problem_by_id(0), Error);
    CHECK_THROWS_AS(problem_by_id(17), Error);
    CHECK(problem_by_id(16).order() == 4);
    for (int id : {4, 5, 6, 14, 15}) CHECK_FALSE(problem_by_id(id).is_linear());
  }

  TEST_CASE("independent reference solutions") {
    // Closed forms worked out by hand, not read from the catalog.
    const double c = (2.0 - std::cos(1.0)) / std::sin(1.0);
    static double c12;
    c12 = c;
    const auto y2 = +[](int ell, double t) { return (ell % 2 ? -1.0 : 1.0) * std::exp(-t); };
    const auto y12 = +[](int ell, double t) {
      switch (ell) {
        case 0: return 2.0 - std::cos(t) - c12 * std::sin(t);
        case 1: return std::sin(t) - c12 * std::cos(t);
        default: return std::cos(t) + c12 * std::sin(t);
      }
    };
    const auto y9 = +[](int ell, double t) {
      const double e = std::exp(-2.0 * t);
      switch (ell) {
        case 0: return (1.0 + 3.0 * t) * e;
        case 1: return (1.0 - 6.0 * t) * e;
        default: return (-8.0 + 12.0 * t) * e;
      }
    };
    CHECK(linear_defect(problem_by_id(2), y2) <= 1e-12);
    CHECK(linear_defect(problem_by_id(12), y12) <= 1e-12);
    CHECK(linear_defect(problem_by_id(9), y9) <= 1e-12);

    const auto g = uniform_grid(0.0, 1.0, 11);
    const Vector ref12 = reference_solution(problem_by_id(12), g);
    for (std::size_t i = 0; i < g.size(); ++i)
      CHECK(ref12[static_cast<Eigen::Index>(i)] == doctest::Approx(y12(0, g[i])).epsilon(1e-13));
  }

  TEST_CASE("reference values at the conditions") {
    const std::vector<double> zero{0.0};
    CHECK(reference_solution(problem_by_id(2), zero)[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(reference_solution(problem_by_id(4), zero)[0] == doctest::Approx(1.0).epsilon(1e-15));
    const std::vector<double> ends{-1.0, 1.0};
    const Vector y15 = reference_solution(problem_by_id(15), ends);
    CHECK(y15[0] == doctest::Approx(0.324027137).epsilon(1e-12));
    CHECK(y15[1] == doctest::Approx(0.324027137).epsilon(1e-12));
  }

  TEST_CASE("reference is deterministic") {
    for (int id : {1, 4, 6}) {
      const auto& p = problem_by_id(id);
      const auto g = uniform_grid(p.t_begin, p.t_end, 57);
      CHECK(reference_solution(p, g) == reference_solution(p, g));
    }
  }

  TEST_CASE("reference rejects points outside the domain") {
    const auto& p = problem_by_id(2);
    const std::vector<double> outside{p.t_end + 1.0};
    CHECK_THROWS_AS(reference_solution(p, outside), Error);
  }

  TEST_CASE("every catalog entry validates") {
    for (const auto& p : catalog()) {
      const auto report = validate_problem(p);
      INFO("problem " << p.id);
      CHECK(report.passed());
      const auto* res = report.find("ode-residual");
      REQUIRE(res != nullptr);
      CHECK(res->magnitude <= 1e-8);
    }
    CHECK(validate_problem(problem_by_id(2)).find("ode-residual")->magnitude <= 1e-12);
  }

  TEST_CASE("corrupted forcing fails the residual check only") {
    BenchmarkProblem p = problem_by_id(2);
    auto spec = p.linear();
    spec.forcing = [](double) { return 1e-3; };
    p.spec = spec;
    const auto report = validate_problem(p);
    CHECK_FALSE(report.find("ode-residual")->passed);
    CHECK(report.find("conditions")->passed);
  }

  TEST_CASE("adaptive reference integrator agrees with closed forms") {
    const auto& p = problem_by_id(2);
    const auto g = uniform_grid(p.t_begin, p.t_end, 50);
    const Vector a = integrate_reference(p, g, 1e-12);
    const Vector b = reference_solution(p, g);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK_THROWS_AS(integrate_reference(problem_by_id(12), g), Error);
  }

  TEST_CASE("first-order form of a second-order problem") {
    const auto& p = problem_by_id(9);
    const auto form = first_order_form(p);
    REQUIRE(form.dimension == 2);
    CHECK(form.initial_state[0] == 1.0);
    CHECK(form.initial_state[1] == 1.0);
    std::vector<double> x{1.0, 1.0}, dx(2);
    form.rhs(0.0, x, dx);
    CHECK(dx[0] == 1.0);
    CHECK(dx[1] == doctest::Approx(-8.0));  // -4 y' - 4 y
  }

  TEST_CASE("uniform grid") {
    const auto g = uniform_grid(0.0, 10.0, 7);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == 10.0);
    CHECK_THROWS_AS(uniform_grid(0.0, 1.0, 1), Error);
  }
}
