#include <doctest.h>

#include <random>

#include "nlssvm/error.hpp"
#include "nlssvm/kernel.hpp"
#include "oracles.hpp"

using namespace nlssvm;

TEST_SUITE("kernel") {
  TEST_CASE("values") {
    CHECK(RbfKernel(1.0).eval(0.0, 0.0) == 1.0);
    CHECK(RbfKernel(1.0).eval(1.0, 0.0) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
    CHECK(RbfKernel(10.0).eval(2.0, -1.0) == doctest::Approx(0.40656965974059911).epsilon(1e-15));
    const RbfKernel k(2.5);
    CHECK(k.eval(0.3, -1.1) == k.eval(-1.1, 0.3));
  }

  TEST_CASE("rejects non-positive width") {
    CHECK_THROWS_AS(RbfKernel(0.0), Error);
    CHECK_THROWS_AS(RbfKernel(-1.0), Error);
  }

  TEST_CASE("derivative closed forms") {
    const RbfKernel k(1.0);
    CHECK(k.eval_deriv(1, 0.4, 0.4) == 0.0);
    CHECK(k.eval_deriv(2, 0.0, 0.0) == doctest::Approx(-2.0).epsilon(1e-15));
    // P4(d) = 16 d^4 / s^4 - 48 d^2 / s^3 + 12 / s^2 at d = 1, s = 1.
    CHECK(k.eval_deriv(4, 1.0, 0.0) == doctest::Approx((16.0 - 48.0 + 12.0) * std::exp(-1.0)).epsilon(1e-14));

    // First and second orders against the typeset expressions at sigma2 = 3.
    const RbfKernel k3(3.0);
    for (double d : {-2.0, -0.3, 0.0, 0.7, 1.9}) {
      const double kv = std::exp(-d * d / 3.0);
      CHECK(k3.eval_deriv(1, d, 0.0) == doctest::Approx(2.0 * d / 3.0 * kv).epsilon(1e-15));
      CHECK(k3.eval_deriv(2, d, 0.0) ==
            doctest::Approx((4.0 * d * d / 9.0 - 2.0 / 3.0) * kv).epsilon(1e-14));
    }
  }

  TEST_CASE("each order is the finite difference of the previous") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (double s2 : {0.5, 1.0, 10.0}) {
      const RbfKernel k(s2);
      const double sigma = std::sqrt(s2);
      for (int trial = 0; trial < 100; ++trial) {
        const double u = 3.0 * unit(rng);
        const double v = u + 3.0 * sigma * unit(rng);
        for (int a = 0; a < 4; ++a) {
          const double exact = k.eval_deriv(a + 1, u, v);
          const double fd = oracle::derivative(
              [&](double x) { return k.eval_deriv(a, u, x); }, v, 1e-2 * sigma);
          if (std::abs(exact) > 1e-8) CHECK(oracle::rel(exact, fd) <= 1e-4);
        }
      }
    }
  }

  TEST_CASE("recursion coefficients") {
    const RbfKernel k(2.0);
    const auto& p2 = k.polynomial(2).coefficients();
    REQUIRE(p2.size() >= 3);
    CHECK(p2[0] == doctest::Approx(-1.0));  // -2 / s
    CHECK(p2[1] == doctest::Approx(0.0));
    CHECK(p2[2] == doctest::Approx(1.0));   // 4 / s^2
    CHECK_THROWS_AS((void)k.eval_deriv(5, 0.0, 0.0), Error);
  }

  TEST_CASE("kernel matrix") {
    const RbfKernel k(1.0);
    const std::vector<double> one{0.0};
    CHECK(k.kernel_matrix(0, one, one)(0, 0) == 1.0);

    std::vector<double> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(0.25 * i);
    const Matrix g = k.kernel_matrix(0, pts, pts);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * 40);

    const std::vector<double> three{-0.5, 0.1, 0.8};
    const Matrix d2 = k.kernel_matrix(2, three, three);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double fd = oracle::derivative(
            [&](double x) {
              return oracle::derivative([&](double y) { return k.eval(three[i], y); }, x, 1e-2);
            },
            three[j], 1e-2);
        CHECK(oracle::rel(d2(i, j), fd) <= 1e-5);
      }
  }
}
