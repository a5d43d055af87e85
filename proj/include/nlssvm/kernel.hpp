#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "nlssvm/types.hpp"

namespace nlssvm {

/// Polynomial P_a in d = u - v such that d^a K / dv^a = P_a(d) K(u, v).
/// Coefficients are stored in ascending powers of d.
class DerivPolynomial {
 public:
  DerivPolynomial() = default;
  DerivPolynomial(int order, std::vector<double> coefficients)
      : order_(order), coefficients_(std::move(coefficients)) {}

  /// P_{a+1}(d) = (2d / sigma2) P_a(d) - P_a'(d).
  DerivPolynomial next(double sigma2) const;

  double operator()(double d) const noexcept {
    double acc = 0.0;
    for (auto it = coefficients_.rbegin(); it != coefficients_.rend(); ++it)
      acc = acc * d + *it;
    return acc;
  }

  int order() const noexcept { return order_; }
  const std::vector<double>& coefficients() const noexcept {
    return coefficients_;
  }

 private:
  int order_ = 0;
  std::vector<double> coefficients_{1.0};
};

/// Gaussian RBF kernel K(u, v) = exp(-(u - v)^2 / sigma2) with closed-form
/// derivatives in the second argument up to order four.
class RbfKernel {
 public:
  explicit RbfKernel(double sigma2);

  double sigma2() const noexcept { return sigma2_; }

  double eval(double u, double v) const noexcept {
    const double d = u - v;
    return std::exp(-d * d / sigma2_);
  }

  /// d^order K(u, v) / dv^order.
  double eval_deriv(int order, double u, double v) const;

  const DerivPolynomial& polynomial(int order) const;

  /// matrix(i, j) = eval_deriv(order, rows[i], cols[j]).
  Matrix kernel_matrix(int order, std::span<const double> rows,
                       std::span<const double> cols) const;

 private:
  double sigma2_;
  std::array<DerivPolynomial, kMaxDerivOrder + 1> polys_;
};

}  // namespace nlssvm
