#include "nlssvm/kernel.hpp"

#include <cmath>
#include <string>

#include "nlssvm/error.hpp"

namespace nlssvm {

namespace {

void check_order(int order) {
  if (order < 0 || order > kMaxDerivOrder)
    throw Error(ErrorKind::UnsupportedOrder,
                "kernel derivative order " + std::to_string(order) +
                    " outside 0.." + std::to_string(kMaxDerivOrder));
}

}  // namespace

DerivPolynomial DerivPolynomial::next(double sigma2) const {
  const auto& c = coefficients_;
  std::vector<double> out(c.size() + 1, 0.0);
  for (std::size_t k = 0; k < c.size(); ++k) out[k + 1] += 2.0 * c[k] / sigma2;
  for (std::size_t k = 1; k < c.size(); ++k)
    out[k - 1] -= static_cast<double>(k) * c[k];
  return DerivPolynomial(order_ + 1, std::move(out));
}

RbfKernel::RbfKernel(double sigma2) : sigma2_(sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw Error(ErrorKind::InvalidArgument,
                "kernel bandwidth sigma2 must be positive and finite");
  polys_[0] = DerivPolynomial(0, {1.0});
  for (int a = 1; a <= kMaxDerivOrder; ++a)
    polys_[a] = polys_[a - 1].next(sigma2_);
}

double RbfKernel::eval_deriv(int order, double u, double v) const {
  check_order(order);
  const double d = u - v;
  return polys_[order](d) * std::exp(-d * d / sigma2_);
}

const DerivPolynomial& RbfKernel::polynomial(int order) const {
  check_order(order);
  return polys_[order];
}

Matrix RbfKernel::kernel_matrix(int order, std::span<const double> rows,
                                std::span<const double> cols) const {
  check_order(order);
  if (rows.empty() || cols.empty())
    throw Error(ErrorKind::InvalidArgument, "kernel_matrix needs points");
  const auto& poly = polys_[order];
  Matrix out(rows.size(), cols.size());
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double d = rows[i] - cols[j];
      out(i, j) = poly(d) * std::exp(-d * d / sigma2_);
    }
  return out;
}

}  // namespace nlssvm
