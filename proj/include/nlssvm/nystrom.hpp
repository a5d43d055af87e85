#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nlssvm/kernel.hpp"
#include "nlssvm/types.hpp"

namespace nlssvm {

/// Relative eigenvalue cutoff used when none is given. Eigenvalues below
/// eps * max are at the eigensolver's own error level.
inline constexpr double kDefaultDropTol = std::numeric_limits<double>::epsilon();

struct SamplingStrategy {
  enum class Kind { Equidistant, Random, LeverageScore };

  Kind kind = Kind::Equidistant;
  std::uint64_t seed = 0;
  double ridge = 1e-6;

  static SamplingStrategy equidistant() { return {}; }
  static SamplingStrategy random(std::uint64_t seed) {
    return {Kind::Random, seed, 1e-6};
  }
  static SamplingStrategy leverage(std::uint64_t seed, double ridge = 1e-6) {
    return {Kind::LeverageScore, seed, ridge};
  }
};

std::string to_string(SamplingStrategy::Kind kind);
SamplingStrategy::Kind parse_sampling_kind(const std::string& name);

/// Picks m distinct points of a strictly increasing grid, returned sorted.
/// Leverage-score sampling needs the kernel; other strategies ignore it.
std::vector<double> select_landmarks(const SamplingStrategy& strategy,
                                     std::span<const double> grid, int m,
                                     const RbfKernel& kernel);

/// Ridge leverage scores diag(K (K + n ridge I)^-1) of the grid kernel matrix.
Vector ridge_leverage_scores(const RbfKernel& kernel,
                             std::span<const double> grid, double ridge);

/// Explicit feature map from the eigendecomposition of the landmark kernel
/// matrix:
///
///   phi_k(t) = eig_k^{-1/2} sum_s V(s, k) K(t_s, t)
///
/// so that phi(t_i)^T phi(t_j) is the Nystrom approximation of K(t_i, t_j)
/// and reproduces K exactly on landmark pairs. Eigenpairs whose eigenvalue is
/// not above drop_tol * max eigenvalue are discarded.
class NystromFeatureMap {
 public:
  static NystromFeatureMap build(const RbfKernel& kernel,
                                 std::vector<double> landmarks,
                                 double drop_tol = kDefaultDropTol);

  const RbfKernel& kernel() const noexcept { return kernel_; }
  const std::vector<double>& landmarks() const noexcept { return landmarks_; }
  /// Retained eigenvalues, descending.
  const Vector& eigenvalues() const noexcept { return eigenvalues_; }
  /// Retained eigenvectors as columns, m x rank.
  const Matrix& eigenvectors() const noexcept { return eigenvectors_; }
  int rank() const noexcept { return static_cast<int>(eigenvalues_.size()); }
  int landmark_count() const noexcept {
    return static_cast<int>(landmarks_.size());
  }
  double drop_tol() const noexcept { return drop_tol_; }

  Vector feature(double t) const { return feature_deriv(0, t); }
  Vector feature_deriv(int ell, double t) const;
  /// Row i is feature_deriv(ell, points[i]).
  Matrix feature_matrix(int ell, std::span<const double> points) const;

 private:
  NystromFeatureMap(const RbfKernel& kernel, std::vector<double> landmarks,
                    double drop_tol)
      : kernel_(kernel), landmarks_(std::move(landmarks)), drop_tol_(drop_tol) {}

  void project_into(int ell, double t, double* kernel_row, double* out) const;

  RbfKernel kernel_;
  std::vector<double> landmarks_;
  double drop_tol_;
  Vector eigenvalues_;
  Matrix eigenvectors_;
  Matrix projection_;  // V * diag(eig^{-1/2}), m x rank
};

}  // namespace nlssvm
