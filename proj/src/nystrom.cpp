#include "nlssvm/nystrom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nlssvm/error.hpp"

namespace nlssvm {

namespace {

// Largest pilot set used to factor the grid kernel matrix for leverage scores.
constexpr std::size_t kLeveragePilot = 1000;

void check_grid(std::span<const double> grid) {
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw Error(ErrorKind::InvalidArgument, "grid must be strictly increasing");
}

std::vector<std::size_t> equidistant_indices(std::size_t n, std::size_t m) {
  std::vector<std::size_t> idx(m);
  for (std::size_t i = 0; i < m; ++i)
    idx[i] = static_cast<std::size_t>(
        std::llround(static_cast<double>(i) * static_cast<double>(n - 1) /
                     static_cast<double>(m - 1)));
  return idx;
}

double unit_uniform(std::mt19937_64& rng) {
  // (0, 1], independent of the standard library's distribution algorithms.
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

// Weighted sampling without replacement (Efraimidis-Spirakis keys).
std::vector<std::size_t> weighted_sample(const Vector& weights, std::size_t m,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(weights.size());
  std::vector<double> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::max(weights[static_cast<Eigen::Index>(i)], 1e-300);
    keys[i] = std::log(unit_uniform(rng)) / w;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(m),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      return keys[a] > keys[b] || (keys[a] == keys[b] && a < b);
                    });
  order.resize(m);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

std::string to_string(SamplingStrategy::Kind kind) {
  switch (kind) {
    case SamplingStrategy::Kind::Equidistant: return "equidistant";
    case SamplingStrategy::Kind::Random: return "random";
    case SamplingStrategy::Kind::LeverageScore: return "leverage";
  }
  return "equidistant";
}

SamplingStrategy::Kind parse_sampling_kind(const std::string& name) {
  if (name == "equidistant") return SamplingStrategy::Kind::Equidistant;
  if (name == "random") return SamplingStrategy::Kind::Random;
  if (name == "leverage") return SamplingStrategy::Kind::LeverageScore;
  throw Error(ErrorKind::InvalidConfig, "unknown sampling strategy '" + name + "'");
}

Vector ridge_leverage_scores(const RbfKernel& kernel,
                             std::span<const double> grid, double ridge) {
  if (!(ridge > 0.0))
    throw Error(ErrorKind::InvalidArgument, "ridge must be positive");
  const std::size_t n = grid.size();
  // K ~= B B^T with B from a pilot Nystrom factor; exact (up to the eigenvalue
  // cutoff) when the pilot is the whole grid. Then
  //   diag(K (K + mu I)^-1) = diag(B (B^T B + mu I)^-1 B^T).
  std::vector<double> pilot;
  if (n <= kLeveragePilot) {
    pilot.assign(grid.begin(), grid.end());
  } else {
    for (auto i : equidistant_indices(n, kLeveragePilot)) pilot.push_back(grid[i]);
  }
  const auto map = NystromFeatureMap::build(kernel, std::move(pilot));
  const Matrix factor = map.feature_matrix(0, grid);
  const double mu = static_cast<double>(n) * ridge;
  Matrix gram = factor.transpose() * factor;
  gram.diagonal().array() += mu;
  const Eigen::LLT<Matrix> llt(gram);
  const Matrix solved = llt.solve(factor.transpose());
  Vector scores(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    scores[i] = factor.row(i).dot(solved.col(i));
  return scores;
}

std::vector<double> select_landmarks(const SamplingStrategy& strategy,
                                     std::span<const double> grid, int m,
                                     const RbfKernel& kernel) {
  const std::size_t n = grid.size();
  if (m < 2 || static_cast<std::size_t>(m) > n)
    throw Error(ErrorKind::InvalidCount,
                "landmark count " + std::to_string(m) + " must lie in [2, " +
                    std::to_string(n) + "]");
  check_grid(grid);
  const auto count = static_cast<std::size_t>(m);

  std::vector<std::size_t> idx;
  switch (strategy.kind) {
    case SamplingStrategy::Kind::Equidistant:
      idx = equidistant_indices(n, count);
      break;
    case SamplingStrategy::Kind::Random:
      idx = weighted_sample(Vector::Ones(static_cast<Eigen::Index>(n)), count,
                            strategy.seed);
      break;
    case SamplingStrategy::Kind::LeverageScore:
      idx = weighted_sample(ridge_leverage_scores(kernel, grid, strategy.ridge),
                            count, strategy.seed);
      break;
  }
  std::vector<double> out;
  out.reserve(count);
  for (auto i : idx) out.push_back(grid[i]);
  return out;
}

NystromFeatureMap NystromFeatureMap::build(const RbfKernel& kernel,
                                           std::vector<double> landmarks,
                                           double drop_tol) {
  if (landmarks.empty())
    throw Error(ErrorKind::InvalidCount, "feature map needs at least one landmark");
  if (!(drop_tol >= 0.0 && drop_tol < 1.0))
    throw Error(ErrorKind::InvalidArgument, "drop_tol must lie in [0, 1)");
  {
    std::vector<double> sorted = landmarks;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i] - sorted[i - 1] <= 1e-12)
        throw Error(ErrorKind::DegenerateLandmarks,
                    "landmarks coincide near t = " + std::to_string(sorted[i]));
  }

  NystromFeatureMap map(kernel, std::move(landmarks), drop_tol);
  const Matrix gram = kernel.kernel_matrix(0, map.landmarks_, map.landmarks_);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success)
    throw Error(ErrorKind::NonFinite, "landmark eigendecomposition failed");

  // Eigen returns ascending eigenvalues; keep the significant ones, descending.
  const Vector& values = eig.eigenvalues();
  const Eigen::Index m = values.size();
  const double largest = values[m - 1];
  Eigen::Index keep = 0;
  while (keep < m && values[m - 1 - keep] > drop_tol * largest &&
         values[m - 1 - keep] > 0.0)
    ++keep;

  map.eigenvalues_.resize(keep);
  map.eigenvectors_.resize(m, keep);
  for (Eigen::Index k = 0; k < keep; ++k) {
    map.eigenvalues_[k] = values[m - 1 - k];
    map.eigenvectors_.col(k) = eig.eigenvectors().col(m - 1 - k);
  }
  map.projection_ = map.eigenvectors_ *
                    map.eigenvalues_.cwiseSqrt().cwiseInverse().asDiagonal();
  return map;
}

void NystromFeatureMap::project_into(int ell, double t, double* kernel_row,
                                     double* out) const {
  const auto m = landmarks_.size();
  for (std::size_t s = 0; s < m; ++s)
    kernel_row[s] = kernel_.eval_deriv(ell, landmarks_[s], t);
  const Eigen::Index r = projection_.cols();
  for (Eigen::Index k = 0; k < r; ++k) {
    const double* col = projection_.col(k).data();
    double acc = 0.0;
    for (std::size_t s = 0; s < m; ++s) acc += col[s] * kernel_row[s];
    out[k] = acc;
  }
}

Vector NystromFeatureMap::feature_deriv(int ell, double t) const {
  if (ell < 0 || ell > kMaxDerivOrder)
    throw Error(ErrorKind::UnsupportedOrder,
                "feature derivative order " + std::to_string(ell));
  std::vector<double> row(landmarks_.size());
  Vector out(rank());
  project_into(ell, t, row.data(), out.data());
  return out;
}

Matrix NystromFeatureMap::feature_matrix(int ell,
                                         std::span<const double> points) const {
  if (ell < 0 || ell > kMaxDerivOrder)
    throw Error(ErrorKind::UnsupportedOrder,
                "feature derivative order " + std::to_string(ell));
  // Row-major scratch so each row is produced by the same routine as
  // feature_deriv and matches it bit for bit.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(
      static_cast<Eigen::Index>(points.size()), rank());
  std::vector<double> row(landmarks_.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    project_into(ell, points[i], row.data(),
                 out.row(static_cast<Eigen::Index>(i)).data());
  return out;
}

}  // namespace nlssvm
