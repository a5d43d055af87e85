#include "nlssvm/linear_solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "nlssvm/error.hpp"

namespace nlssvm {

namespace {

Vector evaluate(const ScalarFn& fn, const std::vector<double>& points,
                const char* what) {
  Vector out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double v = fn(points[i]);
    if (!std::isfinite(v))
      throw Error(ErrorKind::NonFinite, std::string(what) + " is not finite at t = " +
                                            std::to_string(points[i]));
    out[static_cast<Eigen::Index>(i)] = v;
  }
  return out;
}

}  // namespace

double PrimalModel::value(int ell, double t) const {
  const double v = map.feature_deriv(ell, t).dot(omega);
  return ell == 0 ? v + bias : v;
}

Vector predict(const PrimalModel& model, int ell, std::span<const double> points) {
  Vector out = model.map.feature_matrix(ell, points) * model.omega;
  if (ell == 0) out.array() += model.bias;
  return out;
}

std::vector<double> constraint_points(const Conditions& conditions,
                                      std::span<const double> grid) {
  if (grid.size() < 3)
    throw Error(ErrorKind::InvalidCount, "grid needs at least 3 points");
  const std::size_t last =
      conditions.kind == Conditions::Kind::Ivp ? grid.size() : grid.size() - 1;
  return {grid.begin() + 1, grid.begin() + static_cast<long>(last)};
}

void condition_rows(const std::vector<Condition>& conditions,
                    const NystromFeatureMap& map, Matrix& g_omega, Vector& g_bias) {
  const auto q = static_cast<Eigen::Index>(conditions.size());
  g_omega.resize(q, map.rank());
  g_bias.resize(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const auto& c = conditions[static_cast<std::size_t>(i)];
    g_omega.row(i) = map.feature_deriv(c.derivative, c.point).transpose();
    g_bias[i] = c.derivative == 0 ? 1.0 : 0.0;
  }
}

AssembledSystem assemble(const LinearOdeSpec& spec, const Conditions& conditions,
                         const NystromFeatureMap& map,
                         std::span<const double> grid, double gamma) {
  const int p = spec.order;
  if (p < 1 || p > kMaxDerivOrder)
    throw Error(ErrorKind::UnsupportedOrder, "ODE order " + std::to_string(p));
  if (static_cast<int>(spec.coeffs.size()) != p)
    throw Error(ErrorKind::InvalidArgument, "expected one coefficient per order");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw Error(ErrorKind::InvalidArgument, "gamma must be positive");
  if (static_cast<int>(conditions.items.size()) != p)
    throw Error(ErrorKind::InvalidArgument, "condition count must equal the order");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw Error(ErrorKind::InvalidArgument, "grid must be strictly increasing");

  AssembledSystem sys;
  sys.gamma = gamma;
  sys.order = p;
  sys.rank = map.rank();
  sys.conditions = conditions.items;
  sys.constraint_points = constraint_points(conditions, grid);
  const auto& pts = sys.constraint_points;

  sys.design = map.feature_matrix(p, pts);
  for (int k = 1; k <= p; ++k) {
    const Vector f = evaluate(spec.coeffs[static_cast<std::size_t>(k - 1)], pts,
                              "ODE coefficient");
    if (f.isZero(0.0)) continue;
    sys.design.noalias() -= f.asDiagonal() * map.feature_matrix(p - k, pts);
    if (k == p) sys.bias_column = -f;
  }
  if (sys.bias_column.size() == 0)
    sys.bias_column = Vector::Zero(static_cast<Eigen::Index>(pts.size()));
  sys.forcing = evaluate(spec.forcing, pts, "forcing");

  const Eigen::Index r = sys.rank;
  const Eigen::Index side = r + 1 + p;
  Matrix g_omega;
  Vector g_bias;
  condition_rows(sys.conditions, map, g_omega, g_bias);

  const Matrix& d = sys.design;
  const Vector& c = sys.bias_column;
  sys.matrix = Matrix::Zero(side, side);
  sys.matrix.topLeftCorner(r, r) = gamma * (d.transpose() * d);
  sys.matrix.topLeftCorner(r, r).diagonal().array() += 1.0;
  const Vector dtc = gamma * (d.transpose() * c);
  sys.matrix.block(0, r, r, 1) = dtc;
  sys.matrix.block(r, 0, 1, r) = dtc.transpose();
  sys.matrix(r, r) = gamma * c.squaredNorm();
  sys.matrix.block(0, r + 1, r, p) = g_omega.transpose();
  sys.matrix.block(r, r + 1, 1, p) = g_bias.transpose();
  sys.matrix.block(r + 1, 0, p, r) = g_omega;
  sys.matrix.block(r + 1, r, p, 1) = g_bias;

  sys.rhs.resize(side);
  sys.rhs.head(r) = gamma * (d.transpose() * sys.forcing);
  sys.rhs[r] = gamma * c.dot(sys.forcing);
  for (int mu = 0; mu < p; ++mu)
    sys.rhs[r + 1 + mu] = sys.conditions[static_cast<std::size_t>(mu)].value;

  if (!sys.matrix.allFinite() || !sys.rhs.allFinite())
    throw Error(ErrorKind::NonFinite, "assembled KKT system has non-finite entries");
  return sys;
}

Vector solve_equilibrated(const Matrix& a, const Vector& rhs, ErrorKind on_singular,
                          int refinement_steps) {
  const Eigen::Index side = a.rows();
  // Symmetric scaling by row maxima puts the gamma-weighted blocks and the
  // unit condition rows on a comparable footing for the pivoting.
  Vector scale(side);
  for (Eigen::Index i = 0; i < side; ++i) {
    const double rowmax = a.row(i).cwiseAbs().maxCoeff();
    if (!(rowmax > 0.0)) throw Error(on_singular, "matrix has an empty row");
    scale[i] = 1.0 / std::sqrt(rowmax);
  }
  const Matrix scaled = scale.asDiagonal() * a * scale.asDiagonal();
  const Eigen::PartialPivLU<Matrix> lu(scaled);
  const double rcond = lu.rcond();
  if (!(rcond >= std::numeric_limits<double>::epsilon()))
    throw Error(on_singular,
                "matrix is numerically singular (rcond = " + std::to_string(rcond) + ")");

  const auto solve_scaled = [&](const Vector& b) -> Vector {
    return scale.asDiagonal() * lu.solve(scale.asDiagonal() * b);
  };
  Vector x = solve_scaled(rhs);
  for (int k = 0; k < refinement_steps; ++k) x += solve_scaled(rhs - a * x);
  if (!x.allFinite()) throw Error(ErrorKind::NonFinite, "solution is not finite");
  return x;
}

PrimalModel solve(const AssembledSystem& system, const NystromFeatureMap& map) {
  if (map.rank() != system.rank)
    throw Error(ErrorKind::InvalidArgument, "feature map does not match the system");
  const Vector x =
      solve_equilibrated(system.matrix, system.rhs, ErrorKind::SingularSystem);
  const Eigen::Index r = system.rank;
  return PrimalModel{map, x.head(r), x[r], x.tail(system.order)};
}

KktReport check_kkt(const PrimalModel& model, const AssembledSystem& system) {
  KktReport report;
  const Eigen::Index r = system.rank;
  Vector x(system.side());
  x.head(r) = model.omega;
  x[r] = model.bias;
  x.tail(system.order) = model.multipliers;
  report.system_residual = (system.matrix * x - system.rhs).cwiseAbs().maxCoeff();
  report.rhs_norm = system.rhs.cwiseAbs().maxCoeff();

  report.condition_residuals.resize(static_cast<Eigen::Index>(system.conditions.size()));
  for (std::size_t i = 0; i < system.conditions.size(); ++i) {
    const auto& c = system.conditions[i];
    report.condition_residuals[static_cast<Eigen::Index>(i)] =
        model.value(c.derivative, c.point) - c.value;
  }
  report.ode_residuals = system.design * model.omega +
                         system.bias_column * model.bias - system.forcing;
  return report;
}

LinearFit fit_linear(const BenchmarkProblem& problem, std::span<const double> grid,
                     const SamplingStrategy& strategy, int m, double sigma2,
                     double gamma, double drop_tol) {
  if (!problem.is_linear())
    throw Error(ErrorKind::InvalidArgument, "problem " + std::to_string(problem.id) +
                                                " is nonlinear");
  const auto start = std::chrono::steady_clock::now();
  const RbfKernel kernel(sigma2);
  auto landmarks = select_landmarks(strategy, grid, m, kernel);
  auto map = NystromFeatureMap::build(kernel, std::move(landmarks), drop_tol);
  auto system = assemble(problem.linear(), problem.conditions, map, grid, gamma);
  auto model = solve(system, map);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(system), seconds};
}

}  // namespace nlssvm
