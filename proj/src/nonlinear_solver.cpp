#include "nlssvm/nonlinear_solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "nlssvm/baselines.hpp"

namespace nlssvm {

namespace {

// Right-hand side, gradient and Hessian at every constraint point.
struct PointData {
  Matrix state;  // N x p: (y, phi' omega, ..., phi^(p-1) omega)
  Vector f;
  Matrix grad;   // N x p
  Matrix hess;   // N x p*p, row-major per point
};

struct Views {
  Eigen::Index r, q, n;
  Vector omega;
  double bias;
  Vector lambda;
  Vector y;
};

Views split(const NonlinearProblem& pb, const Vector& x) {
  if (x.size() != pb.side())
    throw Error(ErrorKind::LengthMismatch, "state vector has the wrong size");
  Views v;
  v.r = pb.rank();
  v.q = static_cast<Eigen::Index>(pb.conditions.size());
  v.n = static_cast<Eigen::Index>(pb.points.size());
  v.omega = x.head(v.r);
  v.bias = x[v.r];
  v.lambda = x.segment(v.r + 1, v.q);
  v.y = x.tail(v.n);
  return v;
}

PointData evaluate_points(const NonlinearProblem& pb, const Views& v, bool grads,
                          bool hessians) {
  const int p = pb.order();
  const auto pz = static_cast<std::size_t>(p);
  PointData d;
  d.state.resize(v.n, p);
  d.state.col(0) = v.y;
  for (int j = 1; j < p; ++j) d.state.col(j) = pb.psi[static_cast<std::size_t>(j)] * v.omega;
  d.f.resize(v.n);
  if (grads) {
    if (!pb.spec->partials)
      throw Error(ErrorKind::PartialsMissing, "right-hand side partials are missing");
    d.grad.resize(v.n, p);
  }
  if (hessians) {
    if (!pb.spec->second_partials)
      throw Error(ErrorKind::PartialsMissing, "second partials are missing");
    d.hess.resize(v.n, p * p);
  }
  std::vector<double> s(pz), g(pz), h(pz * pz);
  for (Eigen::Index i = 0; i < v.n; ++i) {
    for (int j = 0; j < p; ++j) s[static_cast<std::size_t>(j)] = d.state(i, j);
    const double t = pb.points[static_cast<std::size_t>(i)];
    d.f[i] = pb.spec->rhs(t, s);
    if (grads) {
      pb.spec->partials(t, s, g);
      for (int j = 0; j < p; ++j) d.grad(i, j) = g[static_cast<std::size_t>(j)];
    }
    if (hessians) {
      pb.spec->second_partials(t, s, h);
      for (int j = 0; j < p * p; ++j) d.hess(i, j) = h[static_cast<std::size_t>(j)];
    }
  }
  return d;
}

// de/domega = Psi^(p) - sum_{j>=1} diag(g_j) Psi^(j).
Matrix error_design(const NonlinearProblem& pb, const PointData& d) {
  const int p = pb.order();
  Matrix de = pb.psi[static_cast<std::size_t>(p)];
  for (int j = 1; j < p; ++j)
    de.noalias() -= d.grad.col(j).asDiagonal() * pb.psi[static_cast<std::size_t>(j)];
  return de;
}

double condition_value(const NonlinearProblem& pb, Eigen::Index mu) {
  return pb.conditions[static_cast<std::size_t>(mu)].value;
}

Vector condition_residual(const NonlinearProblem& pb, const Views& v) {
  Vector out = pb.g_omega * v.omega + pb.g_bias * v.bias;
  for (Eigen::Index mu = 0; mu < v.q; ++mu) out[mu] -= condition_value(pb, mu);
  return out;
}

NewtonState state_from(const NonlinearProblem& pb, const Vector& x) {
  NewtonState s;
  s.omega.resize(pb.rank());
  s.multipliers.resize(static_cast<Eigen::Index>(pb.conditions.size()));
  s.y_aux.resize(static_cast<Eigen::Index>(pb.points.size()));
  s.unpack(x);
  return s;
}

double inf_norm(const Vector& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace

Vector NewtonState::pack() const {
  Vector x(size());
  x << omega, bias, multipliers, y_aux;
  return x;
}

void NewtonState::unpack(const Vector& x) {
  if (x.size() != size())
    throw Error(ErrorKind::LengthMismatch, "state vector has the wrong size");
  const Eigen::Index r = omega.size();
  const Eigen::Index q = multipliers.size();
  omega = x.head(r);
  bias = x[r];
  multipliers = x.segment(r + 1, q);
  y_aux = x.tail(y_aux.size());
}

NonlinearProblem make_problem(const NonlinearOdeSpec& spec, const Conditions& cond,
                              const NystromFeatureMap& map,
                              std::span<const double> grid, double gamma) {
  if (spec.order < 1 || spec.order > kMaxDerivOrder)
    throw Error(ErrorKind::UnsupportedOrder, "ODE order " + std::to_string(spec.order));
  if (!spec.rhs) throw Error(ErrorKind::InvalidArgument, "right-hand side is missing");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw Error(ErrorKind::InvalidArgument, "gamma must be positive");
  if (static_cast<int>(cond.items.size()) != spec.order)
    throw Error(ErrorKind::InvalidArgument, "condition count must equal the order");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw Error(ErrorKind::InvalidArgument, "grid must be strictly increasing");

  NonlinearProblem pb;
  pb.spec = &spec;
  pb.conditions = cond.items;
  pb.map = &map;
  pb.gamma = gamma;
  pb.points = constraint_points(cond, grid);
  for (int j = 0; j <= spec.order; ++j) pb.psi.push_back(map.feature_matrix(j, pb.points));
  condition_rows(pb.conditions, map, pb.g_omega, pb.g_bias);
  return pb;
}

Vector residual(const NonlinearProblem& pb, const Vector& x) {
  const Views v = split(pb, x);
  const PointData d = evaluate_points(pb, v, true, false);
  const double g = pb.gamma;
  const int p = pb.order();
  const Matrix& psi0 = pb.psi[0];

  const Vector e = pb.psi[static_cast<std::size_t>(p)] * v.omega - d.f;
  const Vector xi = v.y - psi0 * v.omega - Vector::Constant(v.n, v.bias);
  const Matrix de = error_design(pb, d);

  Vector out(pb.side());
  out.head(v.r) = v.omega + g * (de.transpose() * e) - g * (psi0.transpose() * xi) +
                  pb.g_omega.transpose() * v.lambda;
  out[v.r] = -g * xi.sum() + pb.g_bias.dot(v.lambda);
  out.segment(v.r + 1, v.q) = condition_residual(pb, v);
  out.tail(v.n) = -g * d.grad.col(0).cwiseProduct(e) + g * xi;
  return out;
}

namespace {

// Hessian of the Lagrangian. Without curvature the e * d2f terms are
// dropped, which leaves the Gauss-Newton matrix.
Matrix jacobian_impl(const NonlinearProblem& pb, const Vector& x, bool curvature) {
  const Views v = split(pb, x);
  const PointData d = evaluate_points(pb, v, true, curvature);
  const double g = pb.gamma;
  const int p = pb.order();
  const Matrix& psi0 = pb.psi[0];
  const auto hess = [&](int a, int b) { return d.hess.col(a * p + b); };

  const Vector e = pb.psi[static_cast<std::size_t>(p)] * v.omega - d.f;
  const Matrix de = error_design(pb, d);
  const Eigen::Index r = v.r, q = v.q, n = v.n;
  const Eigen::Index ib = r, il = r + 1, iy = r + 1 + q;

  Matrix jac = Matrix::Zero(pb.side(), pb.side());

  // d/domega of the omega block; the curvature of f in the derivative
  // arguments enters through e * d2f.
  Matrix ww = g * (de.transpose() * de) + g * (psi0.transpose() * psi0);
  for (int a = 1; curvature && a < p; ++a)
    for (int b = 1; b < p; ++b) {
      const Vector w = e.cwiseProduct(hess(a, b));
      ww.noalias() -= g * (pb.psi[static_cast<std::size_t>(a)].transpose() * w.asDiagonal() *
                           pb.psi[static_cast<std::size_t>(b)]);
    }
  ww.diagonal().array() += 1.0;
  jac.block(0, 0, r, r) = ww;

  const Vector psi0_sum = psi0.colwise().sum().transpose();
  jac.block(0, ib, r, 1) = g * psi0_sum;
  jac.block(ib, 0, 1, r) = g * psi0_sum.transpose();
  jac(ib, ib) = g * static_cast<double>(n);

  jac.block(0, il, r, q) = pb.g_omega.transpose();
  jac.block(il, 0, q, r) = pb.g_omega;
  jac.block(ib, il, 1, q) = pb.g_bias.transpose();
  jac.block(il, ib, q, 1) = pb.g_bias;

  // Cross block omega / y and its transpose.
  Matrix wy = -g * (de.transpose() * d.grad.col(0).asDiagonal()) - g * psi0.transpose();
  for (int a = 1; curvature && a < p; ++a) {
    const Vector w = e.cwiseProduct(hess(a, 0));
    wy.noalias() -= g * (pb.psi[static_cast<std::size_t>(a)].transpose() * w.asDiagonal());
  }
  jac.block(0, iy, r, n) = wy;
  jac.block(iy, 0, n, r) = wy.transpose();

  jac.block(ib, iy, 1, n).setConstant(-g);
  jac.block(iy, ib, n, 1).setConstant(-g);

  const Vector g0 = d.grad.col(0);
  Vector yy = g * g0.cwiseAbs2().array() + g;
  if (curvature) yy -= g * e.cwiseProduct(hess(0, 0));
  jac.block(iy, iy, n, n).diagonal() = yy;
  return jac;
}


}  // namespace

Matrix jacobian(const NonlinearProblem& pb, const Vector& x) {
  return jacobian_impl(pb, x, true);
}

Matrix gauss_newton_matrix(const NonlinearProblem& pb, const Vector& x) {
  return jacobian_impl(pb, x, false);
}

Matrix jacobian_fd(const NonlinearProblem& pb, const Vector& x, double step) {
  const Eigen::Index side = pb.side();
  Matrix jac(side, side);
  Vector probe = x;
  for (Eigen::Index k = 0; k < side; ++k) {
    const double h = step * (1.0 + std::abs(x[k]));
    probe[k] = x[k] + h;
    const Vector fp = residual(pb, probe);
    probe[k] = x[k] - h;
    const Vector fm = residual(pb, probe);
    probe[k] = x[k];
    jac.col(k) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

double lagrangian(const NonlinearProblem& pb, const Vector& x) {
  const Views v = split(pb, x);
  const PointData d = evaluate_points(pb, v, false, false);
  const Vector e = pb.psi[static_cast<std::size_t>(pb.order())] * v.omega - d.f;
  const Vector xi = v.y - pb.psi[0] * v.omega - Vector::Constant(v.n, v.bias);
  return 0.5 * v.omega.squaredNorm() + 0.5 * pb.gamma * (e.squaredNorm() + xi.squaredNorm()) +
         v.lambda.dot(condition_residual(pb, v));
}

namespace {

void require_first_order_ivp(const NonlinearOdeSpec& spec, const Conditions& cond) {
  if (spec.order != 1)
    throw Error(ErrorKind::UnsupportedOrder, "first-order layout needs a first-order ODE");
  if (cond.kind != Conditions::Kind::Ivp)
    throw Error(ErrorKind::InvalidArgument, "first-order layout needs an IVP");
  if (!spec.partials)
    throw Error(ErrorKind::PartialsMissing, "df/dy is missing");
}

}  // namespace

Vector residual_first_order(const NewtonState& state, const NonlinearOdeSpec& spec,
                            const Conditions& cond, const NystromFeatureMap& map,
                            std::span<const double> grid, double gamma) {
  require_first_order_ivp(spec, cond);
  const auto pb = make_problem(spec, cond, map, grid, gamma);
  return residual(pb, state.pack());
}

Matrix jacobian_first_order(const NewtonState& state, const NonlinearOdeSpec& spec,
                            const Conditions& cond, const NystromFeatureMap& map,
                            std::span<const double> grid, double gamma) {
  require_first_order_ivp(spec, cond);
  const auto pb = make_problem(spec, cond, map, grid, gamma);
  return jacobian(pb, state.pack());
}

NewtonState initial_state(const NonlinearProblem& pb, const BenchmarkProblem* benchmark,
                          NewtonInit init, std::span<const double> grid) {
  double seed = 0.0;
  int values = 0;
  const bool ivp = std::all_of(pb.conditions.begin(), pb.conditions.end(),
                               [&](const Condition& c) {
                                 return c.point == pb.conditions.front().point;
                               });
  for (const auto& c : pb.conditions) {
    if (c.derivative != 0) continue;
    seed += c.value;
    ++values;
    if (ivp) break;
  }
  if (values > 0) seed /= values;

  NewtonState s;
  s.omega = Vector::Zero(pb.rank());
  s.bias = seed;
  s.multipliers = Vector::Zero(static_cast<Eigen::Index>(pb.conditions.size()));
  s.y_aux = Vector::Constant(static_cast<Eigen::Index>(pb.points.size()), seed);

  if (init == NewtonInit::ExplicitMarch) {
    if (!benchmark || grid.size() < 3)
      throw Error(ErrorKind::InvalidArgument, "explicit-march seed needs the problem and grid");
    const auto traj = integrate(first_order_form(*benchmark), grid.front(), grid.back(),
                                StepperConfig::rk4(grid[1] - grid[0]));
    if (!traj.finite)
      throw Error(ErrorKind::NonFinite, "explicit march for the Newton seed overflowed");
    const Vector values_on_grid = traj.values();
    for (Eigen::Index i = 0; i < s.y_aux.size(); ++i) s.y_aux[i] = values_on_grid[i + 1];
  }
  return s;
}

namespace {

// One Newton run over callbacks, shared by the generic and the hand-written
// Problem 15 paths. `jacobian(x, exact)` returns the Lagrangian Hessian when
// exact is set and the Gauss-Newton matrix otherwise.
struct Iteration {
  std::function<Vector(const Vector&)> residual;
  std::function<Matrix(const Vector&, bool)> jacobian;
  std::function<NewtonState(const Vector&)> state;
};

NewtonResult iterate(Vector x, const Iteration& it, const NystromFeatureMap& map,
                     double gamma, const NewtonOptions& opts) {
  if (opts.max_iters < 1)
    throw Error(ErrorKind::InvalidArgument, "max_iters must be at least 1");
  NewtonTrace trace;
  trace.tol = opts.tolerance(gamma);
  bool exact = opts.start != NewtonOptions::Start::GaussNewton;

  Vector f = it.residual(x);
  double norm = inf_norm(f);
  const auto fail = [&](ErrorKind kind, const std::string& what) {
    NewtonState s = it.state(x);
    s.iteration = trace.iterations();
    s.residual_norm = norm;
    throw NewtonError(kind, what, trace, std::move(s));
  };
  if (!std::isfinite(norm)) fail(ErrorKind::NonFinite, "residual at the starting point is not finite");
  trace.residual_norms.push_back(norm);
  trace.merit_norms.push_back(f.norm());

  for (int k = 0; k < opts.max_iters && norm > trace.tol; ++k) {
    Vector dx;
    try {
      dx = solve_equilibrated(it.jacobian(x, exact), -f, ErrorKind::SingularJacobian);
    } catch (const NewtonError&) {
      throw;
    } catch (const Error& err) {
      fail(err.kind() == ErrorKind::NonFinite ? ErrorKind::SingularJacobian : err.kind(),
           err.what());
    }

    double alpha = 1.0;
    int halvings = 0;
    Vector trial = x + dx;
    Vector f_trial = it.residual(trial);
    const auto shorten = [&] {
      alpha *= opts.shrink;
      ++halvings;
      trial = x + alpha * dx;
      f_trial = it.residual(trial);
    };
    // Steps that leave the domain of f are shortened even without damping.
    while (!f_trial.allFinite() && halvings < opts.max_halvings) shorten();
    if (opts.damping == NewtonOptions::Damping::Backtracking) {
      // The Newton direction always descends on |F|_2^2, even where the
      // Lagrangian Hessian is indefinite, so that is the merit function.
      const double merit = f.norm();
      while (!(f_trial.norm() <= merit) && halvings < opts.max_halvings) shorten();
      if (!(f_trial.norm() <= merit))
        fail(ErrorKind::MaxItersExceeded, "backtracking found no decrease in |F|");
    }
    const double trial_norm = inf_norm(f_trial);
    if (!std::isfinite(trial_norm) || trial_norm > opts.divergence_limit)
      fail(ErrorKind::Divergence,
           "Newton residual diverged at iteration " + std::to_string(k + 1));

    trace.step_norms.push_back(alpha * inf_norm(dx));
    trace.halvings.push_back(halvings);
    trace.exact_steps.push_back(exact);
    if (!exact && trial_norm <= opts.warmup_switch * norm) exact = true;
    x = std::move(trial);
    f = std::move(f_trial);
    norm = trial_norm;
    trace.residual_norms.push_back(norm);
    trace.merit_norms.push_back(f.norm());
  }
  trace.converged = norm <= trace.tol;

  NewtonState state = it.state(x);
  state.iteration = trace.iterations();
  state.residual_norm = norm;
  if (!trace.converged && opts.require_convergence)
    throw NewtonError(ErrorKind::MaxItersExceeded,
                      "no convergence in " + std::to_string(opts.max_iters) +
                          " iterations (|F| = " + std::to_string(norm) + ")",
                      trace, state);
  PrimalModel model{map, state.omega, state.bias, state.multipliers};
  return {std::move(model), std::move(state), std::move(trace)};
}

}  // namespace

NewtonResult newton_solve(const NonlinearProblem& pb, NewtonState start,
                          const NewtonOptions& opts) {
  const bool analytic = opts.jacobian == NewtonOptions::Jacobian::Analytic;
  Iteration it;
  it.residual = [&](const Vector& x) { return residual(pb, x); };
  it.jacobian = [&](const Vector& x, bool exact) -> Matrix {
    if (!exact) return gauss_newton_matrix(pb, x);
    return analytic ? jacobian(pb, x) : jacobian_fd(pb, x, opts.fd_step);
  };
  it.state = [&](const Vector& x) { return state_from(pb, x); };
  return iterate(start.pack(), it, *pb.map, pb.gamma, opts);
}

NewtonResult solve_nonlinear(const NonlinearOdeSpec& spec, const Conditions& cond,
                             const NystromFeatureMap& map,
                             std::span<const double> grid, double gamma,
                             const NewtonOptions& opts,
                             std::optional<NewtonState> start) {
  const auto pb = make_problem(spec, cond, map, grid, gamma);
  NewtonOptions o = opts;
  if (!spec.second_partials) o.jacobian = NewtonOptions::Jacobian::FiniteDifference;
  return newton_solve(pb, start ? std::move(*start) : initial_state(pb), o);
}

NewtonResult solve_benchmark_nonlinear(const BenchmarkProblem& problem,
                                       const NystromFeatureMap& map,
                                       std::span<const double> grid, double gamma,
                                       const NewtonOptions& opts) {
  const auto& spec = problem.nonlinear();
  const auto pb = make_problem(spec, problem.conditions, map, grid, gamma);
  NewtonOptions o = opts;
  if (!spec.second_partials) o.jacobian = NewtonOptions::Jacobian::FiniteDifference;
  if (o.start == NewtonOptions::Start::Auto) o.start = problem.newton_start;
  return newton_solve(pb, initial_state(pb, &problem, problem.newton_init, grid), o);
}

// ---------------------------------------------------------------------------
// Problem 15 blocks, written out term by term:
//   e  = Psi'' w - 2 a^2 / y + y,   a = Psi' w
//   xi = y - Psi w - b
//   Y1 = w + gamma [Psi''^T e - 4 Psi'^T ((a / y) e)] - gamma Psi^T xi
//          + lambda_1 phi(t_1)^T + lambda_2 phi(t_n)^T
//   Y2 = -gamma 1^T xi + lambda_1 + lambda_2
//   Y3 = phi(t_1) w + b - q,   Y4 = phi(t_n) w + b - q
//   Y5 = gamma (1 + 2 a^2 / y^2) e + gamma xi

namespace {

struct P15Blocks {
  Matrix psi0, psi1, psi2;
  RowVector phi_first, phi_last;
  Eigen::Index r, n;
};

P15Blocks p15_blocks(const NystromFeatureMap& map, std::span<const double> grid) {
  if (grid.size() < 3) throw Error(ErrorKind::InvalidCount, "grid needs at least 3 points");
  const std::vector<double> pts(grid.begin() + 1, grid.end() - 1);
  P15Blocks b;
  b.psi0 = map.feature_matrix(0, pts);
  b.psi1 = map.feature_matrix(1, pts);
  b.psi2 = map.feature_matrix(2, pts);
  b.phi_first = map.feature(grid.front()).transpose();
  b.phi_last = map.feature(grid.back()).transpose();
  b.r = map.rank();
  b.n = static_cast<Eigen::Index>(pts.size());
  return b;
}

}  // namespace

Vector residual_problem15(const Vector& x, const NystromFeatureMap& map,
                          std::span<const double> grid, double gamma, double q) {
  const auto b = p15_blocks(map, grid);
  const Eigen::Index r = b.r, n = b.n;
  if (x.size() != r + 3 + n) throw Error(ErrorKind::LengthMismatch, "state has the wrong size");
  const Vector w = x.head(r);
  const double bias = x[r];
  const double l1 = x[r + 1], l2 = x[r + 2];
  const Vector y = x.tail(n);

  const Vector a = b.psi1 * w;
  const Vector s = b.psi2 * w;
  const Vector e = (s.array() - 2.0 * a.array().square() / y.array() + y.array()).matrix();
  const Vector xi = y - b.psi0 * w - Vector::Constant(n, bias);
  const Vector ay = a.cwiseQuotient(y);

  Vector out(r + 3 + n);
  out.head(r) = w + gamma * (b.psi2.transpose() * e - 4.0 * b.psi1.transpose() * ay.cwiseProduct(e)) -
                gamma * (b.psi0.transpose() * xi) + l1 * b.phi_first.transpose() +
                l2 * b.phi_last.transpose();
  out[r] = -gamma * xi.sum() + l1 + l2;
  out[r + 1] = b.phi_first.dot(w) + bias - q;
  out[r + 2] = b.phi_last.dot(w) + bias - q;
  out.tail(n) = gamma * (1.0 + 2.0 * ay.array().square()).matrix().cwiseProduct(e) + gamma * xi;
  return out;
}

Matrix jacobian_problem15(const Vector& x, const NystromFeatureMap& map,
                          std::span<const double> grid, double gamma, double q,
                          bool curvature) {
  (void)q;
  const auto b = p15_blocks(map, grid);
  const Eigen::Index r = b.r, n = b.n;
  if (x.size() != r + 3 + n) throw Error(ErrorKind::LengthMismatch, "state has the wrong size");
  const Vector w = x.head(r);
  const Vector y = x.tail(n);
  const Vector a = b.psi1 * w;
  const Vector s = b.psi2 * w;
  const Vector e = (s.array() - 2.0 * a.array().square() / y.array() + y.array()).matrix();
  const Vector ay = a.cwiseQuotient(y);
  const Vector dedy = (1.0 + 2.0 * ay.array().square()).matrix();
  const Matrix de = b.psi2 - 4.0 * ay.asDiagonal() * b.psi1;  // de/dw
  const Eigen::Index ib = r, il = r + 1, iy = r + 3;

  Matrix jac = Matrix::Zero(r + 3 + n, r + 3 + n);
  const double c = curvature ? 1.0 : 0.0;
  Matrix ww = gamma * (de.transpose() * de) -
              c * 4.0 * gamma * (b.psi1.transpose() * e.cwiseQuotient(y).asDiagonal() * b.psi1) +
              gamma * (b.psi0.transpose() * b.psi0);
  ww.diagonal().array() += 1.0;
  jac.block(0, 0, r, r) = ww;

  const Vector psi0_sum = b.psi0.colwise().sum().transpose();
  jac.block(0, ib, r, 1) = gamma * psi0_sum;
  jac.block(ib, 0, 1, r) = gamma * psi0_sum.transpose();
  jac(ib, ib) = gamma * static_cast<double>(n);

  jac.block(0, il, r, 1) = b.phi_first.transpose();
  jac.block(0, il + 1, r, 1) = b.phi_last.transpose();
  jac.block(il, 0, 1, r) = b.phi_first;
  jac.block(il + 1, 0, 1, r) = b.phi_last;
  jac(ib, il) = jac(ib, il + 1) = jac(il, ib) = jac(il + 1, ib) = 1.0;

  const Vector eay2 = e.cwiseProduct(a).cwiseQuotient(y.cwiseAbs2());
  const Matrix wy = gamma * (de.transpose() * dedy.asDiagonal()) +
                    c * 4.0 * gamma * (b.psi1.transpose() * eay2.asDiagonal()) -
                    gamma * b.psi0.transpose();
  jac.block(0, iy, r, n) = wy;
  jac.block(iy, 0, n, r) = wy.transpose();
  jac.block(ib, iy, 1, n).setConstant(-gamma);
  jac.block(iy, ib, n, 1).setConstant(-gamma);

  const Vector yy = gamma * (dedy.cwiseAbs2().array() -
                             c * 4.0 * a.array().square() / y.array().cube() * e.array()) +
                    gamma;
  jac.block(iy, iy, n, n).diagonal() = yy;
  return jac;
}

NewtonResult solve_problem15(const NystromFeatureMap& map, std::span<const double> grid,
                             double gamma, const NewtonOptions& opts) {
  const auto& problem = problem_by_id(15);
  const double q = problem.conditions.items.front().value;
  if (std::abs(grid.front() - problem.t_begin) > 1e-12 ||
      std::abs(grid.back() - problem.t_end) > 1e-12)
    throw Error(ErrorKind::InvalidArgument, "Problem 15 grid must span [-1, 1]");

  const Eigen::Index r = map.rank();
  const auto n = static_cast<Eigen::Index>(grid.size()) - 2;
  Vector x = Vector::Zero(r + 3 + n);
  x[r] = q;
  x.tail(n).setConstant(q);

  NewtonOptions o = opts;
  if (o.start == NewtonOptions::Start::Auto) o.start = problem.newton_start;
  Iteration it;
  it.residual = [&](const Vector& v) { return residual_problem15(v, map, grid, gamma, q); };
  it.jacobian = [&](const Vector& v, bool exact) {
    return jacobian_problem15(v, map, grid, gamma, q, exact);
  };
  it.state = [&](const Vector& v) {
    NewtonState s;
    s.omega = v.head(r);
    s.bias = v[r];
    s.multipliers = v.segment(r + 1, 2);
    s.y_aux = v.tail(n);
    return s;
  };
  return iterate(std::move(x), it, map, gamma, o);
}

namespace {

struct OrderFit {
  double order = 0.0;
  double constant = 0.0;
  int pairs = 0;
  int end = 0;
};

// Fits log v[k+1] = order * log v[k] + c over the last (up to three) pairs of
// the final contracting run whose later member sits at least floor_factor
// above the sequence minimum. Pairs whose step is flagged as a warm-up step
// are excluded, since only exact steps carry the local rate.
OrderFit fit_order(const std::vector<double>& v, const std::vector<bool>& exact,
                   std::size_t first_step, double floor_factor) {
  OrderFit out;
  if (v.size() < 2) return out;
  const double floor = *std::min_element(v.begin(), v.end());
  const auto usable = [&](std::size_t k) {
    const std::size_t step = k + first_step;
    const bool is_exact = step >= exact.size() || exact[step];
    return is_exact && v[k] > 0.0 && v[k + 1] > 0.0 && v[k + 1] < v[k] &&
           v[k + 1] > floor_factor * floor;
  };
  std::size_t end = v.size() - 1;  // index of the later member of the last pair
  while (end > 0 && !usable(end - 1)) --end;
  if (end == 0) return out;
  std::size_t begin = end - 1;
  while (begin > 0 && usable(begin - 1)) --begin;
  const std::size_t used = std::min<std::size_t>(3, end - begin);
  out.pairs = static_cast<int>(used);
  out.end = static_cast<int>(end);
  if (used < 2) return out;

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = end - used; k < end; ++k) {
    const double lx = std::log(v[k]);
    const double ly = std::log(v[k + 1]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double m = static_cast<double>(used);
  const double denom = m * sxx - sx * sx;
  out.order = denom != 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
  out.constant = v[end] / (v[end - 1] * v[end - 1]);
  return out;
}

}  // namespace

ConvergenceReport convergence_diagnostics(const NewtonTrace& trace) {
  const OrderFit res = fit_order(trace.residual_norms, trace.exact_steps, 0, kFloorFactor);
  if (res.pairs < 2)
    throw Error(ErrorKind::InsufficientTrace,
                "need at least two contracting residual pairs above the floor, have " +
                    std::to_string(res.pairs));
  ConvergenceReport rep;
  rep.order = res.order;
  rep.constant = res.constant;
  rep.pairs_used = res.pairs;
  rep.pre_floor_end = res.end;
  rep.sub_quadratic = rep.order < kQuadraticThreshold;
  // Step k is x_{k+1} - x_k, so the pair (s_k, s_{k+1}) belongs to step k + 1.
  const OrderFit step = fit_order(trace.step_norms, trace.exact_steps, 1, kFloorFactor);
  if (step.pairs >= 2) {
    rep.step_order = step.order;
    rep.step_pairs_used = step.pairs;
  }
  return rep;
}

}  // namespace nlssvm
