#include "nlssvm/ode_model.hpp"

#include <algorithm>
#include <boost/math/differentiation/autodiff.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "nlssvm/error.hpp"

namespace nlssvm {

namespace {

using boost::math::differentiation::make_fvar;

// Wraps a generic closed form so that reference(ell, t) returns its ell-th
// derivative, computed by forward-mode Taylor arithmetic.
template <class F>
std::function<double(int, double)> with_derivatives(F f) {
  return [f](int ell, double t) {
    if (ell < 0 || ell > kMaxDerivOrder)
      throw Error(ErrorKind::UnsupportedOrder, "reference derivative order");
    const auto x = make_fvar<double, kMaxDerivOrder>(t);
    return static_cast<double>(f(x).derivative(static_cast<std::size_t>(ell)));
  };
}

ScalarFn constant(double c) {
  return [c](double) { return c; };
}

LinearOdeSpec linear(std::vector<ScalarFn> coeffs, ScalarFn forcing) {
  LinearOdeSpec spec;
  spec.order = static_cast<int>(coeffs.size());
  spec.coeffs = std::move(coeffs);
  spec.forcing = std::move(forcing);
  return spec;
}

std::vector<BenchmarkProblem> build_catalog() {
  using std::cos;
  using std::cosh;
  using std::exp;
  using std::log;
  using std::sin;
  using std::sqrt;
  std::vector<BenchmarkProblem> out;

  {
    BenchmarkProblem p;
    p.id = 1;
    p.name = "first-order, time-varying coefficient";
    p.t_begin = 0.0;
    p.t_end = 3.0;
    auto g = [](double t) { return (1 + 3 * t * t) / (1 + t + t * t * t); };
    p.spec = linear({[g](double t) { return -(t + g(t)); }},
                    [g](double t) { return t * t * t + 2 * t + t * t * g(t); });
    p.conditions = Conditions::ivp(0.0, {1.0});
    p.reference = with_derivatives([](auto t) {
      return t * t + exp(-0.5 * t * t) / (1.0 + t + t * t * t);
    });
    p.defaults = {1000, 150, 10.0, 1e7, 0};
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 2;
    p.name = "Dahlquist test equation";
    p.t_begin = 0.0;
    p.t_end = 10.0;
    p.spec = linear({constant(-1.0)}, constant(0.0));
    p.conditions = Conditions::ivp(0.0, {1.0});
    p.reference = with_derivatives([](auto t) { return exp(-t); });
    p.defaults = {10000, 50, 10.0, 1e7, 0};
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 3;
    p.name = "Prothero-Robinson (stiff)";
    p.t_begin = 0.0;
    p.t_end = 10.0;
    p.spec = linear({constant(-1e3)},
                    [](double t) { return 1e3 * std::sin(t) + std::cos(t); });
    p.conditions = Conditions::ivp(0.0, {0.0});
    p.reference = with_derivatives([](auto t) { return sin(t); });
    p.defaults = {10000, 50, 10.0, 1e7, 0};
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 4;
    p.name = "nonlinear first-order y' = y - t/y";
    p.t_begin = 0.0;
    p.t_end = 3.0;
    NonlinearOdeSpec s;
    s.order = 1;
    s.rhs = [](double t, std::span<const double> x) { return x[0] - t / x[0]; };
    s.partials = [](double t, std::span<const double> x, std::span<double> g) {
      g[0] = 1.0 + t / (x[0] * x[0]);
    };
    s.second_partials = [](double t, std::span<const double> x,
                           std::span<double> h) {
      h[0] = -2.0 * t / (x[0] * x[0] * x[0]);
    };
    p.spec = std::move(s);
    p.conditions = Conditions::ivp(0.0, {1.0});
    p.reference = with_derivatives(
        [](auto t) { return sqrt(0.5 * exp(2.0 * t) + t + 0.5); });
    p.defaults = {1000, 50, 10.0, 1e6, 50};
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 5;
    p.name = "nonlinear first-order y' = y^2";
    p.t_begin = 0.0;
    p.t_end = 1.0;
    NonlinearOdeSpec s;
    s.order = 1;
    s.rhs = [](double, std::span<const double> x) { return x[0] * x[0]; };
    s.partials = [](double, std::span<const double> x, std::span<double> g) {
      g[0] = 2.0 * x[0];
    };
    s.second_partials = [](double, std::span<const double>, std::span<double> h) {
      h[0] = 2.0;
    };
    p.spec = std::move(s);
    p.conditions = Conditions::ivp(0.0, {-1.0});
    p.reference = with_derivatives([](auto t) { return -1.0 / (1.0 + t); });
    p.defaults = {600, 20, 8.0, 1e6, 25};
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 6;
    p.name = "nonlinear first-order with square root";
    p.t_begin = 1.0;
    p.t_end = 1.2;
    NonlinearOdeSpec s;
    s.order = 1;
    s.rhs = [](double t, std::span<const double> x) {
      return 2.0 / t * std::sqrt(x[0] - std::log(t)) + 1.0 / t;
    };
    s.partials = [](double t, std::span<const double> x, std::span<double> g) {
      g[0] = 1.0 / (t * std::sqrt(x[0] - std::log(t)));
    };
    s.second_partials = [](double t, std::span<const double> x,
                           std::span<double> h) {
      const double u = x[0] - std::log(t);
      h[0] = -0.5 / (t * u * std::sqrt(u));
    };
    p.spec = std::move(s);
    p.conditions = Conditions::ivp(1.0, {0.0});
    p.reference = with_derivatives([](auto t) {
      const auto l = log(t);
      return l + l * l;
    });
    p.defaults = {300, 20, 1.0, 1e6, 50};
    // A constant seed y = 0 leaves the square root's domain for t > 1.
    p.newton_init = NewtonInit::ExplicitMarch;
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 7;
    p.name = "damped oscillator with step input";
    p.t_begin = 0.0;
    p.t_end = 20.0;
    p.spec = linear({constant(-0.3), constant(-1.0)}, constant(1.0));
    p.conditions = Conditions::ivp(0.0, {0.0, 0.0});
    p.reference = with_derivatives([](auto t) {
      const double w = std::sqrt(1.0 - 0.15 * 0.15);
      return 1.0 - exp(-0.15 * t) * (cos(w * t) + (0.15 / w) * sin(w * t));
    });
    p.defaults = {1000, 50, 1.0, 1e7, 0};
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 8;
    p.name = "undamped free vibration";
    p.t_begin = 0.0;
    p.t_end = 2.0;
    p.spec = linear({constant(0.0), constant(-36.0)}, constant(0.0));
    p.conditions = Conditions::ivp(0.0, {-0.5, 1.0});
    p.reference = with_derivatives(
        [](auto t) { return -0.5 * cos(6.0 * t) + sin(6.0 * t) / 6.0; });
    p.defaults = {1000, 50, 1.0, 1e7, 0};
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 9;
    p.name = "critically damped free vibration";
    p.t_begin = 0.0;
    p.t_end = 10.0;
    p.spec = linear({constant(-4.0), constant(-4.0)}, constant(0.0));
    p.conditions = Conditions::ivp(0.0, {1.0, 1.0});
    p.reference =
        with_derivatives([](auto t) { return (1.0 + 3.0 * t) * exp(-2.0 * t); });
    p.defaults = {1000, 50, 1.0, 1e7, 0};
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 10;
    p.name = "second-order with time-varying input";
    p.t_begin = 0.0;
    p.t_end = 10.0;
    p.spec = linear({constant(-0.2), constant(-1.0)}, [](double t) {
      return -0.2 * std::exp(-t / 5.0) * std::cos(t);
    });
    p.conditions = Conditions::ivp(0.0, {0.0, 1.0});
    p.reference = with_derivatives([](auto t) { return exp(-t / 5.0) * sin(t); });
    p.defaults = {1000, 50, 1.0, 1e7, 0};
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 11;
    p.name = "singular second-order BVP";
    p.t_begin = 0.0;
    p.t_end = 1.0;
    p.spec = linear({[](double t) { return -1.0 / t; }, constant(0.0)},
                    [](double t) { return -std::cos(t) - std::sin(t) / t; });
    p.conditions = Conditions::bvp(0.0, 1.0, 1.0, std::cos(1.0));
    p.reference = with_derivatives([](auto t) { return cos(t); });
    p.defaults = {1000, 20, 1.0, 1e7, 0};
    // y'' + y'/t -> 2 y''(0) at the regular singular point, so y''(0) = -1.
    p.left_limit_highest = -1.0;
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 12;
    p.name = "second-order BVP y'' + y = 2";
    p.t_begin = 0.0;
    p.t_end = 1.0;
    p.spec = linear({constant(0.0), constant(-1.0)}, constant(2.0));
    p.conditions = Conditions::bvp(0.0, 1.0, 1.0, 0.0);
    const double c = (std::cos(1.0) - 2.0) / std::sin(1.0);
    p.reference =
        with_derivatives([c](auto t) { return 2.0 - cos(t) + c * sin(t); });
    p.defaults = {1000, 20, 1.0, 1e7, 0};
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 13;
    p.name = "singular second-order BVP with exponential solution";
    p.t_begin = 0.0;
    p.t_end = 1.0;
    p.spec = linear({[](double t) { return -(1.0 - 2.0 * t) / t; },
                     [](double t) { return -(t - 1.0) / t; }},
                    constant(0.0));
    p.conditions = Conditions::bvp(0.0, 1.0, 1.0, std::numbers::e);
    p.reference = with_derivatives([](auto t) { return exp(t); });
    p.defaults = {1000, 20, 1.0, 1e7, 0};
    // Regularity at t = 0 forces y'(0) = y(0) and 2 y''(0) = 3 y'(0) - y(0).
    p.left_limit_highest = 1.0;
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 14;
    p.name = "nonlinear second-order BVP y'' + y'^2 = 2 exp(-y)";
    p.t_begin = 0.0;
    p.t_end = 1.0;
    NonlinearOdeSpec s;
    s.order = 2;
    s.rhs = [](double, std::span<const double> x) {
      return -x[1] * x[1] + 2.0 * std::exp(-x[0]);
    };
    s.partials = [](double, std::span<const double> x, std::span<double> g) {
      g[0] = -2.0 * std::exp(-x[0]);
      g[1] = -2.0 * x[1];
    };
    s.second_partials = [](double, std::span<const double> x,
                           std::span<double> h) {
      h[0] = 2.0 * std::exp(-x[0]);
      h[1] = 0.0;
      h[2] = 0.0;
      h[3] = -2.0;
    };
    p.spec = std::move(s);
    p.conditions = Conditions::bvp(0.0, 0.0, 1.0, 0.0);
    p.reference = with_derivatives([](auto t) { return log(t * t - t + 1.0); });
    p.defaults = {200, 10, 1.0, 1e7, 500};
    // Exact Newton from the constant seed diverges: e is large there and the
    // e * d2f terms make the Hessian indefinite.
    p.newton_start = NewtonStart::GaussNewton;
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 15;
    p.name = "nonlinear second-order BVP y'' = -y + 2 y'^2 / y";
    p.t_begin = -1.0;
    p.t_end = 1.0;
    NonlinearOdeSpec s;
    s.order = 2;
    s.rhs = [](double, std::span<const double> x) {
      return -x[0] + 2.0 * x[1] * x[1] / x[0];
    };
    s.partials = [](double, std::span<const double> x, std::span<double> g) {
      const double r = x[1] / x[0];
      g[0] = -1.0 - 2.0 * r * r;
      g[1] = 4.0 * r;
    };
    s.second_partials = [](double, std::span<const double> x,
                           std::span<double> h) {
      const double y = x[0];
      const double yp = x[1];
      h[0] = 4.0 * yp * yp / (y * y * y);
      h[1] = -4.0 * yp / (y * y);
      h[2] = h[1];
      h[3] = 4.0 / y;
    };
    p.spec = std::move(s);
    constexpr double q = 0.324027137;
    p.conditions = Conditions::bvp(-1.0, q, 1.0, q);
    // y = 1 / (A cosh t) solves the equation for any A; pick A to meet the
    // stated boundary value exactly.
    const double a = 1.0 / (q * std::cosh(1.0));
    p.reference = with_derivatives([a](auto t) { return 1.0 / (a * cosh(t)); });
    p.defaults = {300, 10, 1.0, 1e7, 400};
    p.newton_start = NewtonStart::GaussNewton;
    out.push_back(std::move(p));
  }
  {
    BenchmarkProblem p;
    p.id = 16;
    p.name = "fourth-order two-point Hermite problem";
    p.t_begin = -1.0;
    p.t_end = 1.0;
    p.spec = linear({constant(0.0), constant(0.0), constant(0.0), constant(0.0)},
                    [](double t) { return 120.0 * t; });
    p.conditions.kind = Conditions::Kind::Bvp;
    p.conditions.items = {{-1.0, 0, 1.0}, {-1.0, 1, 5.0}, {1.0, 0, 3.0},
                          {1.0, 1, 5.0}};
    p.reference = with_derivatives([](auto t) { return t * t * t * t * t + 2.0; });
    p.defaults = {1000, 20, 1.0, 1e7, 0};
    out.push_back(std::move(p));
  }
  return out;
}

double domain_slack(const BenchmarkProblem& p) {
  return 1e-12 * std::max(1.0, std::abs(p.t_end) + std::abs(p.t_begin));
}

// Fourth-order (Richardson-extrapolated) central difference. The step is
// halved while successive estimates keep agreeing better; the estimate with
// the smallest change is returned, so truncation error near singularities
// (the square root of Problem 6) and rounding noise at tiny steps are both
// kept out.
template <class F>
double richardson(F f, double x, double h) {
  const auto d = [&](double step) { return (f(x + step) - f(x - step)) / (2.0 * step); };
  const auto est = [&](double step) { return (4.0 * d(0.5 * step) - d(step)) / 3.0; };
  double prev = est(h);
  double best = prev;
  double best_change = INFINITY;
  for (int k = 0; k < 30; ++k) {
    h *= 0.5;
    const double next = est(h);
    const double change = std::abs(next - prev);
    if (change < best_change) {
      best_change = change;
      best = next;
    } else if (change > 4.0 * best_change) {
      break;
    }
    if (change <= 1e-12 * std::max(std::abs(next), 1e-8)) break;
    prev = next;
  }
  return best;
}

double relative_gap(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

Conditions Conditions::ivp(double t0, std::vector<double> values) {
  Conditions c;
  c.kind = Kind::Ivp;
  for (std::size_t k = 0; k < values.size(); ++k)
    c.items.push_back({t0, static_cast<int>(k), values[k]});
  return c;
}

Conditions Conditions::bvp(double t0, double q0, double t1, double q1) {
  Conditions c;
  c.kind = Kind::Bvp;
  c.items = {{t0, 0, q0}, {t1, 0, q1}};
  return c;
}

int BenchmarkProblem::order() const {
  return std::visit([](const auto& s) { return s.order; }, spec);
}

const std::vector<BenchmarkProblem>& catalog() {
  static const std::vector<BenchmarkProblem> problems = build_catalog();
  return problems;
}

const BenchmarkProblem& problem_by_id(int id) {
  const auto& all = catalog();
  if (id < 1 || id > static_cast<int>(all.size()))
    throw Error(ErrorKind::InvalidConfig,
                "problem id " + std::to_string(id) + " outside 1..16");
  return all[static_cast<std::size_t>(id - 1)];
}

std::vector<double> uniform_grid(double t_begin, double t_end, int n) {
  if (n < 2) throw Error(ErrorKind::InvalidCount, "grid needs at least 2 points");
  std::vector<double> grid(static_cast<std::size_t>(n));
  const double h = (t_end - t_begin) / static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = t_begin + h * i;
  grid.back() = t_end;
  return grid;
}

Vector reference_solution(const BenchmarkProblem& problem,
                          std::span<const double> points, int ell) {
  const double slack = domain_slack(problem);
  Vector out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double t = points[i];
    if (!(t >= problem.t_begin - slack && t <= problem.t_end + slack))
      throw Error(ErrorKind::OutOfDomain,
                  "t = " + std::to_string(t) + " outside the domain of problem " +
                      std::to_string(problem.id));
    out[static_cast<Eigen::Index>(i)] = problem.reference(ell, t);
  }
  return out;
}

double ode_residual(const BenchmarkProblem& problem, double t,
                    std::span<const double> derivs) {
  const int p = problem.order();
  if (problem.is_linear()) {
    const auto& spec = problem.linear();
    double rhs = spec.forcing(t);
    for (int k = 1; k <= p; ++k)
      rhs += spec.coeffs[static_cast<std::size_t>(k - 1)](t) *
             derivs[static_cast<std::size_t>(p - k)];
    return derivs[static_cast<std::size_t>(p)] - rhs;
  }
  return derivs[static_cast<std::size_t>(p)] -
         problem.nonlinear().rhs(t, derivs.first(static_cast<std::size_t>(p)));
}

FirstOrderForm first_order_form(const BenchmarkProblem& problem) {
  FirstOrderForm form;
  const int p = problem.order();
  form.dimension = p;

  const double t0 = problem.t_begin;
  const auto limit = problem.left_limit_highest;
  std::function<double(double, std::span<const double>)> highest;
  if (problem.is_linear()) {
    const auto spec = problem.linear();
    highest = [spec, p](double t, std::span<const double> x) {
      double acc = spec.forcing(t);
      for (int k = 1; k <= p; ++k)
        acc += spec.coeffs[static_cast<std::size_t>(k - 1)](t) *
               x[static_cast<std::size_t>(p - k)];
      return acc;
    };
  } else {
    highest = problem.nonlinear().rhs;
  }
  form.rhs = [highest, limit, t0, p](double t, std::span<const double> x,
                                     std::span<double> dx) {
    for (int j = 0; j + 1 < p; ++j)
      dx[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j + 1)];
    dx[static_cast<std::size_t>(p - 1)] =
        (limit && t == t0) ? *limit : highest(t, x);
  };

  form.initial_state.assign(static_cast<std::size_t>(p), 0.0);
  if (problem.conditions.kind == Conditions::Kind::Ivp) {
    for (const auto& c : problem.conditions.items)
      form.initial_state[static_cast<std::size_t>(c.derivative)] = c.value;
  } else {
    for (int j = 0; j < p; ++j)
      form.initial_state[static_cast<std::size_t>(j)] = problem.reference(j, t0);
  }
  return form;
}

Vector integrate_reference(const BenchmarkProblem& problem,
                           std::span<const double> points, double tol) {
  namespace odeint = boost::numeric::odeint;
  if (problem.conditions.kind != Conditions::Kind::Ivp)
    throw Error(ErrorKind::InvalidArgument,
                "adaptive reference integration supports IVPs only");
  using State = std::vector<double>;
  const auto form = first_order_form(problem);
  const double slack = domain_slack(problem);
  std::vector<double> times{problem.t_begin};
  for (double t : points) {
    if (!(t >= problem.t_begin - slack && t <= problem.t_end + slack))
      throw Error(ErrorKind::OutOfDomain, "integration point outside the domain");
    if (t > times.back()) times.push_back(t);
  }
  std::vector<double> values;
  values.reserve(times.size());
  State x = form.initial_state;
  auto system = [&](const State& s, State& ds, double t) {
    form.rhs(t, s, ds);
  };
  auto observer = [&](const State& s, double) { values.push_back(s[0]); };
  if (times.size() == 1) {
    values.push_back(x[0]);
  } else {
    const double dt0 = (times[1] - times[0]) * 1e-3;
    odeint::integrate_times(
        odeint::make_dense_output(tol, tol, odeint::runge_kutta_dopri5<State>()),
        system, x, times.begin(), times.end(), dt0, observer);
  }

  Vector out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto it = std::lower_bound(times.begin(), times.end(), points[i]);
    out[static_cast<Eigen::Index>(i)] =
        values[static_cast<std::size_t>(std::distance(times.begin(), it))];
  }
  return out;
}

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const ValidationCheck& c) { return c.passed; });
}

const ValidationCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

ValidationReport validate_problem(const BenchmarkProblem& problem) {
  ValidationReport report;
  report.problem_id = problem.id;
  const int p = problem.order();
  const auto pz = static_cast<std::size_t>(p);

  // Residual on the open interior.
  {
    constexpr int kInterior = 200;
    const double h = (problem.t_end - problem.t_begin) / (kInterior + 1);
    double worst = 0.0;
    double scale = 0.0;
    std::vector<double> derivs(pz + 1);
    for (int k = 1; k <= kInterior; ++k) {
      const double t = problem.t_begin + h * k;
      for (std::size_t j = 0; j <= pz; ++j)
        derivs[j] = problem.reference(static_cast<int>(j), t);
      scale = std::max(scale, std::abs(derivs[pz]));
      const double r = ode_residual(problem, t, derivs);
      worst = std::max(worst, std::isfinite(r) ? std::abs(r) : INFINITY);
    }
    const double scaled = worst / (scale > 0.0 ? scale : 1.0);
    report.checks.push_back({"ode-residual", scaled <= 1e-8, scaled, 1e-8});
  }

  // Conditions.
  {
    double worst = 0.0;
    for (const auto& c : problem.conditions.items)
      worst = std::max(worst,
                       std::abs(problem.reference(c.derivative, c.point) - c.value));
    report.checks.push_back({"conditions", worst <= 1e-10, worst, 1e-10});
  }

  if (!problem.is_linear()) {
    const auto& spec = problem.nonlinear();
    std::mt19937_64 rng(0x5eedULL + static_cast<std::uint64_t>(problem.id));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_grad = 0.0;
    double worst_hess = 0.0;
    std::vector<double> state(pz), grad(pz), hess(pz * pz);
    int accepted = 0;
    for (int attempt = 0; accepted < 100 && attempt < 10000; ++attempt) {
      const double t =
          problem.t_begin + (0.02 + 0.96 * unit(rng)) * (problem.t_end - problem.t_begin);
      for (std::size_t j = 0; j < pz; ++j) {
        const double s = problem.reference(static_cast<int>(j), t);
        state[j] = s + (2.0 * unit(rng) - 1.0) * 0.1 * (std::abs(s) + 0.1);
      }
      bool finite = true;
      std::vector<double> probe = state;
      for (std::size_t j = 0; j < pz && finite; ++j) {
        const double h = 1e-3 * (std::abs(state[j]) + 1e-2);
        for (double sgn : {-1.0, 1.0}) {
          probe = state;
          probe[j] += sgn * h;
          finite = finite && std::isfinite(spec.rhs(t, probe));
        }
      }
      if (!finite || !std::isfinite(spec.rhs(t, state))) continue;
      ++accepted;
      if (!spec.partials) break;
      spec.partials(t, state, grad);
      for (std::size_t j = 0; j < pz; ++j) {
        const double h = 1e-3 * (std::abs(state[j]) + 1e-2);
        const double fd = richardson(
            [&](double v) {
              probe = state;
              probe[j] = v;
              return spec.rhs(t, probe);
            },
            state[j], h);
        worst_grad = std::max(worst_grad, relative_gap(grad[j], fd));
      }
      if (spec.second_partials) {
        spec.second_partials(t, state, hess);
        std::vector<double> g(pz);
        for (std::size_t i = 0; i < pz; ++i)
          for (std::size_t j = 0; j < pz; ++j) {
            const double h = 1e-3 * (std::abs(state[j]) + 1e-2);
            const double fd = richardson(
                [&](double v) {
                  probe = state;
                  probe[j] = v;
                  spec.partials(t, probe, g);
                  return g[i];
                },
                state[j], h);
            worst_hess = std::max(worst_hess, relative_gap(hess[i * pz + j], fd));
          }
      }
    }
    const bool have = static_cast<bool>(spec.partials);
    report.checks.push_back({"partials", have && accepted == 100 && worst_grad <= 1e-5,
                             have ? worst_grad : INFINITY, 1e-5});
    if (spec.second_partials)
      report.checks.push_back(
          {"second-partials", worst_hess <= 1e-5, worst_hess, 1e-5});
  }
  return report;
}

}  // namespace nlssvm
