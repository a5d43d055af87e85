#pragma once

// Independent numerical oracles shared by the unit tests.

#include <cmath>
#include <limits>

namespace oracle {

// Central difference with one Richardson step; the step sequence is halved
// while successive estimates keep agreeing better.
template <class F>
double derivative(F f, double x, double h) {
  const auto d = [&](double s) { return (f(x + s) - f(x - s)) / (2.0 * s); };
  const auto est = [&](double s) { return (4.0 * d(0.5 * s) - d(s)) / 3.0; };
  double prev = est(h), best = prev, best_change = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 20; ++k) {
    h *= 0.5;
    const double next = est(h);
    const double change = std::abs(next - prev);
    if (change < best_change) {
      best_change = change;
      best = next;
    } else if (change > 4.0 * best_change) {
      break;
    }
    prev = next;
  }
  return best;
}

inline double rel(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
