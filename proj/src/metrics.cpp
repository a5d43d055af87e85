#include "nlssvm/metrics.hpp"

#include <cmath>
#include <string>

#include "nlssvm/error.hpp"

namespace nlssvm {

namespace {

double percent(double a, double b) {
  if (a == 0.0) return b == 0.0 ? 0.0 : std::copysign(INFINITY, b);
  return 100.0 * (b - a) / a;
}

double ratio(double num, double den) {
  if (den > 0.0) return num / den;
  return num > 0.0 ? INFINITY : 1.0;
}

}  // namespace

ErrorMetrics compute_errors(std::span<const double> predicted,
                            std::span<const double> reference) {
  if (predicted.size() != reference.size())
    throw Error(ErrorKind::LengthMismatch,
                "predicted has " + std::to_string(predicted.size()) +
                    " values, reference has " + std::to_string(reference.size()));
  if (predicted.size() < 2)
    throw Error(ErrorKind::LengthMismatch, "need at least two samples");

  const auto n = static_cast<double>(predicted.size());
  double abs_sum = 0.0, sq_sum = 0.0, worst = 0.0, ref_sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - reference[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
    worst = std::max(worst, std::abs(d));
    ref_sum += reference[i];
  }
  const double ref_mean = ref_sum / n;
  double ss_tot = 0.0;
  for (double r : reference) ss_tot += (r - ref_mean) * (r - ref_mean);

  ErrorMetrics m;
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  m.linf = worst;
  if (ss_tot > 0.0) m.r2 = 1.0 - sq_sum / ss_tot;
  return m;
}

ErrorMetrics compute_errors(const Vector& predicted, const Vector& reference) {
  return compute_errors(
      std::span<const double>(predicted.data(), static_cast<std::size_t>(predicted.size())),
      std::span<const double>(reference.data(), static_cast<std::size_t>(reference.size())));
}

MetricDelta compare_metrics(const ErrorMetrics& a, const Timings& ta,
                            const ErrorMetrics& b, const Timings& tb) {
  MetricDelta d;
  if (a.r2 && b.r2) d.r2 = *b.r2 - *a.r2;
  d.mae = b.mae - a.mae;
  d.rmse = b.rmse - a.rmse;
  d.linf = b.linf - a.linf;
  d.mae_percent = percent(a.mae, b.mae);
  d.rmse_percent = percent(a.rmse, b.rmse);
  d.linf_percent = percent(a.linf, b.linf);
  d.speedup_total = ratio(ta.total(), tb.total());
  d.speedup_train = ratio(ta.train_seconds, tb.train_seconds);
  return d;
}

}  // namespace nlssvm
