#pragma once

#include <optional>
#include <span>

#include "nlssvm/types.hpp"

namespace nlssvm {

struct ErrorMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double linf = 0.0;
  std::optional<double> r2;  // absent when the reference is constant
};

struct Timings {
  double train_seconds = 0.0;
  double predict_seconds = 0.0;
  double total() const { return train_seconds + predict_seconds; }
};

/// Pointwise errors of `predicted` against `reference`. R^2 uses the
/// reference mean in the total sum of squares. Throws LengthMismatch on
/// unequal lengths or fewer than two samples.
ErrorMetrics compute_errors(std::span<const double> predicted,
                            std::span<const double> reference);
ErrorMetrics compute_errors(const Vector& predicted, const Vector& reference);

/// Differences b - a. The percentages are relative to a, as in the
/// comparison tables; speedups are a's time over b's.
struct MetricDelta {
  std::optional<double> r2;
  double mae = 0.0;
  double rmse = 0.0;
  double linf = 0.0;
  double mae_percent = 0.0;
  double rmse_percent = 0.0;
  double linf_percent = 0.0;
  double speedup_total = 1.0;  // (train + predict)
  double speedup_train = 1.0;
};

MetricDelta compare_metrics(const ErrorMetrics& a, const Timings& ta,
                            const ErrorMetrics& b, const Timings& tb);

}  // namespace nlssvm
