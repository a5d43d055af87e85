"""Nystrom-accelerated LS-SVM solvers for linear and nonlinear ODEs."""

from ._core import (
    ErrorMetrics,
    MetricDelta,
    NlssvmError,
    RunConfig,
    RunResult,
    Timings,
    __version__,
    catalog,
    compare,
    compute_errors,
    defaults,
    plot_data,
    problem,
    reference,
    solve,
    validate,
)

__all__ = [
    "ErrorMetrics",
    "MetricDelta",
    "NlssvmError",
    "RunConfig",
    "RunResult",
    "Timings",
    "__version__",
    "catalog",
    "compare",
    "compute_errors",
    "defaults",
    "plot_data",
    "problem",
    "reference",
    "solve",
    "validate",
]
