#include "nlssvm/error.hpp"

namespace nlssvm {

std::string_view error_kind_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::UnsupportedOrder: return "unsupported-order";
    case ErrorKind::InvalidCount: return "invalid-count";
    case ErrorKind::DegenerateLandmarks: return "degenerate-landmarks";
    case ErrorKind::OutOfDomain: return "out-of-domain";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::SingularSystem: return "singular-system";
    case ErrorKind::PartialsMissing: return "partials-missing";
    case ErrorKind::MaxItersExceeded: return "max-iters-exceeded";
    case ErrorKind::SingularJacobian: return "singular-jacobian";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::InsufficientTrace: return "insufficient-trace";
    case ErrorKind::LengthMismatch: return "length-mismatch";
    case ErrorKind::ConstantReference: return "constant-reference";
    case ErrorKind::IncompatibleRuns: return "incompatible-runs";
    case ErrorKind::MemoryGuard: return "memory-guard";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::MissingModel: return "missing-model";
  }
  return "unknown";
}

}  // namespace nlssvm
