#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlssvm {

enum class ErrorKind {
  InvalidArgument,
  UnsupportedOrder,
  InvalidCount,
  DegenerateLandmarks,
  OutOfDomain,
  NonFinite,
  SingularSystem,
  PartialsMissing,
  MaxItersExceeded,
  SingularJacobian,
  Divergence,
  InsufficientTrace,
  LengthMismatch,
  ConstantReference,
  IncompatibleRuns,
  MemoryGuard,
  InvalidConfig,
  MissingModel,
};

/// Stable kebab-case name for an error kind; printed by the CLI on failure.
std::string_view error_kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view kind_name() const noexcept { return error_kind_name(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace nlssvm
