#pragma once

#include <stdexcept>
#include <string>

namespace truncaug {

enum class ErrorKind {
  GeneralMode,
  InvalidKernel,
  StateOutsideTruncation,
  ReentryOutsideA1,
  NonFiniteLevelSet,
  ReducibleKernel,
  DimensionMismatch,
  IterationLimit,
  UnboundedG,
  SingularSystem,
  NoStabilization,
  NegativeResidual,
  InvalidCert,
  CycleLengthCap,
  InsufficientCycles,
  UnknownFunctional,
  DegenerateDenominator,
  ZeroExitRate,
  ParamOutOfRange,
  MinorizationRejected,
  Config,
};

const char* to_string(ErrorKind kind) noexcept;

// Config errors map to CLI exit code 2, everything else to 3.
inline bool is_config_error(ErrorKind kind) noexcept {
  return kind == ErrorKind::Config || kind == ErrorKind::ParamOutOfRange;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace truncaug
