#include "truncaug/error.hpp"

namespace truncaug {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::GeneralMode: return "GeneralModeError";
    case ErrorKind::InvalidKernel: return "InvalidKernel";
    case ErrorKind::StateOutsideTruncation: return "StateOutsideTruncation";
    case ErrorKind::ReentryOutsideA1: return "ReentryOutsideA1";
    case ErrorKind::NonFiniteLevelSet: return "NonFiniteLevelSet";
    case ErrorKind::ReducibleKernel: return "ReducibleKernel";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::IterationLimit: return "IterationLimit";
    case ErrorKind::UnboundedG: return "UnboundedG";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NoStabilization: return "NoStabilization";
    case ErrorKind::NegativeResidual: return "NegativeResidual";
    case ErrorKind::InvalidCert: return "InvalidCert";
    case ErrorKind::CycleLengthCap: return "CycleLengthCap";
    case ErrorKind::InsufficientCycles: return "InsufficientCycles";
    case ErrorKind::UnknownFunctional: return "UnknownFunctional";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::ZeroExitRate: return "ZeroExitRate";
    case ErrorKind::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorKind::MinorizationRejected: return "MinorizationRejected";
    case ErrorKind::Config: return "ConfigError";
  }
  return "Error";
}

}  // namespace truncaug
