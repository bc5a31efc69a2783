#include "corrprobit/error.hpp"

namespace corrprobit {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::AsymmetricInput: return "AsymmetricInput";
    case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorCode::NormalizationViolated: return "NormalizationViolated";
    case ErrorCode::ZeroVariancePair: return "ZeroVariancePair";
    case ErrorCode::IntegrationFailure: return "IntegrationFailure";
    case ErrorCode::ParallelVectors: return "ParallelVectors";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoAcceptedSamples: return "NoAcceptedSamples";
    case ErrorCode::EnumerationTooLarge: return "EnumerationTooLarge";
    case ErrorCode::MixedTriples: return "MixedTriples";
    case ErrorCode::NoFeasibleAngle: return "NoFeasibleAngle";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NegativeScale: return "NegativeScale";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::InfeasibleAtCap: return "InfeasibleAtCap";
    case ErrorCode::NonPositiveRatio: return "NonPositiveRatio";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::ShrinkFailed: return "ShrinkFailed";
    case ErrorCode::EpsilonOutOfRange: return "EpsilonOutOfRange";
    case ErrorCode::SupportMismatch: return "SupportMismatch";
    case ErrorCode::RegimeUnsatisfiable: return "RegimeUnsatisfiable";
    case ErrorCode::NonFiniteLikelihood: return "NonFiniteLikelihood";
    case ErrorCode::DuplicateItemsInRow: return "DuplicateItemsInRow";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::AsymmetricInput:
    case ErrorCode::NormalizationViolated:
    case ErrorCode::EmptySubset:
    case ErrorCode::InvalidArgument:
    case ErrorCode::EnumerationTooLarge:
    case ErrorCode::MixedTriples:
    case ErrorCode::InsufficientSamples:
    case ErrorCode::EpsilonOutOfRange:
    case ErrorCode::DuplicateItemsInRow:
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
      return 2;
    case ErrorCode::NoFeasibleAngle:
    case ErrorCode::InfeasibleAtCap:
    case ErrorCode::DisconnectedGraph:
    case ErrorCode::ShrinkFailed:
    case ErrorCode::RegimeUnsatisfiable:
    case ErrorCode::SupportMismatch:
    case ErrorCode::NoAcceptedSamples:
      return 4;
    default:
      return 3;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace corrprobit
