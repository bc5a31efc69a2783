#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace corrprobit {

enum class ErrorCode {
  AsymmetricInput,
  DegenerateCovariance,
  NotPositiveSemidefinite,
  NormalizationViolated,
  ZeroVariancePair,
  IntegrationFailure,
  ParallelVectors,
  EmptySubset,
  InvalidArgument,
  NoAcceptedSamples,
  EnumerationTooLarge,
  MixedTriples,
  NoFeasibleAngle,
  SingularSystem,
  NegativeScale,
  InsufficientSamples,
  InfeasibleAtCap,
  NonPositiveRatio,
  DisconnectedGraph,
  ShrinkFailed,
  EpsilonOutOfRange,
  SupportMismatch,
  RegimeUnsatisfiable,
  NonFiniteLikelihood,
  DuplicateItemsInRow,
  ParseError,
  IoError,
};

std::string_view error_name(ErrorCode code);

// Process exit code for the command-line tool: 2 input, 3 numeric, 4 infeasible.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace corrprobit
