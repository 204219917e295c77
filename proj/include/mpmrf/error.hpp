#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mpmrf {

enum class Errc {
  CycleOrDisconnected,
  DuplicateEdge,
  VertexOutOfRange,
  Disconnected,
  InvalidDegree,
  InvalidSize,
  InvalidParams,
  NegativeCount,
  ArgumentOutOfRange,
  DimensionTooLarge,
  ThresholdNotOnLattice,
  TailMassTooLarge,
  InfiniteMoment,
  TooFewExceedances,
  NonConvergence,
  ZeroMean,
  InvalidRate,
  NormalizationError,
  LatticeMismatch,
  InvalidKappa,
  ZeroVariance,
  ZeroMassOutcome,
  FiniteSupportViolated,
  SupercriticalRegime,
  InvalidTheta,
  TooFewPeriods,
  InvalidData,
  SampleTooSmall,
  TooManyFailures,
  NumericalFailure,
  ParseError,
  ConfigError,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mpmrf
