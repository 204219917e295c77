#include "mpmrf/error.hpp"

namespace mpmrf {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::CycleOrDisconnected: return "CycleOrDisconnected";
    case Errc::DuplicateEdge: return "DuplicateEdge";
    case Errc::VertexOutOfRange: return "VertexOutOfRange";
    case Errc::Disconnected: return "Disconnected";
    case Errc::InvalidDegree: return "InvalidDegree";
    case Errc::InvalidSize: return "InvalidSize";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::NegativeCount: return "NegativeCount";
    case Errc::ArgumentOutOfRange: return "ArgumentOutOfRange";
    case Errc::DimensionTooLarge: return "DimensionTooLarge";
    case Errc::ThresholdNotOnLattice: return "ThresholdNotOnLattice";
    case Errc::TailMassTooLarge: return "TailMassTooLarge";
    case Errc::InfiniteMoment: return "InfiniteMoment";
    case Errc::TooFewExceedances: return "TooFewExceedances";
    case Errc::NonConvergence: return "NonConvergence";
    case Errc::ZeroMean: return "ZeroMean";
    case Errc::InvalidRate: return "InvalidRate";
    case Errc::NormalizationError: return "NormalizationError";
    case Errc::LatticeMismatch: return "LatticeMismatch";
    case Errc::InvalidKappa: return "InvalidKappa";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::ZeroMassOutcome: return "ZeroMassOutcome";
    case Errc::FiniteSupportViolated: return "FiniteSupportViolated";
    case Errc::SupercriticalRegime: return "SupercriticalRegime";
    case Errc::InvalidTheta: return "InvalidTheta";
    case Errc::TooFewPeriods: return "TooFewPeriods";
    case Errc::InvalidData: return "InvalidData";
    case Errc::SampleTooSmall: return "SampleTooSmall";
    case Errc::TooManyFailures: return "TooManyFailures";
    case Errc::NumericalFailure: return "NumericalFailure";
    case Errc::ParseError: return "ParseError";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace mpmrf
