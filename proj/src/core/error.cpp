#include "metaprior/error.hpp"

namespace metaprior {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SimplexViolation: return "SimplexViolation";
    case ErrorCode::OutOfSupport: return "OutOfSupport";
    case ErrorCode::DegenerateGrid: return "DegenerateGrid";
    case ErrorCode::NotADensity: return "NotADensity";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::InvalidBandwidth: return "InvalidBandwidth";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::UnsupportedBandwidthMatrix: return "UnsupportedBandwidthMatrix";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::DegenerateBelief: return "DegenerateBelief";
    case ErrorCode::UndefinedHistory: return "UndefinedHistory";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
  }
  return "Unknown";
}

}  // namespace metaprior
