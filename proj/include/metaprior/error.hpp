#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace metaprior {

enum class ErrorCode {
  InvalidArgument = 1,
  DimensionMismatch,
  SimplexViolation,
  OutOfSupport,
  DegenerateGrid,
  NotADensity,
  EmptySample,
  InvalidBandwidth,
  ZeroMass,
  UnsupportedBandwidthMatrix,
  GridMismatch,
  TooFewSamples,
  RankDeficient,
  BudgetExceeded,
  DegenerateBelief,
  UndefinedHistory,
  DomainError,
  NonPositiveInput,
  Io,
  Parse,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Exception type thrown by every library operation. The code is what the
/// C API reports; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace metaprior
