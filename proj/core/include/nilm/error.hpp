#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nilm {

enum class ErrorCode {
  InvalidArgument,
  NoZeroCrossings,
  FrequencyOutOfRange,
  LengthMismatch,
  PeriodTooShort,
  PatternCollapse,
  WindowTooWide,
  NoCorrelatedHarmonic,
  DegenerateFit,
  InsufficientData,
  NoSteadyState,
  ClassTooSmall,
  ZeroTrueEnergy,
  AllUndefined,
  ParseError,
  UnitError,
  IoError,
};

/// Stable machine-readable name, e.g. "NoZeroCrossings".
std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace nilm
