#include "nilm/error.hpp"

namespace nilm {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoZeroCrossings: return "NoZeroCrossings";
    case ErrorCode::FrequencyOutOfRange: return "FrequencyOutOfRange";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::PeriodTooShort: return "PeriodTooShort";
    case ErrorCode::PatternCollapse: return "PatternCollapse";
    case ErrorCode::WindowTooWide: return "WindowTooWide";
    case ErrorCode::NoCorrelatedHarmonic: return "NoCorrelatedHarmonic";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NoSteadyState: return "NoSteadyState";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::ZeroTrueEnergy: return "ZeroTrueEnergy";
    case ErrorCode::AllUndefined: return "AllUndefined";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnitError: return "UnitError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace nilm
