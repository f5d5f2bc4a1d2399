#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace infograd {

enum class ErrorCode {
  NotPositiveDefinite,
  ShapeMismatch,
  NonMonotonicGrid,
  NonFiniteInput,
  MissingCondition,
  NonFiniteLoss,
  DegenerateDenominator,
  DegenerateSample,
  ConfigInvalid,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonMonotonicGrid: return "NonMonotonicGrid";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::MissingCondition: return "MissingCondition";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace infograd
