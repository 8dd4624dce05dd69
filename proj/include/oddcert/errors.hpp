#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oddcert {

enum class ErrorCode {
  DimensionMismatch,
  Uncontrollable,
  InvalidParameter,
  EmptyRegion,
  ZeroGainSum,
  VertexBudgetExceeded,
  Infeasible,
  NumericalFailure,
  NoFeasibleInterval,
  ConfigError,
  NonFiniteState,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Uncontrollable: return "Uncontrollable";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::ZeroGainSum: return "ZeroGainSum";
    case ErrorCode::VertexBudgetExceeded: return "VertexBudgetExceeded";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::NoFeasibleInterval: return "NoFeasibleInterval";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace oddcert
