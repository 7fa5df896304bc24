#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ensemble_ols {

enum class ErrorCode {
  ConstraintInfeasible,
  RejectionBudgetExhausted,
  EmptyInput,
  InvalidDimensions,
  SingularSystem,
  RankDeficient,
  BudgetExceeded,
  DomainError,
  DegenerateDenominator,
  InfeasibleInterval,
  InfeasibleSizes,
  DimensionMismatch,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and the Python bindings) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ensemble_ols
