#include "ensemble_ols/error.hpp"

namespace ensemble_ols {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConstraintInfeasible: return "ConstraintInfeasible";
    case ErrorCode::RejectionBudgetExhausted: return "RejectionBudgetExhausted";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidDimensions: return "InvalidDimensions";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::InfeasibleInterval: return "InfeasibleInterval";
    case ErrorCode::InfeasibleSizes: return "InfeasibleSizes";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace ensemble_ols
