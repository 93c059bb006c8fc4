#pragma once

#include <stdexcept>
#include <string>

namespace dlgp {

enum class ErrorCode {
  kUnknownBlock,
  kInapplicableAction,
  kAlreadySatisfied,
  kNoConflict,
  kCycleDetected,
  kInfeasible,
  kNodeBudgetExceeded,
  kInapplicableDisturbance,
  kGenerationExhausted,
  kOracleExhausted,
  kInvalidInput,
  kDegenerateModel,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownBlock: return "UnknownBlock";
    case ErrorCode::kInapplicableAction: return "InapplicableAction";
    case ErrorCode::kAlreadySatisfied: return "AlreadySatisfied";
    case ErrorCode::kNoConflict: return "NoConflict";
    case ErrorCode::kCycleDetected: return "CycleDetected";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kNodeBudgetExceeded: return "NodeBudgetExceeded";
    case ErrorCode::kInapplicableDisturbance: return "Inapplicable";
    case ErrorCode::kGenerationExhausted: return "GenerationExhausted";
    case ErrorCode::kOracleExhausted: return "Exhausted";
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kDegenerateModel: return "DegenerateModel";
  }
  return "?";
}

class PlanningError : public std::runtime_error {
 public:
  PlanningError(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const { return code_; }
  // For kInapplicableAction this names the violated precondition.
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace dlgp
