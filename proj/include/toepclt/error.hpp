#pragma once

#include <stdexcept>
#include <string>

namespace toepclt {

/// Raised when a caller breaks an operation's precondition.
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace toepclt
