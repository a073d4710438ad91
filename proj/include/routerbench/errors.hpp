#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace routerbench {

// Exit codes shared by the CLI and the error types that map onto them.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitConfig = 2,
  kExitInternal = 3,
};

// Input data violates the record schema or a table invariant.
// Carries the individual violations so callers can report more than one.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::string message)
      : std::runtime_error(message), violations_{std::move(message)} {}

  ValidationError(std::string message, std::vector<std::string> violations)
      : std::runtime_error(std::move(message)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// Bad configuration, arguments, or unresolvable paths.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace routerbench
