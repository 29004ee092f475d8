#pragma once

#include <stdexcept>
#include <string>

namespace murs {

/// Raised when a value violates the documented preconditions of a type or
/// operation (zero counts, malformed pipelines, inconsistent semantics).
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a scenario file cannot be read or fails validation.
/// `line()` is 1-based; 0 means the error is not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace murs
