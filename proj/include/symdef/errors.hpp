#pragma once

#include <stdexcept>
#include <string>

namespace symdef {

// Bad user input: malformed files, unknown names, violated preconditions.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Filesystem or subprocess failures.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Formula text that does not parse or type-check; carries the offending
// character position.
class FormulaError : public ValidationError {
  public:
    FormulaError(const std::string& message, std::size_t position)
        : ValidationError(message + " (at position " + std::to_string(position) + ")"),
          position_(position) {}

    std::size_t position() const { return position_; }

  private:
    std::size_t position_;
};

}  // namespace symdef
