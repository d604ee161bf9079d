#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace exceed {

/// Bad input: malformed files, invalid parameters, violated preconditions.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A parse failure that knows which input line caused it.
class ParseError : public ValidationError {
public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line), message_(what) {}

  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line), message_(what) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

private:
  std::size_t line_;
  std::string message_;
};

/// Numerical breakdown: failed factorization, overflow, non-finite objective.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace exceed
