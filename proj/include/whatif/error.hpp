#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace whatif {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A network or demand value would violate a structural invariant
/// (missing endpoint, duplicate road, nonpositive attribute, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A referenced id does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// One or more demanded OD pairs have no path in the network.
class UnreachableOdError : public Error {
 public:
  using Error::Error;
};

/// Operation is not permitted on the target (e.g. deleting the root state).
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. `line()` is 1-based; 0 when no line applies.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace whatif
