#pragma once

#include <stdexcept>
#include <string>

namespace bottleneck {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes (config-type errors exit 2, numeric failures exit 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix lengths disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument value was violated.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// The request exceeds what exact enumeration can handle.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/inf input or a diverging computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row, long column)
      : Error(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  long row() const { return row_; }
  long column() const { return column_; }

 private:
  long row_;
  long column_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace bottleneck
