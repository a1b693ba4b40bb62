#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace codcal {

/// Precondition violated by the caller (bad sizes, out-of-range alpha, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a usable result (e.g. singular covariance).
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based data row and the column name.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row, std::string column)
      : std::runtime_error(what), row_(row), column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

/// Raised by the Monte-Carlo harness; wraps the first failing trial.
class TrialError : public std::runtime_error {
 public:
  TrialError(std::size_t trial, const std::string& cause)
      : std::runtime_error("trial " + std::to_string(trial) + " failed: " + cause), trial_(trial) {}

  std::size_t trial() const noexcept { return trial_; }

 private:
  std::size_t trial_;
};

}  // namespace codcal
