#pragma once

#include <stdexcept>
#include <string>

namespace cqr {

// Bad input to a library call (dimension mismatch, level out of range, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ceil((1 - alpha)(m + 1)) exceeds m: the calibration set is too small.
class CalibrationInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A theorem-level side condition does not hold for the requested evaluation.
class PreconditionFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RowError : public std::runtime_error {
 public:
  RowError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cqr
