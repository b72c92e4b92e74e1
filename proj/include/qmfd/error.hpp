#pragma once

#include <stdexcept>
#include <string>

namespace qmfd {

// Bad input caught before any computation (exit code 2 in the CLI).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A requested combination the implementation deliberately does not support.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Numerical failure detected at runtime (exit code 1 in the CLI).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BlowUpError : public NumericalError {
 public:
  BlowUpError(const std::string& what, double t) : NumericalError(what), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

class InstabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class PreconditionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace qmfd
