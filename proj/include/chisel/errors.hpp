#pragma once

#include <stdexcept>
#include <string>

namespace chisel {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or parameters. The CLI maps these to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Numerical failures. The CLI maps these to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class BlowupError : public NumericalError {
 public:
  BlowupError(const std::string& what, long step) : NumericalError(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DataError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Raised when a curve does not extend far enough to contain a plateau.
class RangeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoFringeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace chisel
