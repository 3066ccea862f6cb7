#pragma once

#include <stdexcept>
#include <string>

namespace isolab {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, malformed input files, inconsistent dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: non-convergence, underflow, non-PSD input, blow-up.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double off_diagonal_norm)
      : NumericalError(what), off_diagonal_norm_(off_diagonal_norm) {}
  double off_diagonal_norm() const noexcept { return off_diagonal_norm_; }

 private:
  double off_diagonal_norm_;
};

class NegativeEigenvalueError : public NumericalError {
 public:
  NegativeEigenvalueError(const std::string& what, double eigenvalue)
      : NumericalError(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

// A norm appearing in a cosine denominator fell below the floor.
class NormUnderflowError : public NumericalError {
 public:
  NormUnderflowError(const std::string& which, double norm)
      : NumericalError("norm underflow in cosine denominator: ||" + which +
                       "|| = " + std::to_string(norm)),
        which_(which),
        norm_(norm) {}
  const std::string& which() const noexcept { return which_; }
  double norm() const noexcept { return norm_; }

 private:
  std::string which_;
  double norm_;
};

}  // namespace isolab
