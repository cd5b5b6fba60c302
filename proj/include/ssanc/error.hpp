#pragma once

#include <stdexcept>
#include <string>

namespace ssanc {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied argument violates an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File or configuration could not be loaded (missing file, bad WAV, bad JSON).
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A numerical step failed: singular system, failed factorization, ...
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Power iteration did not reach the requested tolerance.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double best_estimate)
      : NumericError(what), best_estimate_(best_estimate) {}

  double best_estimate() const noexcept { return best_estimate_; }

 private:
  double best_estimate_;
};

/// Equality constraints are inconsistent even after dropping dependent rows.
class InfeasibleError : public NumericError {
 public:
  InfeasibleError(const std::string& what, double residual)
      : NumericError(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace ssanc
