#pragma once

#include <stdexcept>
#include <string>

namespace transferkit {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument: wrong dimensions, bad site index, out-of-range parameter.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A dense allocation would exceed the configured memory budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of the operation (singular or
/// indefinite operator where a positive definite one is required).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Iteration produced a value that violates a structural invariant
/// (negative trace, lost positivity).
class NumericalBreakdown : public Error {
 public:
  using Error::Error;
};

/// The power iteration hit its iteration cap without meeting the tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed model or matrix file.
class MalformedInput : public Error {
 public:
  using Error::Error;
};

/// Two independent reference computations disagree.
class OracleMismatch : public Error {
 public:
  using Error::Error;
};

class NotHermitianError : public ArgumentError {
 public:
  NotHermitianError(std::string what, long row, long col, double asymmetry)
      : ArgumentError(std::move(what)), row_(row), col_(col), asymmetry_(asymmetry) {}

  /// Location (0-based) of the entry with the largest |X(i,j) - conj(X(j,i))|.
  long row() const noexcept { return row_; }
  long col() const noexcept { return col_; }
  double asymmetry() const noexcept { return asymmetry_; }

 private:
  long row_;
  long col_;
  double asymmetry_;
};

}  // namespace transferkit
