#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nmms {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operands live on different grids or have incompatible shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A scalar parameter is outside its admissible range (tau <= 0, eta too large, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (asymmetric matrix, non-finite start value, length mismatch).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A stated precondition of a formula does not hold, e.g. the eps-delta inequality.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// An iterative method produced NaN/Inf or failed to reach its tolerance.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual = 0.0)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// CSV ingestion failure. Rows and columns are 1-based; 0 means "not applicable".
class IngestionError : public Error {
 public:
  IngestionError(const std::string& what, std::size_t row = 0, std::size_t column = 0);
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

}  // namespace nmms
