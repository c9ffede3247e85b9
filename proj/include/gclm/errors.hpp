#pragma once

#include <stdexcept>
#include <string>

namespace gclm {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input: shapes, parse failures, malformed requests. CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: singular systems, indefiniteness, divergence. CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A data column with zero variance cannot be standardized.
class DegenerateColumn : public ValidationError {
 public:
  DegenerateColumn(int column, const std::string& msg)
      : ValidationError(msg), column(column) {}
  int column;
};

// QR iteration failed to converge while computing a Schur factorization.
class ConvergenceFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Two eigenvalues of the drift matrix sum to (numerically) zero, so the
// continuous Lyapunov equation has no unique solution.
class SingularLyapunov : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NotPositiveDefinite : public NumericalError {
 public:
  NotPositiveDefinite(int pivot, const std::string& msg)
      : NumericalError(msg), pivot(pivot) {}
  int pivot;  // 0-based index of the failing Cholesky pivot
};

// The kept-block drift matrix of a marginalization has a singular
// eigenvalue-pair sum, so the marginal parameters are not defined.
class MarginalNotUnique : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class OverflowError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace gclm
