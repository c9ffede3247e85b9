#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "gclm/errors.hpp"
#include "gclm/matrix_io.hpp"

namespace gclm {

// Real Schur factorization A = Q T Q^T with orthogonal Q and quasi upper
// triangular T (1x1 and 2x2 diagonal blocks, 2x2 blocks carrying complex
// conjugate eigenvalue pairs).
struct SchurForm {
  Matrix Q;
  Matrix T;
  std::vector<std::complex<double>> eigenvalues;  // in diagonal-block order

  double max_real_part() const;
  double spectral_radius() const;
};

SchurForm schur_decompose(const Matrix& a);

// True when every eigenvalue has real part < -tol.
bool is_stable(const SchurForm& sf, double tol = 0.0);
bool is_stable(const Matrix& a, double tol = 0.0);

// Unique symmetric solution of B Sigma + Sigma B^T + C = 0, computed by Schur
// reduction and quasi-triangular back-substitution. Throws SingularLyapunov
// when some eigenvalue pair of B sums to (numerically) zero.
Matrix solve_lyapunov(const Matrix& b, const Matrix& c);

// Same, reusing a precomputed factorization of B. With transpose set, solves
// B^T Sigma + Sigma B + C = 0 using the same factors.
Matrix solve_lyapunov(const SchurForm& sf, const Matrix& c,
                      bool transpose = false);

// Independent dense route: solves the p^2 x p^2 Kronecker-sum system
// (B (+) B) vec(Sigma) = -vec(C). Intended for modest p; used to cross-check
// solve_lyapunov.
Matrix kron_solve(const Matrix& b, const Matrix& c);

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
// Throws NotPositiveDefinite with the index of the first failing pivot.
Matrix cholesky(const Matrix& s);

bool is_positive_definite(const Matrix& s);

// Solves S x = rhs given the lower Cholesky factor of S.
Matrix cholesky_solve(const Matrix& chol_lower, const Matrix& rhs);

// Matrix exponential (scaling-and-squaring). Oracle use only; production
// paths never call it.
Matrix matrix_exp(const Matrix& a);

namespace detail {
// Largest tolerated eigenvalue-pair sum magnitude below which the Lyapunov
// operator is treated as singular.
double singularity_threshold(const SchurForm& sf);
double min_pair_sum(const SchurForm& sf);
}  // namespace detail

}  // namespace gclm
