#pragma once

#include "gclm/lyapunov.hpp"

namespace gclm {

enum class LossFamily {
  gaussian_nll,  // log det Sigma + tr(target Sigma^-1)
  frobenius,     // || Sigma - target ||_F^2
};

struct LossKind {
  LossFamily family = LossFamily::gaussian_nll;
  Matrix target;
};

double loss_value(const LossKind& loss, const Matrix& sigma);

// Entrywise gradient with respect to Sigma (symmetric for symmetric inputs).
Matrix loss_grad_sigma(const LossKind& loss, const Matrix& sigma);

// Gradient of B, C |-> L(Sigma(B, C)) via the adjoint Lyapunov solve
// D = Sigma(B^T, grad_sigma), sharing one Schur factorization of B.
struct BcGradient {
  double value = 0.0;
  Matrix sigma;
  Matrix D;            // adjoint solve output
  Matrix grad_B;       // entrywise partials: 2 * D * Sigma
  Matrix grad_C;       // entrywise partials: D itself
  Vector grad_C_diag;  // its diagonal, the part the estimator uses
};

BcGradient grad_BC(const LossKind& loss, const Matrix& b, const Matrix& c);

// Same, reusing a factorization of B and the already-solved Sigma(B, C).
BcGradient grad_BC(const LossKind& loss, const SchurForm& sf,
                   const Matrix& sigma);

}  // namespace gclm
