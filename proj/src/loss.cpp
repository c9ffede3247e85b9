#include "gclm/loss.hpp"

#include <cmath>

namespace gclm {

namespace {

void check_target(const LossKind& loss, const Matrix& sigma) {
  if (loss.target.rows() != loss.target.cols()) {
    throw DimensionMismatch("loss target must be square");
  }
  if (sigma.rows() != sigma.cols() || sigma.rows() != loss.target.rows()) {
    throw DimensionMismatch("Sigma and loss target must have matching shapes");
  }
}

}  // namespace

double loss_value(const LossKind& loss, const Matrix& sigma) {
  check_target(loss, sigma);
  switch (loss.family) {
    case LossFamily::frobenius:
      return (sigma - loss.target).squaredNorm();
    case LossFamily::gaussian_nll: {
      const Matrix l = cholesky(sigma);
      double logdet = 0.0;
      for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i));
      logdet *= 2.0;
      const Matrix inv = cholesky_solve(l, Matrix::Identity(sigma.rows(), sigma.cols()));
      return logdet + loss.target.cwiseProduct(inv).sum();
    }
  }
  throw ValidationError("unknown loss family");
}

Matrix loss_grad_sigma(const LossKind& loss, const Matrix& sigma) {
  check_target(loss, sigma);
  switch (loss.family) {
    case LossFamily::frobenius:
      return 2.0 * (sigma - loss.target);
    case LossFamily::gaussian_nll: {
      const Matrix l = cholesky(sigma);
      const Matrix inv = cholesky_solve(l, Matrix::Identity(sigma.rows(), sigma.cols()));
      Matrix g = inv - inv * loss.target * inv;
      return 0.5 * (g + g.transpose());
    }
  }
  throw ValidationError("unknown loss family");
}

BcGradient grad_BC(const LossKind& loss, const SchurForm& sf,
                   const Matrix& sigma) {
  BcGradient out;
  out.sigma = sigma;
  out.value = loss_value(loss, sigma);
  const Matrix gs = loss_grad_sigma(loss, sigma);
  out.D = solve_lyapunov(sf, gs, /*transpose=*/true);
  out.grad_B = 2.0 * out.D * sigma;
  out.grad_C = out.D;
  out.grad_C_diag = out.grad_C.diagonal();
  return out;
}

BcGradient grad_BC(const LossKind& loss, const Matrix& b, const Matrix& c) {
  const SchurForm sf = schur_decompose(b);
  const Matrix sigma = solve_lyapunov(sf, c);
  return grad_BC(loss, sf, sigma);
}

}  // namespace gclm
