#pragma once

#include "gclm/optimizer.hpp"

namespace gclm {

struct LassoConfig {
  double tol = 1e-8;       // largest coordinate change at convergence
  int max_sweeps = 10000;
  bool penalize_diagonal = false;
};

// Coordinate descent on || B S + S B^T + C ||_F^2 + lambda * l1(B offdiag)
// with closed-form scalar updates and row-major sweeps. No stability
// constraint; C is a fixed noise matrix (identity by default in the CLI).
struct LassoFit {
  Matrix B;
  double objective = 0.0;
  int sweeps = 0;
  bool converged = false;
};

LassoFit direct_lasso(const Matrix& sigma_hat, const Matrix& c, double lambda,
                      const LassoConfig& config = {},
                      const Matrix* b0 = nullptr);

// Largest |subgradient| of the smooth part over penalized coordinates after
// fitting with every penalized coordinate pinned at zero; penalties at or
// above this value leave B diagonal.
double lasso_lambda_max(const Matrix& sigma_hat, const Matrix& c,
                        const LassoConfig& config = {});

// Worst Karush-Kuhn-Tucker violation of a fit, for verification.
double lasso_kkt_violation(const Matrix& sigma_hat, const Matrix& c,
                           double lambda, const Matrix& b,
                           bool penalize_diagonal = false);

// Warm-started fits along an increasing penalty sequence, reported in the
// same path shape as the proximal-gradient estimator.
FitPath direct_lasso_path(const Matrix& sigma_hat,
                          const std::vector<double>& lambdas, const Matrix& c,
                          const LassoConfig& config = {});

// Support path from thresholding off-diagonal covariance magnitudes: the
// grid is 0 plus every distinct |S_ij|, and each threshold keeps the
// strictly larger entries, expanded to edges in both directions.
struct SupportPath {
  std::vector<double> thresholds;
  std::vector<EdgeSet> supports;
  Matrix scores;  // |S_ij| with a zero diagonal
};

SupportPath cov_threshold_path(const Matrix& sigma_hat);

std::string support_path_to_json(const SupportPath& path);

}  // namespace gclm
