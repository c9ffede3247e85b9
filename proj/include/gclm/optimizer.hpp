#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gclm/graph.hpp"
#include "gclm/loss.hpp"

namespace gclm {

struct FitConfig {
  LossFamily loss = LossFamily::gaussian_nll;
  double lambda = 0.0;
  // Weight of the ||C - I||_F^2 anchor; +inf freezes C at the identity.
  double reg_kappa = std::numeric_limits<double>::infinity();
  double epsilon = 1e-4;
  int max_iter = 100;
  double alpha = 0.5;  // line-search shrink factor
  // Eigenvalue real parts must stay below -stab_margin at every iterate.
  double stab_margin = 1e-8;
  // When set, the stopping test scales epsilon by 1 + |objective|.
  bool tol_relative = false;
};

struct FitResult {
  Matrix B;
  Vector c_diag;
  Matrix sigma;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_stalled = false;
  // Objective after initialization and after each accepted iteration.
  std::vector<double> objective_trace;
  // Spectral abscissa of B and smallest diagonal of C at each accepted iterate.
  std::vector<double> iterate_max_real;
  std::vector<double> iterate_min_c;

  Matrix c_matrix() const { return Matrix(c_diag.asDiagonal()); }
};

// Soft-thresholding applied to off-diagonal entries only; the diagonal passes
// through unchanged.
Matrix soft_threshold_offdiag(const Matrix& b, double threshold);

// Off-diagonal l1 norm, the penalty the threshold corresponds to.
double offdiag_l1(const Matrix& b);

// Edges i -> j with B(j, i) != 0 and i != j.
EdgeSet support_of(const Matrix& b);

// Proximal-gradient estimation of (B, C) against a covariance/correlation
// target. B0 must be stable; C starts at the identity unless c0 is given.
// An optional mask restricts B updates to the marked entries (used by the
// support-constrained refit).
FitResult prox_grad_fit(const Matrix& target, const FitConfig& config,
                        const Matrix& b0, const Vector* c0 = nullptr,
                        const Matrix* b_mask = nullptr);

// Log-regular grid of n penalty values from max_lambda * min_ratio up to
// max_lambda, in increasing order.
std::vector<double> lambda_grid(double max_lambda = 6.0, int n = 100,
                                double min_ratio = 1e-4);

struct FitPath {
  std::vector<double> lambdas;
  std::vector<FitResult> fits;
};

// Continuation along an increasing penalty sequence, starting from
// B0 = -1/2 * target^-1 (whose stationary covariance is the target itself)
// and warm-starting each step from the previous solution. A failed step
// records the previous iterate and continues.
FitPath fit_path(const Matrix& target, const std::vector<double>& lambdas,
                 const FitConfig& config);

// Unpenalized refit restricted to a support: entries outside
// support-union-diagonal are pinned to zero and their gradients masked.
// b0, when given, is pinned to the support first; an unstable pinned start
// falls back to -1/2 * I.
FitResult mle_refit(const Matrix& target, const EdgeSet& support,
                    const FitConfig& config, const Matrix* b0 = nullptr);

// JSON path records: {"lambda", "B", "C_diag", "objective", "iterations",
// "converged", "support"} with 1-based support edges.
std::string fit_path_to_json(const FitPath& path);
std::string fit_result_to_json(const FitResult& fit, double lambda);

// Named configuration presets: "mloglik-inf", "mloglik-0.01", "frob-inf".
void apply_preset(const std::string& name, FitConfig& config);

}  // namespace gclm
