#include "gclm/baselines.hpp"

#include <json.hpp>

#include <cmath>

namespace gclm {

namespace {

void check_inputs(const Matrix& sigma_hat, const Matrix& c) {
  if (sigma_hat.rows() != sigma_hat.cols()) {
    throw DimensionMismatch("covariance target must be square");
  }
  if (c.rows() != c.cols() || c.rows() != sigma_hat.rows()) {
    throw DimensionMismatch("C must match the covariance dimension");
  }
}

double soft_scalar(double x, double threshold) {
  const double mag = std::abs(x) - threshold;
  return mag > 0.0 ? (x > 0.0 ? mag : -mag) : 0.0;
}

double penalty_of(const Matrix& b, double lambda, bool penalize_diagonal) {
  double l1 = offdiag_l1(b);
  if (penalize_diagonal) l1 += b.diagonal().cwiseAbs().sum();
  return lambda * l1;
}

// One full row-major sweep of exact coordinate updates over the entries
// selected by `free_offdiag`/`free_diag`; returns the largest change.
// The residual R = B S + S B^T + C is maintained incrementally: changing
// B(i, j) by delta adds delta * S(j, :) to row i and delta * S(:, j) to
// column i of R.
double sweep(Matrix& b, Matrix& r, const Matrix& s, const Vector& col2,
             double lambda, bool penalize_diagonal, bool offdiag_free) {
  const int p = static_cast<int>(b.rows());
  double max_change = 0.0;
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i != j && !offdiag_free) continue;
      const double a = 2.0 * (col2(j) + s(i, j) * s(i, j));
      if (a == 0.0) continue;  // S column j is zero: coordinate has no effect
      const double inner = 2.0 * r.row(i).dot(s.col(j));  // <R, G_ij>
      const double q0 = inner - b(i, j) * a;  // value at B(i,j) = 0
      const bool penalized = (i != j) || penalize_diagonal;
      const double updated =
          penalized ? soft_scalar(-q0, 0.5 * lambda) / a : -q0 / a;
      const double delta = updated - b(i, j);
      if (delta != 0.0) {
        b(i, j) = updated;
        r.row(i) += delta * s.row(j);
        r.col(i) += delta * s.col(j);
      }
      max_change = std::max(max_change, std::abs(delta));
    }
  }
  return max_change;
}

}  // namespace

LassoFit direct_lasso(const Matrix& sigma_hat, const Matrix& c, double lambda,
                      const LassoConfig& config, const Matrix* b0) {
  check_inputs(sigma_hat, c);
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (!(config.tol > 0.0)) throw ValidationError("tol must be > 0");
  if (config.max_sweeps < 1) throw ValidationError("max_sweeps must be >= 1");
  const int p = static_cast<int>(sigma_hat.rows());
  const Matrix s = 0.5 * (sigma_hat + sigma_hat.transpose());

  LassoFit fit;
  fit.B = b0 ? *b0 : Matrix::Zero(p, p);
  if (b0 && (b0->rows() != p || b0->cols() != p)) {
    throw DimensionMismatch("B0 must match the covariance dimension");
  }
  Vector col2(p);
  for (int j = 0; j < p; ++j) col2(j) = s.col(j).squaredNorm();
  Matrix r = fit.B * s + s * fit.B.transpose() + c;

  for (int k = 0; k < config.max_sweeps; ++k) {
    const double change = sweep(fit.B, r, s, col2, lambda,
                                config.penalize_diagonal, /*offdiag_free=*/true);
    ++fit.sweeps;
    if (change < config.tol) {
      fit.converged = true;
      break;
    }
  }
  r = fit.B * s + s * fit.B.transpose() + c;  // refresh accumulated residual
  fit.objective =
      r.squaredNorm() + penalty_of(fit.B, lambda, config.penalize_diagonal);
  return fit;
}

double lasso_kkt_violation(const Matrix& sigma_hat, const Matrix& c,
                           double lambda, const Matrix& b,
                           bool penalize_diagonal) {
  check_inputs(sigma_hat, c);
  const int p = static_cast<int>(sigma_hat.rows());
  const Matrix s = 0.5 * (sigma_hat + sigma_hat.transpose());
  const Matrix r = b * s + s * b.transpose() + c;
  const Matrix rs = r * s;
  double worst = 0.0;
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      const double grad = 4.0 * rs(i, j);  // d/dB(i,j) of the smooth part
      const bool penalized = (i != j) || penalize_diagonal;
      double v;
      if (!penalized) {
        v = std::abs(grad);
      } else if (b(i, j) != 0.0) {
        v = std::abs(grad + (b(i, j) > 0.0 ? lambda : -lambda));
      } else {
        v = std::max(0.0, std::abs(grad) - lambda);
      }
      worst = std::max(worst, v);
    }
  }
  return worst;
}

double lasso_lambda_max(const Matrix& sigma_hat, const Matrix& c,
                        const LassoConfig& config) {
  check_inputs(sigma_hat, c);
  const int p = static_cast<int>(sigma_hat.rows());
  const Matrix s = 0.5 * (sigma_hat + sigma_hat.transpose());
  Matrix b = Matrix::Zero(p, p);
  Vector col2(p);
  for (int j = 0; j < p; ++j) col2(j) = s.col(j).squaredNorm();
  Matrix r = c;
  if (!config.penalize_diagonal) {
    // Optimize the unpenalized diagonal first; off-diagonals stay pinned.
    for (int k = 0; k < config.max_sweeps; ++k) {
      if (sweep(b, r, s, col2, 0.0, false, /*offdiag_free=*/false) < config.tol)
        break;
    }
  }
  r = b * s + s * b.transpose() + c;
  const Matrix rs = r * s;
  double worst = 0.0;
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i == j && !config.penalize_diagonal) continue;
      worst = std::max(worst, std::abs(4.0 * rs(i, j)));
    }
  }
  return worst;
}

FitPath direct_lasso_path(const Matrix& sigma_hat,
                          const std::vector<double>& lambdas, const Matrix& c,
                          const LassoConfig& config) {
  check_inputs(sigma_hat, c);
  if (lambdas.empty()) throw ValidationError("lambda sequence must be non-empty");
  for (size_t i = 1; i < lambdas.size(); ++i) {
    if (lambdas[i] < lambdas[i - 1]) {
      throw ValidationError("lambda sequence must be non-decreasing");
    }
  }
  FitPath path;
  path.lambdas = lambdas;
  const Matrix* warm = nullptr;
  for (double lambda : lambdas) {
    LassoFit fit = direct_lasso(sigma_hat, c, lambda, config, warm);
    FitResult rec;
    rec.B = std::move(fit.B);
    rec.c_diag = c.diagonal();
    rec.objective = fit.objective;
    rec.iterations = fit.sweeps;
    rec.converged = fit.converged;
    path.fits.push_back(std::move(rec));
    warm = &path.fits.back().B;
  }
  return path;
}

SupportPath cov_threshold_path(const Matrix& sigma_hat) {
  if (sigma_hat.rows() != sigma_hat.cols()) {
    throw DimensionMismatch("covariance target must be square");
  }
  const int p = static_cast<int>(sigma_hat.rows());
  SupportPath path;
  path.scores = sigma_hat.cwiseAbs();
  path.scores.diagonal().setZero();
  std::set<double> values{0.0};
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      if (i != j) values.insert(path.scores(i, j));
  for (double t : values) {
    EdgeSet support;
    for (int i = 0; i < p; ++i) {
      for (int j = i + 1; j < p; ++j) {
        if (path.scores(i, j) > t) {
          support.emplace(i, j);
          support.emplace(j, i);
        }
      }
    }
    path.thresholds.push_back(t);
    path.supports.push_back(std::move(support));
  }
  return path;
}

std::string support_path_to_json(const SupportPath& path) {
  nlohmann::json j;
  j["p"] = path.scores.rows();
  nlohmann::json records = nlohmann::json::array();
  for (size_t k = 0; k < path.supports.size(); ++k) {
    nlohmann::json rec;
    rec["lambda"] = path.thresholds[k];
    nlohmann::json support = nlohmann::json::array();
    for (const auto& [from, to] : path.supports[k])
      support.push_back({from + 1, to + 1});
    rec["support"] = std::move(support);
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  return j.dump(2);
}

}  // namespace gclm
