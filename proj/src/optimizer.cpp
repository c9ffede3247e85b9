#include "gclm/optimizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace gclm {

namespace {

constexpr double kStallFloor = 1e-12;
constexpr int kMaxHalvings = 60;

double anchor_penalty(const Vector& c, double kappa) {
  if (std::isinf(kappa)) return 0.0;
  return kappa * (c.array() - 1.0).square().sum();
}

void validate_config(const FitConfig& config) {
  if (!(config.lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (!(config.reg_kappa > 0.0)) throw ValidationError("reg_kappa must be > 0");
  if (!(config.epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  if (config.max_iter < 0) throw ValidationError("max_iter must be >= 0");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  if (!(config.stab_margin >= 0.0)) {
    throw ValidationError("stab_margin must be >= 0");
  }
}

struct Iterate {
  Matrix B;
  Vector c;
  SchurForm schur;
  Matrix sigma;
  double f = 0.0;
  double g = 0.0;
};

}  // namespace

Matrix soft_threshold_offdiag(const Matrix& b, double threshold) {
  if (b.rows() != b.cols()) throw DimensionMismatch("B must be square");
  if (!(threshold >= 0.0)) throw ValidationError("threshold must be >= 0");
  Matrix out = b;
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      if (i == j) continue;
      const double x = b(i, j);
      const double mag = std::abs(x) - threshold;
      out(i, j) = mag > 0.0 ? (x > 0.0 ? mag : -mag) : 0.0;
    }
  }
  return out;
}

double offdiag_l1(const Matrix& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      if (i != j) s += std::abs(b(i, j));
  return s;
}

EdgeSet support_of(const Matrix& b) {
  EdgeSet s;
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      if (i != j && b(j, i) != 0.0)
        s.emplace(static_cast<int>(i), static_cast<int>(j));
  return s;
}

FitResult prox_grad_fit(const Matrix& target, const FitConfig& config,
                        const Matrix& b0, const Vector* c0,
                        const Matrix* b_mask) {
  validate_config(config);
  if (target.rows() != target.cols()) {
    throw DimensionMismatch("target must be square");
  }
  const int p = static_cast<int>(target.rows());
  if (b0.rows() != p || b0.cols() != p) {
    throw DimensionMismatch("B0 must match the target dimension");
  }
  if (b_mask && (b_mask->rows() != p || b_mask->cols() != p)) {
    throw DimensionMismatch("mask must match the target dimension");
  }
  const bool anchored = !std::isinf(config.reg_kappa);
  const LossKind loss{config.loss, target};

  Iterate cur;
  cur.B = b0;
  cur.c = c0 ? *c0 : Vector::Ones(p);
  if (c0 && (c0->size() != p || (c0->array() <= 0.0).any())) {
    throw ValidationError("C0 diagonal must be positive with matching size");
  }
  cur.schur = schur_decompose(cur.B);
  if (!is_stable(cur.schur, config.stab_margin)) {
    throw ValidationError("B0 must be stable");
  }
  cur.sigma = solve_lyapunov(cur.schur, Matrix(cur.c.asDiagonal()));
  cur.f = loss_value(loss, cur.sigma) + anchor_penalty(cur.c, config.reg_kappa);
  cur.g = config.lambda * offdiag_l1(cur.B);

  FitResult result;
  auto record_iterate = [&](const Iterate& it) {
    result.objective_trace.push_back(it.f + it.g);
    result.iterate_max_real.push_back(it.schur.max_real_part());
    result.iterate_min_c.push_back(it.c.minCoeff());
  };
  record_iterate(cur);

  auto finish = [&](const Iterate& it, bool converged, bool stalled,
                    int iterations) {
    result.B = it.B;
    result.c_diag = it.c;
    result.sigma = it.sigma;
    result.objective = it.f + it.g;
    result.iterations = iterations;
    result.converged = converged;
    result.line_search_stalled = stalled;
    return result;
  };

  int iter = 0;
  // Warm-started global step: each line search resumes from the last
  // accepted step size, probing one growth factor above it, instead of
  // re-descending from 1 every iteration.
  double s_init = 1.0;
  while (iter < config.max_iter) {
    const BcGradient grads = grad_BC(loss, cur.schur, cur.sigma);
    Matrix grad_b = grads.grad_B;
    if (b_mask) grad_b = grad_b.cwiseProduct(*b_mask);
    Vector grad_c;
    double t = 1.0;
    if (anchored) {
      grad_c = 2.0 * grads.grad_C_diag +
               2.0 * config.reg_kappa * (cur.c.array() - 1.0).matrix();
      bool ok = false;
      for (int h = 0; h <= kMaxHalvings; ++h) {
        if (((cur.c - t * grad_c).array() > 0.0).all()) {
          ok = true;
          break;
        }
        t *= 0.5;
      }
      if (!ok) return finish(cur, false, true, iter);
    }
    double r = 1.0;
    {
      bool ok = false;
      for (int h = 0; h <= kMaxHalvings; ++h) {
        const Matrix cand =
            soft_threshold_offdiag(cur.B - r * grad_b, r * config.lambda);
        if (is_stable(cand, config.stab_margin)) {
          ok = true;
          break;
        }
        r *= 0.5;
      }
      if (!ok) return finish(cur, false, true, iter);
    }

    double s = std::min(1.0, s_init / config.alpha);
    bool accepted = false;
    Iterate next;
    while (s >= kStallFloor) {
      next.B = soft_threshold_offdiag(cur.B - (s * r) * grad_b,
                                      s * r * config.lambda);
      next.c = anchored ? Vector(cur.c - (s * t) * grad_c) : cur.c;
      bool feasible = (next.c.array() > 0.0).all();
      if (feasible) {
        try {
          next.schur = schur_decompose(next.B);
          if (!is_stable(next.schur, config.stab_margin)) {
            feasible = false;
          } else {
            next.sigma =
                solve_lyapunov(next.schur, Matrix(next.c.asDiagonal()));
            next.f = loss_value(loss, next.sigma) +
                     anchor_penalty(next.c, config.reg_kappa);
          }
        } catch (const NumericalError&) {
          feasible = false;
        }
      }
      if (feasible) {
        next.g = config.lambda * offdiag_l1(next.B);
        double nu = (cur.B - next.B).squaredNorm() / r;
        if (anchored) nu += (cur.c - next.c).squaredNorm() / t;
        nu /= 2.0 * s;
        nu += ((next.B - cur.B) * grad_b).trace();
        if (anchored) nu += (next.c - cur.c).dot(grad_c);
        if (next.f + next.g <= cur.f + cur.g && next.f <= cur.f + nu) {
          accepted = true;
          break;
        }
      }
      s *= config.alpha;
    }
    if (!accepted) return finish(cur, false, true, iter);
    s_init = s;

    const double delta = (cur.f + cur.g) - (next.f + next.g);
    const double tol = config.tol_relative
                           ? config.epsilon * (1.0 + std::abs(cur.f + cur.g))
                           : config.epsilon;
    cur = std::move(next);
    ++iter;
    record_iterate(cur);
    if (delta < tol) return finish(cur, true, false, iter);
  }
  return finish(cur, false, false, iter);
}

std::vector<double> lambda_grid(double max_lambda, int n, double min_ratio) {
  if (!(max_lambda > 0.0)) throw ValidationError("max_lambda must be > 0");
  if (n < 1) throw ValidationError("grid size must be >= 1");
  if (!(min_ratio > 0.0 && min_ratio <= 1.0)) {
    throw ValidationError("min_ratio must lie in (0, 1]");
  }
  std::vector<double> grid(static_cast<size_t>(n));
  if (n == 1) {
    grid[0] = max_lambda;
    return grid;
  }
  for (int i = 0; i < n; ++i) {
    const double frac = static_cast<double>(n - 1 - i) / (n - 1);
    grid[static_cast<size_t>(i)] = max_lambda * std::pow(min_ratio, frac);
  }
  return grid;
}

FitPath fit_path(const Matrix& target, const std::vector<double>& lambdas,
                 const FitConfig& config) {
  if (lambdas.empty()) throw ValidationError("lambda sequence must be non-empty");
  for (size_t i = 1; i < lambdas.size(); ++i) {
    if (lambdas[i] < lambdas[i - 1]) {
      throw ValidationError("lambda sequence must be non-decreasing");
    }
  }
  const Matrix l = cholesky(target);
  const Matrix b0 =
      -0.5 * cholesky_solve(l, Matrix::Identity(target.rows(), target.cols()));

  FitPath path;
  path.lambdas = lambdas;
  const Vector* warm_c = nullptr;
  const Matrix* warm_b = &b0;
  for (size_t i = 0; i < lambdas.size(); ++i) {
    FitConfig step = config;
    step.lambda = lambdas[i];
    try {
      FitResult fit = prox_grad_fit(target, step, *warm_b, warm_c);
      path.fits.push_back(std::move(fit));
    } catch (const NumericalError&) {
      if (path.fits.empty()) throw;
      FitResult repeat = path.fits.back();
      repeat.converged = false;
      path.fits.push_back(std::move(repeat));
    }
    warm_b = &path.fits.back().B;
    warm_c = &path.fits.back().c_diag;
  }
  return path;
}

FitResult mle_refit(const Matrix& target, const EdgeSet& support,
                    const FitConfig& config, const Matrix* b0) {
  if (target.rows() != target.cols()) {
    throw DimensionMismatch("target must be square");
  }
  const int p = static_cast<int>(target.rows());
  Matrix mask = Matrix::Identity(p, p);
  for (const auto& [from, to] : support) {
    if (from < 0 || from >= p || to < 0 || to >= p) {
      throw ValidationError("support edge out of range");
    }
    mask(to, from) = 1.0;
  }
  Matrix start = b0 ? b0->cwiseProduct(mask).eval()
                    : Matrix(-0.5 * Matrix::Identity(p, p));
  if (b0 && (b0->rows() != p || b0->cols() != p)) {
    throw DimensionMismatch("B0 must match the target dimension");
  }
  if (!is_stable(start, config.stab_margin)) {
    start = -0.5 * Matrix::Identity(p, p);
  }
  FitConfig step = config;
  step.lambda = 0.0;
  return prox_grad_fit(target, step, start, nullptr, &mask);
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json fit_record(const FitResult& fit, double lambda) {
  nlohmann::json rec;
  rec["lambda"] = lambda;
  rec["B"] = matrix_to_json(fit.B);
  rec["C_diag"] = std::vector<double>(fit.c_diag.data(),
                                      fit.c_diag.data() + fit.c_diag.size());
  rec["objective"] = fit.objective;
  rec["iterations"] = fit.iterations;
  rec["converged"] = fit.converged;
  rec["line_search_stalled"] = fit.line_search_stalled;
  nlohmann::json support = nlohmann::json::array();
  for (const auto& [from, to] : support_of(fit.B))
    support.push_back({from + 1, to + 1});
  rec["support"] = std::move(support);
  return rec;
}

}  // namespace

std::string fit_result_to_json(const FitResult& fit, double lambda) {
  return fit_record(fit, lambda).dump(2);
}

std::string fit_path_to_json(const FitPath& path) {
  nlohmann::json j;
  j["p"] = path.fits.empty() ? 0 : static_cast<int>(path.fits.front().B.rows());
  nlohmann::json records = nlohmann::json::array();
  for (size_t i = 0; i < path.fits.size(); ++i)
    records.push_back(fit_record(path.fits[i], path.lambdas[i]));
  j["records"] = std::move(records);
  return j.dump(2);
}

void apply_preset(const std::string& name, FitConfig& config) {
  if (name == "mloglik-inf") {
    config.loss = LossFamily::gaussian_nll;
    config.reg_kappa = std::numeric_limits<double>::infinity();
  } else if (name == "mloglik-0.01") {
    config.loss = LossFamily::gaussian_nll;
    config.reg_kappa = 0.01;
  } else if (name == "frob-inf") {
    config.loss = LossFamily::frobenius;
    config.reg_kappa = std::numeric_limits<double>::infinity();
  } else {
    throw ValidationError("unknown preset: " + name +
                          " (expected mloglik-inf, mloglik-0.01, or frob-inf)");
  }
}

}  // namespace gclm
