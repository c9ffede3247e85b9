#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "gclm/optimizer.hpp"
#include "gclm/simeval.hpp"
#include "test_support.hpp"

using gclm::FitConfig;
using gclm::FitResult;
using gclm::LossFamily;
using gclm::LossKind;
using gclm::Matrix;
using gclm::Vector;
using namespace testsupport;

namespace {

Matrix default_start(const Matrix& target) {
  int p = static_cast<int>(target.rows());
  return Matrix(-0.5 * target.llt().solve(Matrix::Identity(p, p)));
}

void check_iterate_invariants(const FitResult& fit) {
  REQUIRE(!fit.objective_trace.empty());
  for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
    CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1] + 1e-12);
  }
  for (double re : fit.iterate_max_real) CHECK(re < 0.0);
  for (double c : fit.iterate_min_c) CHECK(c > 0.0);
}

}  // namespace

TEST_CASE("soft thresholding spares the diagonal") {
  Matrix b(2, 2);
  b << -1.0, 0.3,
       -0.05, -2.0;
  Matrix s = gclm::soft_threshold_offdiag(b, 0.1);
  CHECK(s(0, 0) == -1.0);
  CHECK(s(1, 1) == -2.0);
  CHECK(s(0, 1) == doctest::Approx(0.2));
  CHECK(s(1, 0) == 0.0);
  CHECK(gclm::offdiag_l1(b) == doctest::Approx(0.35));
  CHECK(gclm::offdiag_l1(s) == doctest::Approx(0.2));
  CHECK(gclm::support_of(s) == gclm::EdgeSet{{1, 0}});
}

TEST_CASE("descent run keeps its contract on a sampled target") {
  std::mt19937_64 rng(301);
  gclm::GenConfig gen;
  gen.p = 6;
  gen.edge_prob = 0.3;
  gclm::DriftPair model = gclm::generate_model(gen, rng);
  Matrix sigma = gclm::solve_lyapunov(model.B, model.C);
  Matrix data = gclm::sample_gaussian(sigma, 400, rng);
  Matrix target = gclm::standardize(data);

  FitConfig cfg;
  cfg.lambda = 0.1;
  FitResult fit = gclm::prox_grad_fit(target, cfg, default_start(target));
  check_iterate_invariants(fit);
  CHECK(fit.iterations > 0);
  CHECK(gclm::is_stable(fit.B, 0.0));
  CHECK(fit.c_diag.minCoeff() > 0.0);
  // with the anchor weight at infinity the noise stays at the identity
  CHECK((fit.c_diag - Vector::Ones(6)).norm() == 0.0);
  // reported covariance belongs to the reported parameters
  Matrix re = gclm::solve_lyapunov(fit.B, fit.c_matrix());
  CHECK((re - fit.sigma).norm() < 1e-9 * (1.0 + fit.sigma.norm()));
  // reported objective matches the loss plus penalty at the iterate
  LossKind loss{cfg.loss, target};
  double objective = gclm::loss_value(loss, fit.sigma) +
                     cfg.lambda * gclm::offdiag_l1(fit.B);
  CHECK(fit.objective == doctest::Approx(objective).epsilon(1e-10));
  CHECK(fit.objective == doctest::Approx(fit.objective_trace.back()));
}

TEST_CASE("free noise variances move when the anchor is finite") {
  std::mt19937_64 rng(311);
  gclm::GenConfig gen;
  gen.p = 5;
  gen.edge_prob = 0.3;
  gclm::DriftPair model = gclm::generate_model(gen, rng);
  Matrix sigma = gclm::solve_lyapunov(model.B, model.C);
  Matrix data = gclm::sample_gaussian(sigma, 400, rng);
  Matrix target = gclm::standardize(data);

  FitConfig cfg;
  cfg.lambda = 0.05;
  cfg.reg_kappa = 0.01;
  FitResult fit = gclm::prox_grad_fit(target, cfg, default_start(target));
  check_iterate_invariants(fit);
  CHECK((fit.c_diag - Vector::Ones(5)).norm() > 1e-6);
  // the trace carries the full objective including the anchor term
  LossKind loss{cfg.loss, target};
  double objective = gclm::loss_value(loss, fit.sigma) +
                     cfg.reg_kappa * (fit.c_diag.array() - 1.0).square().sum() +
                     cfg.lambda * gclm::offdiag_l1(fit.B);
  CHECK(fit.objective == doctest::Approx(objective).epsilon(1e-10));
}

TEST_CASE("heavy penalty empties the off-diagonal support") {
  std::mt19937_64 rng(321);
  gclm::GenConfig gen;
  gen.p = 8;
  gen.edge_prob = 0.25;
  gclm::DriftPair model = gclm::generate_model(gen, rng);
  Matrix sigma = gclm::solve_lyapunov(model.B, model.C);
  Matrix data = gclm::sample_gaussian(sigma, 500, rng);
  Matrix target = gclm::standardize(data);
  FitConfig cfg;
  cfg.lambda = 6.0;
  FitResult fit = gclm::prox_grad_fit(target, cfg, default_start(target));
  CHECK(gclm::support_of(fit.B).empty());
}

TEST_CASE("proximal fit beats an exhaustive parameter grid") {
  Matrix btrue(2, 2);
  btrue << -1.0, 0.0,
           0.5, -1.0;
  Matrix c = Matrix::Identity(2, 2);
  Matrix target = gclm::solve_lyapunov(btrue, c);

  FitConfig cfg;
  cfg.lambda = 0.01;
  cfg.epsilon = 1e-8;
  cfg.max_iter = 2000;
  FitResult fit = gclm::prox_grad_fit(target, cfg, default_start(target));
  CHECK(fit.converged);
  // the generator's covariance also belongs to the time-reversed single-edge
  // model, so either orientation is a legitimate optimum - but only one edge
  gclm::EdgeSet support = gclm::support_of(fit.B);
  CHECK(support.size() == 1);
  CHECK((fit.sigma - target).norm() < 0.02 * target.norm());

  LossKind loss{LossFamily::gaussian_nll, target};
  double grid_best = std::numeric_limits<double>::infinity();
  Matrix cand(2, 2);
  for (double d1 = -2.0; d1 < -0.025; d1 += 0.1) {
    for (double d2 = -2.0; d2 < -0.025; d2 += 0.1) {
      for (double o1 = -1.0; o1 <= 1.0 + 1e-12; o1 += 0.05) {
        for (double o2 = -1.0; o2 <= 1.0 + 1e-12; o2 += 0.05) {
          cand << d1, o1, o2, d2;
          if (!gclm::is_stable(cand, 1e-8)) continue;
          Matrix s;
          try {
            s = gclm::kron_solve(cand, c);
          } catch (const gclm::NumericalError&) {
            continue;
          }
          if (!gclm::is_positive_definite(s)) continue;
          double value = gclm::loss_value(loss, s) +
                         cfg.lambda * gclm::offdiag_l1(cand);
          grid_best = std::min(grid_best, value);
        }
      }
    }
  }
  CHECK(fit.objective <= grid_best + 1e-6);
}

TEST_CASE("penalty grid is log-regular and increasing") {
  std::vector<double> grid = gclm::lambda_grid();
  REQUIRE(grid.size() == 100);
  CHECK(grid.front() == doctest::Approx(6.0 * 1e-4).epsilon(1e-12));
  CHECK(grid.back() == doctest::Approx(6.0).epsilon(1e-12));
  double ratio = grid[1] / grid[0];
  for (std::size_t k = 1; k < grid.size(); ++k) {
    CHECK(grid[k] > grid[k - 1]);
    CHECK(grid[k] / grid[k - 1] == doctest::Approx(ratio).epsilon(1e-10));
  }
  std::vector<double> small = gclm::lambda_grid(2.0, 5, 1e-2);
  REQUIRE(small.size() == 5);
  CHECK(small.front() == doctest::Approx(0.02));
  CHECK(small.back() == doctest::Approx(2.0));
}

TEST_CASE("continuation path runs the grid and ends diagonal") {
  std::mt19937_64 rng(331);
  gclm::GenConfig gen;
  gen.p = 6;
  gen.edge_prob = 0.3;
  gclm::DriftPair model = gclm::generate_model(gen, rng);
  Matrix sigma = gclm::solve_lyapunov(model.B, model.C);
  Matrix data = gclm::sample_gaussian(sigma, 400, rng);
  Matrix target = gclm::standardize(data);

  std::vector<double> lambdas = gclm::lambda_grid(6.0, 25, 1e-3);
  FitConfig cfg;
  gclm::FitPath path = gclm::fit_path(target, lambdas, cfg);
  REQUIRE(path.fits.size() == lambdas.size());
  CHECK(path.lambdas == lambdas);
  for (const auto& fit : path.fits) {
    check_iterate_invariants(fit);
    CHECK(gclm::is_stable(fit.B, 0.0));
  }
  CHECK(gclm::support_of(path.fits.back().B).empty());
  // sparsity does not decrease along the increasing penalties (weakly)
  std::size_t dense_edges = gclm::support_of(path.fits.front().B).size();
  std::size_t sparse_edges = gclm::support_of(path.fits.back().B).size();
  CHECK(sparse_edges <= dense_edges);

  // the JSON document round-trips the supports
  std::string doc = gclm::fit_path_to_json(path);
  int p_out = 0;
  std::vector<gclm::EdgeSet> supports =
      gclm::supports_from_path_json(doc, &p_out);
  REQUIRE(supports.size() == path.fits.size());
  CHECK(p_out == 6);
  for (std::size_t k = 0; k < supports.size(); ++k) {
    CHECK(supports[k] == gclm::support_of(path.fits[k].B));
  }
}

TEST_CASE("support-constrained refit respects the mask and improves the fit") {
  std::mt19937_64 rng(341);
  gclm::GenConfig gen;
  gen.p = 5;
  gen.edge_prob = 0.35;
  gclm::DriftPair model = gclm::generate_model(gen, rng);
  Matrix sigma = gclm::solve_lyapunov(model.B, model.C);
  Matrix data = gclm::sample_gaussian(sigma, 600, rng);
  Matrix target = gclm::standardize(data);

  FitConfig cfg;
  cfg.lambda = 0.3;
  FitResult fit = gclm::prox_grad_fit(target, cfg, default_start(target));
  gclm::EdgeSet support = gclm::support_of(fit.B);

  FitConfig refit_cfg;
  refit_cfg.epsilon = 1e-8;
  refit_cfg.max_iter = 1000;
  FitResult refit = gclm::mle_refit(target, support, refit_cfg, &fit.B);
  CHECK(gclm::is_stable(refit.B));
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      if (i == j) continue;
      if (!support.count({j, i})) CHECK(refit.B(i, j) == 0.0);
    }
  }
  // dropping the penalty can only improve the likelihood on the support
  LossKind loss{cfg.loss, target};
  CHECK(refit.objective <= gclm::loss_value(loss, fit.sigma) + 1e-9);
  // an unstable warm start falls back instead of failing
  Matrix bad = Matrix::Identity(5, 5);
  FitResult fallback = gclm::mle_refit(target, support, refit_cfg, &bad);
  CHECK(gclm::is_stable(fallback.B));
}

TEST_CASE("named presets pin the loss family and anchor weight") {
  FitConfig cfg;
  gclm::apply_preset("mloglik-inf", cfg);
  CHECK(cfg.loss == LossFamily::gaussian_nll);
  CHECK(std::isinf(cfg.reg_kappa));
  gclm::apply_preset("mloglik-0.01", cfg);
  CHECK(cfg.loss == LossFamily::gaussian_nll);
  CHECK(cfg.reg_kappa == doctest::Approx(0.01));
  gclm::apply_preset("frob-inf", cfg);
  CHECK(cfg.loss == LossFamily::frobenius);
  CHECK(std::isinf(cfg.reg_kappa));
  CHECK_THROWS_AS(gclm::apply_preset("nonsense", cfg), gclm::ValidationError);
}

TEST_CASE("relative tolerance mode converges") {
  std::mt19937_64 rng(351);
  Matrix target = random_spd(4, rng);
  FitConfig cfg;
  cfg.tol_relative = true;
  cfg.lambda = 0.1;
  FitResult fit = gclm::prox_grad_fit(target, cfg, default_start(target));
  check_iterate_invariants(fit);
  CHECK(fit.iterations <= cfg.max_iter);
}

TEST_CASE("fits are bit-deterministic") {
  std::mt19937_64 rng(361);
  Matrix target = random_spd(5, rng);
  FitConfig cfg;
  cfg.lambda = 0.05;
  FitResult a = gclm::prox_grad_fit(target, cfg, default_start(target));
  FitResult b = gclm::prox_grad_fit(target, cfg, default_start(target));
  CHECK(a.B == b.B);
  CHECK(a.c_diag == b.c_diag);
  CHECK(a.objective == b.objective);
}

TEST_CASE("single-fit JSON carries the headline fields") {
  std::mt19937_64 rng(371);
  Matrix target = random_spd(3, rng);
  FitConfig cfg;
  cfg.lambda = 0.2;
  FitResult fit = gclm::prox_grad_fit(target, cfg, default_start(target));
  std::string doc = gclm::fit_result_to_json(fit, cfg.lambda);
  for (const char* key :
       {"\"lambda\"", "\"B\"", "\"C_diag\"", "\"objective\"", "\"iterations\"",
        "\"converged\"", "\"support\""}) {
    CHECK(doc.find(key) != std::string::npos);
  }
}
