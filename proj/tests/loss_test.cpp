#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "gclm/loss.hpp"
#include "gclm/lyapunov.hpp"
#include "test_support.hpp"

using gclm::LossFamily;
using gclm::LossKind;
using gclm::Matrix;
using gclm::Vector;
using namespace testsupport;

TEST_CASE("loss values against hand formulas") {
  std::mt19937_64 rng(201);
  Matrix target = random_spd(3, rng);
  Matrix sigma = random_spd(3, rng);
  LossKind nll{LossFamily::gaussian_nll, target};
  double expected = std::log(sigma.determinant()) +
                    (target * sigma.inverse()).trace();
  CHECK(gclm::loss_value(nll, sigma) == doctest::Approx(expected).epsilon(1e-12));
  LossKind frob{LossFamily::frobenius, target};
  CHECK(gclm::loss_value(frob, sigma) ==
        doctest::Approx((sigma - target).squaredNorm()).epsilon(1e-12));
  // the likelihood loss is minimized exactly at the target
  CHECK(gclm::loss_value(nll, target) < gclm::loss_value(nll, sigma));
}

TEST_CASE("Sigma-gradient against the closed forms and finite differences") {
  std::mt19937_64 rng(211);
  for (LossFamily family : {LossFamily::gaussian_nll, LossFamily::frobenius}) {
    for (int trial = 0; trial < 6; ++trial) {
      int p = 2 + static_cast<int>(rng() % 4);
      LossKind loss{family, random_spd(p, rng)};
      Matrix sigma = random_spd(p, rng);
      Matrix grad = gclm::loss_grad_sigma(loss, sigma);
      CHECK((grad - oracle_grad_sigma(loss, sigma)).norm() <
            1e-10 * (1.0 + grad.norm()));
      // central differences along symmetric perturbations: moving the pair
      // (i,j),(j,i) together picks up grad(i,j) + grad(j,i)
      double h = 1e-6;
      for (int i = 0; i < p; ++i) {
        for (int j = i; j < p; ++j) {
          Matrix hi = sigma, lo = sigma;
          hi(i, j) += h;
          lo(i, j) -= h;
          if (i != j) {
            hi(j, i) += h;
            lo(j, i) -= h;
          }
          double fd =
              (gclm::loss_value(loss, hi) - gclm::loss_value(loss, lo)) /
              (2.0 * h);
          double expected = (i == j) ? grad(i, i) : grad(i, j) + grad(j, i);
          CHECK(std::abs(expected - fd) / std::max(1.0, std::abs(expected)) <
                1e-5);
        }
      }
    }
  }
}

TEST_CASE("model gradients match central finite differences") {
  std::mt19937_64 rng(221);
  for (LossFamily family : {LossFamily::gaussian_nll, LossFamily::frobenius}) {
    for (int trial = 0; trial < 8; ++trial) {
      int p = 2 + static_cast<int>(rng() % 5);
      Matrix b = random_stable(p, rng, 0.5);
      Matrix c = random_diag_noise(p, rng);
      LossKind loss{family, random_spd(p, rng)};
      gclm::BcGradient g = gclm::grad_BC(loss, b, c);
      CHECK(max_rel_error(g.grad_B, fd_grad_b(loss, b, c)) < 1e-5);
      Vector fd_c = fd_grad_c_diag(loss, b, c);
      for (int i = 0; i < p; ++i) {
        CHECK(std::abs(g.grad_C_diag(i) - fd_c(i)) /
                  std::max(1.0, std::abs(g.grad_C_diag(i))) <
              1e-5);
      }
    }
  }
}

TEST_CASE("adjoint gradient equals the entrywise Jacobian route") {
  std::mt19937_64 rng(231);
  for (LossFamily family : {LossFamily::gaussian_nll, LossFamily::frobenius}) {
    for (int trial = 0; trial < 6; ++trial) {
      int p = 2 + static_cast<int>(rng() % 4);
      Matrix b = random_stable(p, rng, 0.5);
      Matrix c = random_diag_noise(p, rng);
      LossKind loss{family, random_spd(p, rng)};
      gclm::BcGradient g = gclm::grad_BC(loss, b, c);
      Matrix jac = jacobian_grad_b(loss, b, c);
      CHECK((g.grad_B - jac).norm() <= 1e-9 * (1.0 + jac.norm()));
      Vector jac_c = jacobian_grad_c_diag(loss, b, c);
      CHECK((g.grad_C_diag - jac_c).norm() <= 1e-9 * (1.0 + jac_c.norm()));
    }
  }
}

TEST_CASE("adjoint solve output satisfies its own equation") {
  std::mt19937_64 rng(241);
  Matrix b = random_stable(4, rng, 0.6);
  Matrix c = random_diag_noise(4, rng);
  LossKind loss{LossFamily::gaussian_nll, random_spd(4, rng)};
  gclm::BcGradient g = gclm::grad_BC(loss, b, c);
  Matrix gs = gclm::loss_grad_sigma(loss, g.sigma);
  // D solves B^T D + D B + grad_Sigma = 0
  Matrix residual = b.transpose() * g.D + g.D * b + gs;
  CHECK(residual.norm() < 1e-9 * (1.0 + gs.norm()));
  // reported entrywise partials are tied to D and Sigma
  CHECK((g.grad_B - 2.0 * g.D * g.sigma).norm() < 1e-12 * (1.0 + g.grad_B.norm()));
  CHECK((g.grad_C - g.D).norm() == 0.0);
  CHECK((g.grad_C_diag - g.D.diagonal()).norm() == 0.0);
  CHECK(g.value == doctest::Approx(gclm::loss_value(loss, g.sigma)));
}

TEST_CASE("factorized overload reproduces the from-scratch gradient") {
  std::mt19937_64 rng(251);
  Matrix b = random_stable(5, rng, 0.5);
  Matrix c = random_diag_noise(5, rng);
  LossKind loss{LossFamily::frobenius, random_spd(5, rng)};
  gclm::BcGradient direct = gclm::grad_BC(loss, b, c);
  gclm::SchurForm sf = gclm::schur_decompose(b);
  Matrix sigma = gclm::solve_lyapunov(sf, c);
  gclm::BcGradient reused = gclm::grad_BC(loss, sf, sigma);
  CHECK((direct.grad_B - reused.grad_B).norm() < 1e-12);
  CHECK((direct.grad_C_diag - reused.grad_C_diag).norm() < 1e-12);
  CHECK(direct.value == doctest::Approx(reused.value));
}

TEST_CASE("gradient moves the loss downhill") {
  std::mt19937_64 rng(261);
  Matrix b = random_stable(3, rng, 0.6);
  Matrix c = random_diag_noise(3, rng);
  LossKind loss{LossFamily::gaussian_nll, random_spd(3, rng)};
  gclm::BcGradient g = gclm::grad_BC(loss, b, c);
  double base = g.value;
  double step = 1e-4 / std::max(1.0, g.grad_B.norm());
  CHECK(loss_of_model(loss, b - step * g.grad_B, c) < base);
}
