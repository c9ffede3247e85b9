#include "gclm/lyapunov.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace gclm {

namespace {

void check_square(const Matrix& a, const char* name) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch(std::string(name) + " must be square, got " +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
  }
  if (a.rows() == 0) {
    throw DimensionMismatch(std::string(name) + " must be non-empty");
  }
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(what) + ": got " +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
}

void check_symmetric(const Matrix& c, const char* name) {
  double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  double asym = (c - c.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    throw ValidationError(std::string(name) + " must be symmetric (max |C - C^T| = " +
                          format_double(asym) + ")");
  }
}

// Diagonal block starts and sizes of a quasi upper-triangular matrix. Eigen's
// RealSchur leaves exact zeros on the subdiagonal outside 2x2 blocks.
std::vector<std::pair<int, int>> quasi_blocks(const Matrix& t) {
  const int p = static_cast<int>(t.rows());
  std::vector<std::pair<int, int>> blocks;
  int k = 0;
  while (k < p) {
    int size = (k + 1 < p && t(k + 1, k) != 0.0) ? 2 : 1;
    blocks.emplace_back(k, size);
    k += size;
  }
  return blocks;
}

// Solves T_II X + X T_JJ^T = rhs (or their transposed counterpart) for a tiny
// block pair via Kronecker vectorization; block sizes are 1 or 2.
Matrix small_sylvester(const Matrix& tii, const Matrix& tjj, const Matrix& rhs,
                       bool transpose) {
  const int m = static_cast<int>(tii.rows());
  const int q = static_cast<int>(tjj.rows());
  Matrix sys = Matrix::Zero(m * q, m * q);
  Matrix a = transpose ? tii.transpose() : tii;      // left coefficient
  Matrix b = transpose ? tjj : tjj.transpose();      // right coefficient
  // vec(A X) = (I (x) A) vec(X), vec(X B) = (B^T (x) I) vec(X)
  for (int c = 0; c < q; ++c) sys.block(c * m, c * m, m, m) = a;
  for (int c = 0; c < q; ++c)
    for (int cc = 0; cc < q; ++cc)
      sys.block(c * m, cc * m, m, m) += b(cc, c) * Matrix::Identity(m, m);
  Eigen::FullPivLU<Matrix> lu(sys);
  if (!lu.isInvertible()) {
    throw SingularLyapunov(
        "quasi-triangular block system is singular; an eigenvalue pair of the "
        "drift matrix sums to zero");
  }
  Eigen::VectorXd x = lu.solve(Eigen::Map<const Eigen::VectorXd>(rhs.data(), m * q));
  return Eigen::Map<const Matrix>(x.data(), m, q);
}

// Back-substitution for T Y + Y T^T + F = 0 with T quasi upper-triangular,
// or forward substitution for T^T Y + Y T + F = 0 when transpose is set.
// F symmetric; returns symmetric Y.
Matrix solve_reduced(const Matrix& t, const Matrix& f, bool transpose) {
  const int p = static_cast<int>(t.rows());
  const auto blocks = quasi_blocks(t);
  const int nb = static_cast<int>(blocks.size());
  Matrix y = Matrix::Zero(p, p);
  if (!transpose) {
    for (int bi = nb - 1; bi >= 0; --bi) {
      const auto [si, ni] = blocks[static_cast<size_t>(bi)];
      const int ei = si + ni;
      for (int bj = nb - 1; bj >= bi; --bj) {
        const auto [sj, nj] = blocks[static_cast<size_t>(bj)];
        const int ej = sj + nj;
        Matrix rhs = -f.block(si, sj, ni, nj);
        if (ei < p) rhs -= t.block(si, ei, ni, p - ei) * y.block(ei, sj, p - ei, nj);
        if (ej < p)
          rhs -= y.block(si, ej, ni, p - ej) * t.block(sj, ej, nj, p - ej).transpose();
        Matrix x = small_sylvester(t.block(si, si, ni, ni),
                                   t.block(sj, sj, nj, nj), rhs, false);
        y.block(si, sj, ni, nj) = x;
        if (bi != bj) y.block(sj, si, nj, ni) = x.transpose();
      }
    }
  } else {
    for (int bi = 0; bi < nb; ++bi) {
      const auto [si, ni] = blocks[static_cast<size_t>(bi)];
      for (int bj = 0; bj <= bi; ++bj) {
        const auto [sj, nj] = blocks[static_cast<size_t>(bj)];
        Matrix rhs = -f.block(si, sj, ni, nj);
        if (si > 0)
          rhs -= t.block(0, si, si, ni).transpose() * y.block(0, sj, si, nj);
        if (sj > 0) rhs -= y.block(si, 0, ni, sj) * t.block(0, sj, sj, nj);
        Matrix x = small_sylvester(t.block(si, si, ni, ni),
                                   t.block(sj, sj, nj, nj), rhs, true);
        y.block(si, sj, ni, nj) = x;
        if (bi != bj) y.block(sj, si, nj, ni) = x.transpose();
      }
    }
  }
  return y;
}

}  // namespace

double SchurForm::max_real_part() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& ev : eigenvalues) m = std::max(m, ev.real());
  return m;
}

double SchurForm::spectral_radius() const {
  double m = 0.0;
  for (const auto& ev : eigenvalues) m = std::max(m, std::abs(ev));
  return m;
}

SchurForm schur_decompose(const Matrix& a) {
  check_square(a, "A");
  if (!a.allFinite()) throw ValidationError("A contains non-finite entries");
  Eigen::RealSchur<Matrix> schur(a, /*computeU=*/true);
  if (schur.info() != Eigen::Success) {
    throw ConvergenceFailure("QR iteration did not converge while computing the Schur factorization");
  }
  SchurForm sf;
  sf.Q = schur.matrixU();
  sf.T = schur.matrixT();
  const int p = static_cast<int>(a.rows());
  for (int k = 0; k < p;) {
    if (k + 1 < p && sf.T(k + 1, k) != 0.0) {
      const double tr = sf.T(k, k) + sf.T(k + 1, k + 1);
      const double det =
          sf.T(k, k) * sf.T(k + 1, k + 1) - sf.T(k, k + 1) * sf.T(k + 1, k);
      const double disc = 0.25 * tr * tr - det;
      if (disc < 0.0) {
        const double im = std::sqrt(-disc);
        sf.eigenvalues.emplace_back(0.5 * tr, im);
        sf.eigenvalues.emplace_back(0.5 * tr, -im);
      } else {
        const double rd = std::sqrt(disc);
        sf.eigenvalues.emplace_back(0.5 * tr + rd, 0.0);
        sf.eigenvalues.emplace_back(0.5 * tr - rd, 0.0);
      }
      k += 2;
    } else {
      sf.eigenvalues.emplace_back(sf.T(k, k), 0.0);
      ++k;
    }
  }
  return sf;
}

bool is_stable(const SchurForm& sf, double tol) {
  return sf.max_real_part() < -tol;
}

bool is_stable(const Matrix& a, double tol) {
  check_square(a, "A");
  if (!a.allFinite()) throw ValidationError("A contains non-finite entries");
  // max real part >= trace / p, so a nonnegative trace already certifies
  // instability; this prunes overshot line-search probes without an eigensolve
  if (tol >= 0.0 && a.trace() >= 0.0) return false;
  Eigen::RealSchur<Matrix> schur(a, /*computeU=*/false);
  if (schur.info() != Eigen::Success) {
    throw ConvergenceFailure("QR iteration did not converge while computing the Schur factorization");
  }
  const Matrix& t = schur.matrixT();
  const int p = static_cast<int>(a.rows());
  double max_real = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < p;) {
    if (k + 1 < p && t(k + 1, k) != 0.0) {
      const double tr = t(k, k) + t(k + 1, k + 1);
      const double det =
          t(k, k) * t(k + 1, k + 1) - t(k, k + 1) * t(k + 1, k);
      const double disc = 0.25 * tr * tr - det;
      max_real = std::max(
          max_real, disc < 0.0 ? 0.5 * tr : 0.5 * tr + std::sqrt(disc));
      k += 2;
    } else {
      max_real = std::max(max_real, t(k, k));
      ++k;
    }
  }
  return max_real < -tol;
}

namespace detail {

double singularity_threshold(const SchurForm& sf) {
  return 1e-10 * std::max(1.0, sf.spectral_radius());
}

double min_pair_sum(const SchurForm& sf) {
  double m = std::numeric_limits<double>::infinity();
  const size_t n = sf.eigenvalues.size();
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i; j < n; ++j)
      m = std::min(m, std::abs(sf.eigenvalues[i] + sf.eigenvalues[j]));
  return m;
}

}  // namespace detail

Matrix solve_lyapunov(const SchurForm& sf, const Matrix& c, bool transpose) {
  check_square(c, "C");
  check_same_shape(sf.T, c, "B and C must have matching shapes");
  check_symmetric(c, "C");
  if (detail::min_pair_sum(sf) < detail::singularity_threshold(sf)) {
    throw SingularLyapunov(
        "an eigenvalue pair of B sums to zero within tolerance (min |l_i + l_j| = " +
        format_double(detail::min_pair_sum(sf)) + ")");
  }
  const Matrix f = sf.Q.transpose() * ((c + c.transpose()) * 0.5) * sf.Q;
  const Matrix y = solve_reduced(sf.T, f, transpose);
  Matrix sigma = sf.Q * y * sf.Q.transpose();
  sigma = 0.5 * (sigma + sigma.transpose()).eval();

  const Matrix b = sf.Q * sf.T * sf.Q.transpose();
  const Matrix resid = transpose
                           ? (b.transpose() * sigma + sigma * b + c).eval()
                           : (b * sigma + sigma * b.transpose() + c).eval();
  const double rnorm = resid.norm();
  if (!(rnorm <= 1e-9 * (1.0 + c.norm()))) {
    throw SingularLyapunov(
        "Lyapunov solve residual " + format_double(rnorm) +
        " exceeds tolerance; the equation is numerically ill-conditioned");
  }
  return sigma;
}

Matrix solve_lyapunov(const Matrix& b, const Matrix& c) {
  check_square(b, "B");
  return solve_lyapunov(schur_decompose(b), c, false);
}

Matrix kron_solve(const Matrix& b, const Matrix& c) {
  check_square(b, "B");
  check_same_shape(b, c, "B and C must have matching shapes");
  check_symmetric(c, "C");
  const int p = static_cast<int>(b.rows());
  // (I (x) B + B (x) I) vec(Sigma) = -vec(C) with column-major vec.
  Matrix sys = Matrix::Zero(p * p, p * p);
  for (int col = 0; col < p; ++col) {
    sys.block(col * p, col * p, p, p) += b;
    for (int cc = 0; cc < p; ++cc)
      sys.block(col * p, cc * p, p, p) += b(col, cc) * Matrix::Identity(p, p);
  }
  Eigen::FullPivLU<Matrix> lu(sys);
  if (!lu.isInvertible()) {
    throw SingularLyapunov("Kronecker-sum system is singular");
  }
  Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(c.data(), p * p);
  Eigen::VectorXd x = lu.solve(rhs);
  Matrix sigma = Eigen::Map<const Matrix>(x.data(), p, p);
  return 0.5 * (sigma + sigma.transpose());
}

Matrix cholesky(const Matrix& s) {
  check_square(s, "S");
  check_symmetric(s, "S");
  const int p = static_cast<int>(s.rows());
  Matrix l = Matrix::Zero(p, p);
  for (int j = 0; j < p; ++j) {
    double d = s(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) {
      throw NotPositiveDefinite(
          j, "matrix is not positive definite: pivot " + std::to_string(j) +
                 " is " + format_double(d));
    }
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < p; ++i) {
      l(i, j) = (s(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return l;
}

bool is_positive_definite(const Matrix& s) {
  try {
    cholesky(s);
    return true;
  } catch (const NotPositiveDefinite&) {
    return false;
  }
}

Matrix cholesky_solve(const Matrix& chol_lower, const Matrix& rhs) {
  if (chol_lower.rows() != rhs.rows()) {
    throw DimensionMismatch("Cholesky factor and right-hand side disagree");
  }
  Matrix y = chol_lower.triangularView<Eigen::Lower>().solve(rhs);
  return chol_lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix matrix_exp(const Matrix& a) {
  check_square(a, "A");
  if (!a.allFinite()) throw ValidationError("A contains non-finite entries");
  Matrix e = a.exp();
  if (!e.allFinite()) {
    throw OverflowError("matrix exponential overflowed for ||A||_F = " +
                        format_double(a.norm()));
  }
  return e;
}

}  // namespace gclm
