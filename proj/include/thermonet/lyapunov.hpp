#pragma once

// Generalized Lyapunov equations of bilinear systems,
//   reachability:  A P + P A^T + sum_i Q_i P Q_i^T + F F^T = 0
//   observability: A^T P + P A + sum_i Q_i^T P Q_i + F F^T = 0
// solved by the stationary iteration that moves the bilinear term of the
// previous iterate to the right-hand side and solves a standard Lyapunov
// equation (complex Schur / Bartels-Stewart) each sweep.

#include "thermonet/error.hpp"
#include "thermonet/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <vector>

namespace thermonet {

enum class GramianKind { reachability, observability };

struct Gramian {
  Matrix P;
  GramianKind kind = GramianKind::reachability;
  int iterations = 0;
  double residual = 0.0;  // ||R||_F / ||F F^T||_F
};

struct LyapunovOptions {
  double tol = 1e-10;
  int max_iter = 500;
};

/// Standard Lyapunov solver for a fixed stable matrix; the Schur form is
/// computed once so repeated solves cost O(n^3) triangular work only.
class LyapunovSolver {
 public:
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;

  explicit LyapunovSolver(const Matrix& a) : schur_(a.cast<Complex>()) {
    if (schur_.info() != Eigen::Success) fail(ErrorKind::spectral, "Schur decomposition failed");
    const auto& t = schur_.matrixT();
    for (Index i = 0; i < t.rows(); ++i) {
      max_real_ = std::max(max_real_, t(i, i).real());
    }
    if (!(max_real_ < 0.0)) {
      std::ostringstream msg;
      msg << "matrix is not Hurwitz: spectral abscissa " << max_real_;
      fail(ErrorKind::spectral, msg.str());
    }
  }

  double spectral_abscissa() const { return max_real_; }

  /// Solves A X + X A^T = -F for symmetric F.
  Matrix solve(const Matrix& f) const {
    const CMatrix& u = schur_.matrixU();
    const CMatrix& t = schur_.matrixT();
    const Index n = t.rows();
    CMatrix g = -(u.adjoint() * f.cast<Complex>() * u);
    CMatrix y(n, n);
    // T Y + Y T^H = G, column j couples to columns k > j through conj(T(j,k)).
    for (Index j = n - 1; j >= 0; --j) {
      Eigen::VectorXcd rhs = g.col(j);
      for (Index k = j + 1; k < n; ++k) rhs -= std::conj(t(j, k)) * y.col(k);
      CMatrix shifted = t;
      shifted.diagonal().array() += std::conj(t(j, j));
      y.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
    }
    Matrix x = (u * y * u.adjoint()).real();
    return 0.5 * (x + x.transpose());
  }

 private:
  Eigen::ComplexSchur<CMatrix> schur_;
  double max_real_ = -std::numeric_limits<double>::infinity();
};

/// Residual matrix of the generalized Lyapunov equation for the given kind.
inline Matrix generalized_lyapunov_residual(const Matrix& a, std::span<const Matrix> q, const Matrix& rhs_factor,
                                            const Matrix& p, GramianKind kind) {
  const bool obs = kind == GramianKind::observability;
  Matrix r = obs ? Matrix(a.transpose() * p + p * a) : Matrix(a * p + p * a.transpose());
  for (const auto& qi : q) r += obs ? Matrix(qi.transpose() * p * qi) : Matrix(qi * p * qi.transpose());
  r += rhs_factor * rhs_factor.transpose();
  return r;
}

inline Gramian solve_generalized_lyapunov(const Matrix& a, std::span<const Matrix> q, const Matrix& rhs_factor,
                                          GramianKind kind, const LyapunovOptions& opt = {}) {
  const Index n = a.rows();
  if (a.cols() != n || rhs_factor.rows() != n) fail(ErrorKind::dimension, "generalized Lyapunov: dimension mismatch");
  for (const auto& qi : q)
    if (qi.rows() != n || qi.cols() != n) fail(ErrorKind::dimension, "generalized Lyapunov: bilinear slice mismatch");

  const bool obs = kind == GramianKind::observability;
  const Matrix op = obs ? Matrix(a.transpose()) : a;
  std::vector<Matrix> slices;
  for (const auto& qi : q)
    if (qi.cwiseAbs().maxCoeff() > 0.0) slices.push_back(obs ? Matrix(qi.transpose()) : qi);

  const LyapunovSolver lyap(op);
  const Matrix ff = rhs_factor * rhs_factor.transpose();
  const double scale = std::max(ff.norm(), std::numeric_limits<double>::min());

  Gramian g;
  g.kind = kind;
  g.P = lyap.solve(ff);
  auto residual_of = [&](const Matrix& p) {
    Matrix r = op * p + p * op.transpose() + ff;
    for (const auto& s : slices) r += s * p * s.transpose();
    return r.norm() / scale;
  };
  g.residual = residual_of(g.P);
  double previous = g.residual;
  int growth = 0;
  while (g.residual > opt.tol) {
    if (g.iterations >= opt.max_iter || !std::isfinite(g.residual) || growth >= 5) {
      std::ostringstream msg;
      msg << "generalized Lyapunov fixed point did not converge after " << g.iterations
          << " iterations (relative residual " << g.residual << ")";
      fail(ErrorKind::convergence, msg.str());
    }
    Matrix rhs = ff;
    for (const auto& s : slices) rhs += s * g.P * s.transpose();
    g.P = lyap.solve(rhs);
    ++g.iterations;
    g.residual = residual_of(g.P);
    growth = g.residual >= previous ? growth + 1 : 0;
    previous = g.residual;
  }
  return g;
}

inline Gramian solve_generalized_lyapunov(const SparseMatrix& a, std::span<const SparseMatrix> q,
                                          const Matrix& rhs_factor, GramianKind kind,
                                          const LyapunovOptions& opt = {}) {
  std::vector<Matrix> dense;
  for (const auto& qi : q) dense.emplace_back(Matrix(qi));
  return solve_generalized_lyapunov(Matrix(a), std::span<const Matrix>(dense), rhs_factor, kind, opt);
}

}  // namespace thermonet
