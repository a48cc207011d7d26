#include "thermonet/lyapunov.hpp"
#include "thermonet/mor.hpp"
#include "thermonet/thermal_fom.hpp"

#include <gtest/gtest.h>

#include <Eigen/LU>

#include <random>
#include <vector>

using namespace thermonet;

namespace {

/// Kronecker-form oracle: (I (x) A + A (x) I) vec X = -vec F.
Matrix kronecker_lyapunov(const Matrix& a, const Matrix& f) {
  const Index n = a.rows();
  Matrix k = Matrix::Zero(n * n, n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      k.block(i * n, j * n, n, n) += (i == j ? 1.0 : 0.0) * a;
      k.block(i * n, j * n, n, n).diagonal().array() += a(i, j);
    }
  const Vector rhs = -Eigen::Map<const Vector>(f.data(), n * n);
  const Vector x = k.fullPivLu().solve(rhs);
  return Eigen::Map<const Matrix>(x.data(), n, n);
}

Matrix random_stable(Index n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  Matrix a(n, n);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  a.diagonal().array() -= a.cwiseAbs().rowwise().sum().array() + 1.0;
  return a;
}

}  // namespace

TEST(Lyapunov, StandardSolverMatchesKroneckerForm) {
  const Matrix a = random_stable(6, 3);
  Matrix f = Matrix::Random(6, 2);
  const Matrix ff = f * f.transpose();
  const LyapunovSolver solver(a);
  const Matrix x = solver.solve(ff);
  EXPECT_LT((x - kronecker_lyapunov(a, ff)).norm() / x.norm(), 1e-12);
  EXPECT_LT(solver.spectral_abscissa(), 0.0);
}

TEST(Lyapunov, ScalarBilinearClosedForm) {
  // a p + p a + q p q + f^2 = 0  =>  p = -f^2 / (2a + q^2).
  const double a = -2.0, q = 1.2, f = 0.7;
  const Matrix am = Matrix::Constant(1, 1, a);
  const std::vector<Matrix> qs{Matrix::Constant(1, 1, q)};
  const auto g = solve_generalized_lyapunov(am, qs, Matrix::Constant(1, 1, f), GramianKind::reachability);
  // The fixed point stops at a 1e-10 relative residual.
  EXPECT_NEAR(g.P(0, 0), -f * f / (2.0 * a + q * q), 1e-9);
  EXPECT_LE(g.residual, 1e-10);
}

TEST(Lyapunov, DiagonalBilinearClosedForm) {
  // Diagonal A and Q decouple entrywise: P_ij = -F_ij / (a_i + a_j + q_i q_j).
  Vector ad(3), qd(3);
  ad << -1.0, -2.5, -4.0;
  qd << 0.5, -0.8, 1.1;
  Matrix f(3, 2);
  f << 1.0, 0.2, -0.3, 0.9, 0.4, 0.4;
  const Matrix ff = f * f.transpose();
  const std::vector<Matrix> qs{Matrix(qd.asDiagonal())};
  for (auto kind : {GramianKind::reachability, GramianKind::observability}) {
    const auto g = solve_generalized_lyapunov(Matrix(ad.asDiagonal()), qs, f, kind);
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 3; ++j) EXPECT_NEAR(g.P(i, j), -ff(i, j) / (ad(i) + ad(j) + qd(i) * qd(j)), 1e-9);
  }
}

TEST(Lyapunov, PipeModelGramiansHaveSmallResiduals) {
  const auto geom = build_grid(20.0, 120, 0.02);
  const ThermalParameters p{1e-3, 5e-3};
  const auto fom = assemble_fom(geom, p, SensorLayout{{10.0}});
  const auto factors = decouple_parameters(geom);
  const Matrix a(factors.assemble_A(p));
  // Q_1 scaled so the bilinear series converges (the velocity scaling used by the reduction).
  const double gamma = 40.0;
  const std::vector<Matrix> qs{Matrix(fom.Q[0]) / gamma};
  const Matrix b(factors.assemble_B(p));
  const Matrix c(fom.C);
  const auto p_reach = solve_generalized_lyapunov(a, qs, b, GramianKind::reachability);
  const auto p_obs = solve_generalized_lyapunov(a, qs, Matrix(c.transpose()), GramianKind::observability);
  for (const auto* g : {&p_reach, &p_obs}) {
    const Matrix r = generalized_lyapunov_residual(a, qs, g->kind == GramianKind::reachability ? b : Matrix(c.transpose()),
                                                   g->P, g->kind);
    const Matrix rhs = g->kind == GramianKind::reachability ? Matrix(b * b.transpose()) : Matrix(c.transpose() * c);
    EXPECT_LE(r.norm() / rhs.norm(), 1e-8);
    // Gramians are symmetric positive semidefinite.
    EXPECT_LT((g->P - g->P.transpose()).norm(), 1e-12 * g->P.norm());
    Eigen::SelfAdjointEigenSolver<Matrix> es(g->P);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-9 * es.eigenvalues().maxCoeff());
  }
}

TEST(Lyapunov, ReportsUnstableAndDivergentProblems) {
  const std::vector<Matrix> none;
  try {
    solve_generalized_lyapunov(Matrix::Constant(1, 1, 0.5), none, Matrix::Ones(1, 1), GramianKind::reachability);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::spectral);
  }
  // 2a + q^2 > 0: the bilinear fixed point diverges.
  const std::vector<Matrix> big{Matrix::Constant(1, 1, 2.0)};
  try {
    solve_generalized_lyapunov(Matrix::Constant(1, 1, -1.0), big, Matrix::Ones(1, 1), GramianKind::reachability);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::convergence);
  }
  EXPECT_THROW(solve_generalized_lyapunov(Matrix::Identity(2, 2) * -1.0, none, Matrix::Ones(3, 1),
                                          GramianKind::reachability),
               Error);
}
