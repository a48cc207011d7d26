#pragma once

// Parameter-preserving Petrov-Galerkin reduction of the bilinear pipe model.
//
// The parameter dependency of the FOM is pulled out of the system matrices,
//   A(p) = g_1(p) A_1 + g_2(p) A_2,        g(p) = (lambda, D/dz^2)
//   B(p) = sum_i h_i(p) B_i,               h(p) = (lambda, D/dz^2, 1/dz)
// so the projected matricized tensors [T A_1 V, T A_2 V] and [T B_1, T B_2, T B_3]
// do not depend on p and a fixed-parameter ROM is a cheap r x r evaluation.
// Two basis generators are provided: a bilinear iterative rational Krylov
// fixed point targeting H2-optimality of the (bilinear-term scaled) error
// system, and a Galerkin basis of steady-state responses sampled over a
// velocity range, which matches the low-frequency behaviour that dominates
// transport-dominated pipes driven by slowly varying inputs.

#include "thermonet/error.hpp"
#include "thermonet/thermal_fom.hpp"
#include "thermonet/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace thermonet {

inline constexpr const char* kGMapId = "lambda;D/dz^2";
inline constexpr const char* kHMapId = "lambda;D/dz^2;1/dz";

struct ParametricFactors {
  double segment_length = 0.0;
  std::array<SparseMatrix, 2> A;  // A_1 = -I, A_2 = second difference with zero-gradient outlet row
  std::array<SparseMatrix, 3> B;  // lambda column, D/dz^2 inlet entry, 1/dz inlet entry

  Eigen::Vector2d g(const ThermalParameters& p) const {
    return {p.lambda, p.diffusion / (segment_length * segment_length)};
  }
  Eigen::Vector3d h(const ThermalParameters& p) const {
    return {p.lambda, p.diffusion / (segment_length * segment_length), 1.0 / segment_length};
  }

  SparseMatrix assemble_A(const ThermalParameters& p) const {
    const auto gp = g(p);
    return SparseMatrix(gp(0) * A[0] + gp(1) * A[1]);
  }
  SparseMatrix assemble_B(const ThermalParameters& p) const {
    const auto hp = h(p);
    return SparseMatrix(hp(0) * B[0] + hp(1) * B[1] + hp(2) * B[2]);
  }
};

inline ParametricFactors decouple_parameters(const PipeGeometry& geom) {
  geom.validate();
  const Index n = geom.grid_points;
  ParametricFactors f;
  f.segment_length = geom.segment_length;

  std::vector<Triplet> a1, a2;
  for (Index i = 0; i < n; ++i) {
    a1.emplace_back(i, i, -1.0);
    a2.emplace_back(i, i, i + 1 < n ? -2.0 : -1.0);
    if (i > 0) a2.emplace_back(i, i - 1, 1.0);
    if (i + 1 < n) a2.emplace_back(i, i + 1, 1.0);
  }
  f.A[0].resize(n, n);
  f.A[0].setFromTriplets(a1.begin(), a1.end());
  f.A[1].resize(n, n);
  f.A[1].setFromTriplets(a2.begin(), a2.end());

  std::vector<Triplet> b1;
  for (Index i = 0; i < n; ++i) b1.emplace_back(i, 3, 1.0);
  for (auto& b : f.B) b.resize(n, 4);
  f.B[0].setFromTriplets(b1.begin(), b1.end());
  f.B[1].insert(0, 1) = 1.0;
  f.B[2].insert(0, 2) = 1.0;
  for (auto& b : f.B) b.makeCompressed();
  return f;
}

struct ProjectionBasis {
  Matrix V;  // N x r trial basis
  Matrix W;  // N x r test basis
  bool converged = false;
  int iterations = 0;
  int restarts = 0;
  double final_change = 0.0;        // relative change of the sorted reduced spectrum
  double condition = 1.0;           // condition number of W^T V
  double bilinear_scaling = 1.0;    // gamma used to scale the Q slices during the iteration
  std::vector<std::complex<double>> reduced_eigenvalues;

  Index order() const { return V.cols(); }
};

struct ReductionInfo {
  bool converged = false;
  int iterations = 0;
  double final_change = 0.0;
  double condition = 1.0;
  double bilinear_scaling = 1.0;
};

/// Parameter-independent reduced model.
struct ReducedModel {
  Index full_dim = 0;
  Index order = 0;
  double segment_length = 0.0;
  Matrix A_red;  // r x 2r  [T A_1 V, T A_2 V]
  Matrix Q_red;  // r x 4r  [T Q_1 V, ..., T Q_4 V]
  Matrix B_red;  // r x 12  [T B_1, T B_2, T B_3]
  Matrix C_red;  // n_m x r
  Matrix V;      // N x r trial basis; lifts x_r back to the grid (x = V x_r)
  ThermalParameters reduction_point;
  ReductionInfo info;

  Eigen::Vector2d g(const ThermalParameters& p) const {
    return {p.lambda, p.diffusion / (segment_length * segment_length)};
  }
  Eigen::Vector3d h(const ThermalParameters& p) const {
    return {p.lambda, p.diffusion / (segment_length * segment_length), 1.0 / segment_length};
  }
};

/// ROM evaluated at a fixed parameter vector.
struct FixedRom {
  Matrix A;
  std::array<Matrix, 4> Q;
  Matrix B;
  Matrix C;

  Index order() const { return A.rows(); }
};

namespace detail {

inline std::vector<std::complex<double>> sorted_eigenvalues(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success) fail(ErrorKind::spectral, "eigenvalue computation failed");
  std::vector<std::complex<double>> ev(es.eigenvalues().begin(), es.eigenvalues().end());
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return ev;
}

inline bool hurwitz(const std::vector<std::complex<double>>& ev) {
  return std::all_of(ev.begin(), ev.end(), [](auto z) { return z.real() < 0.0; });
}

inline Matrix orthonormalize(const Matrix& x) {
  Eigen::HouseholderQR<Matrix> qr(x);
  return qr.householderQ() * Matrix::Identity(x.rows(), x.cols());
}

inline double spectral_norm_bound(const SparseMatrix& m) {
  // ||M||_2 <= sqrt(||M||_1 ||M||_inf)
  Vector col = Vector::Zero(m.cols()), row = Vector::Zero(m.rows());
  for (Index outer = 0; outer < m.outerSize(); ++outer)
    for (SparseMatrix::InnerIterator it(m, outer); it; ++it) {
      col(it.col()) += std::abs(it.value());
      row(it.row()) += std::abs(it.value());
    }
  const double c = col.size() ? col.maxCoeff() : 0.0;
  const double r = row.size() ? row.maxCoeff() : 0.0;
  return std::sqrt(c * r);
}

/// Columns spanning the r slowest eigenmodes of a; complex pairs are split
/// into their real and imaginary parts.
inline Matrix dominant_modes(const SparseMatrix& a, Index r, double* abscissa) {
  const Matrix dense(a);
  const bool symmetric = (dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0;
  Matrix basis(a.rows(), r);
  if (symmetric) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(dense);
    if (es.info() != Eigen::Success) fail(ErrorKind::spectral, "symmetric eigensolver failed");
    const Index n = dense.rows();
    *abscissa = es.eigenvalues()(n - 1);
    for (Index k = 0; k < r; ++k) basis.col(k) = es.eigenvectors().col(n - 1 - k);
    return basis;
  }
  Eigen::EigenSolver<Matrix> es(dense, true);
  if (es.info() != Eigen::Success) fail(ErrorKind::spectral, "eigensolver failed");
  std::vector<Index> order(static_cast<std::size_t>(dense.rows()));
  for (Index i = 0; i < dense.rows(); ++i) order[static_cast<std::size_t>(i)] = i;
  const auto& ev = es.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return ev(i).real() > ev(j).real(); });
  *abscissa = ev(order.front()).real();
  const Eigen::MatrixXcd vectors = es.eigenvectors();
  Index k = 0;
  for (std::size_t idx = 0; idx < order.size() && k < r; ++idx) {
    const Index i = order[idx];
    const auto vec = vectors.col(i);
    if (ev(i).imag() < 0.0) continue;  // conjugate partner of an already used pair
    basis.col(k++) = vec.real();
    if (ev(i).imag() > 0.0 && k < r) basis.col(k++) = vec.imag();
  }
  return basis;
}

/// Solves A X + X H^T + sum_k N_k X Nh_k^T + F = 0 for X (n x r) through the
/// vectorized sparse system (I (x) A + H (x) I + sum_k Nh_k (x) N_k) vec X = -vec F.
inline Matrix solve_bilinear_sylvester(const SparseMatrix& a, std::span<const SparseMatrix> n_slices,
                                       const Matrix& h, std::span<const Matrix> nh, const Matrix& f) {
  const Index n = a.rows();
  const Index r = h.rows();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros() * r + n * r * r * (1 + 2 * static_cast<Index>(n_slices.size()))));
  for (Index bj = 0; bj < r; ++bj) {
    for (Index outer = 0; outer < a.outerSize(); ++outer)
      for (SparseMatrix::InnerIterator it(a, outer); it; ++it)
        t.emplace_back(bj * n + it.row(), bj * n + it.col(), it.value());
    for (Index bi = 0; bi < r; ++bi) {
      if (h(bi, bj) != 0.0)
        for (Index i = 0; i < n; ++i) t.emplace_back(bi * n + i, bj * n + i, h(bi, bj));
      for (std::size_t k = 0; k < n_slices.size(); ++k) {
        const double w = nh[k](bi, bj);
        if (w == 0.0) continue;
        const auto& nk = n_slices[k];
        for (Index outer = 0; outer < nk.outerSize(); ++outer)
          for (SparseMatrix::InnerIterator it(nk, outer); it; ++it)
            t.emplace_back(bi * n + it.row(), bj * n + it.col(), w * it.value());
      }
    }
  }
  SparseMatrix k(n * r, n * r);
  k.setFromTriplets(t.begin(), t.end());
  k.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(k);
  if (lu.info() != Eigen::Success) fail(ErrorKind::spectral, "bilinear Sylvester operator is singular");
  const Vector rhs = -Eigen::Map<const Vector>(f.data(), f.size());
  Vector x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) fail(ErrorKind::spectral, "bilinear Sylvester solve failed");
  return Eigen::Map<Matrix>(x.data(), n, r);
}

struct ProjectedIterate {
  Matrix A;
  std::vector<Matrix> N;
  Matrix B;
  Matrix C;
  double condition = 1.0;
};

inline double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Petrov-Galerkin projector T = (W^T V)^{-1} W^T.
inline Matrix petrov_galerkin_projector(const Matrix& v, const Matrix& w, double max_condition = 1e12,
                                        double* condition = nullptr) {
  if (v.rows() != w.rows() || v.cols() != w.cols()) fail(ErrorKind::dimension, "basis dimension mismatch");
  const Matrix wtv = w.transpose() * v;
  const double cond = detail::condition_number(wtv);
  if (condition) *condition = cond;
  if (!(cond <= max_condition)) {
    std::ostringstream msg;
    msg << "W^T V is ill-conditioned (condition number " << cond << ")";
    fail(ErrorKind::projection, msg.str());
  }
  return Eigen::FullPivLU<Matrix>(wtv).solve(Matrix(w.transpose()));
}

struct H2Options {
  double tol = 1e-6;
  int max_iter = 100;
  /// Scaling gamma applied as Q_k / gamma during the basis iteration; <= 0 picks
  /// it automatically so the bilinear Gramian series converges.
  double bilinear_scaling = 0.0;
  int max_restarts = 3;
  /// Velocity v_ref at which the linear part A(p*) + v_ref Q_1 is taken; the
  /// remaining velocity variation is carried by the bilinear term.
  double expansion_velocity = 0.0;
  unsigned seed = 7;
};

/// Bilinear iterative rational Krylov fixed point at the parameter p*.
/// Each sweep solves the real-form generalized Sylvester equations
///   A X + X Ar^T + sum N_k X Nr_k^T + B Br^T = 0
///   A^T Y + Y Ar + sum N_k^T Y Nr_k + C^T Cr = 0
/// whose column spans equal those of the eigenvector-diagonalized form.
inline ProjectionBasis h2_reduce(const ParametricFactors& factors, const ThermalParameters& p_star,
                                 const BilinearFom& fom, Index r, const H2Options& opt = {}) {
  const Index n = fom.state_dim();
  if (r < 1 || r > n) {
    std::ostringstream msg;
    msg << "reduced order " << r << " must lie in [1, " << n << "]";
    fail(ErrorKind::invalid_argument, msg.str());
  }
  p_star.validate();
  const SparseMatrix a0 = factors.assemble_A(p_star);
  SparseMatrix a = a0;
  if (opt.expansion_velocity != 0.0) a += opt.expansion_velocity * fom.Q[0];
  const SparseMatrix b = factors.assemble_B(p_star);
  const SparseMatrix at = a.transpose();
  const Matrix c(fom.C);

  ProjectionBasis basis;
  if (r == n) {
    basis.V = Matrix::Identity(n, n);
    basis.W = Matrix::Identity(n, n);
    basis.converged = true;
    basis.reduced_eigenvalues = detail::sorted_eigenvalues(Matrix(a));
    return basis;
  }

  double abscissa = 0.0;
  const Matrix modes = detail::dominant_modes(a0, r, &abscissa);
  if (!(abscissa < 0.0)) {
    std::ostringstream msg;
    msg << "FOM at p* is not Hurwitz (spectral abscissa " << abscissa << ")";
    fail(ErrorKind::spectral, msg.str());
  }

  std::vector<SparseMatrix> slices, slices_t;
  for (const auto& q : fom.Q)
    if (!is_zero(q)) slices.push_back(q);
  double gamma = opt.bilinear_scaling;
  if (!(gamma > 0.0)) {
    double sum = 0.0;
    for (const auto& s : slices) sum += std::pow(detail::spectral_norm_bound(s), 2);
    // Keeps sum ||N_k||^2 / (2 |abscissa| gamma^2) at or below 1/4.
    gamma = std::max(1.0, std::sqrt(sum / (2.0 * -abscissa * 0.25)));
  }
  for (auto& s : slices) {
    s = s / gamma;
    slices_t.push_back(s.transpose());
  }
  basis.bilinear_scaling = gamma;

  auto project_iterate = [&](const Matrix& v, const Matrix& w) {
    detail::ProjectedIterate it;
    const Matrix t = petrov_galerkin_projector(v, w, 1e12, &it.condition);
    it.A = t * (a * v);
    for (const auto& s : slices) it.N.push_back(t * (s * v));
    it.B = t * b;
    it.C = c * v;
    return it;
  };

  std::mt19937 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int attempt = 0; attempt <= opt.max_restarts; ++attempt) {
    Matrix v0 = modes;
    if (attempt > 0) {
      const double scale = 1e-2 * attempt;
      for (Index i = 0; i < v0.size(); ++i) v0.data()[i] += scale * normal(rng) / std::sqrt(double(n));
    }
    Matrix v = detail::orthonormalize(v0);
    Matrix w = v;
    auto red = project_iterate(v, w);
    auto ev = detail::sorted_eigenvalues(red.A);
    if (!detail::hurwitz(ev)) continue;

    if (opt.max_iter == 0) {
      // No sweeps requested: the (Galerkin) initialization itself is the basis.
      basis.V = std::move(v);
      basis.W = std::move(w);
      basis.restarts = attempt;
      basis.condition = red.condition;
      basis.reduced_eigenvalues = std::move(ev);
      return basis;
    }
    ProjectionBasis best;
    double best_change = std::numeric_limits<double>::infinity();
    bool unstable = false;
    for (int iter = 1; iter <= opt.max_iter; ++iter) {
      std::vector<Matrix> nr_t;
      for (const auto& m : red.N) nr_t.push_back(m.transpose());
      const Matrix x = detail::solve_bilinear_sylvester(a, slices, red.A, red.N, b * red.B.transpose());
      const Matrix y = detail::solve_bilinear_sylvester(at, slices_t, red.A.transpose(), nr_t,
                                                        c.transpose() * red.C);
      v = detail::orthonormalize(x);
      w = detail::orthonormalize(y);
      red = project_iterate(v, w);
      auto next = detail::sorted_eigenvalues(red.A);
      if (!detail::hurwitz(next)) {
        unstable = true;
        break;
      }
      double diff = 0.0, ref = 0.0;
      for (std::size_t k = 0; k < next.size(); ++k) {
        diff += std::norm(next[k] - ev[k]);
        ref += std::norm(ev[k]);
      }
      const double change = std::sqrt(diff / std::max(ref, std::numeric_limits<double>::min()));
      ev = std::move(next);
      if (change < best_change) {
        best_change = change;
        best.V = v;
        best.W = w;
        best.iterations = iter;
        best.final_change = change;
        best.condition = red.condition;
        best.reduced_eigenvalues = ev;
      }
      if (change < opt.tol) {
        basis.V = std::move(v);
        basis.W = std::move(w);
        basis.converged = true;
        basis.iterations = iter;
        basis.restarts = attempt;
        basis.final_change = change;
        basis.condition = red.condition;
        basis.reduced_eigenvalues = std::move(ev);
        return basis;
      }
    }
    if (unstable && best.V.size() == 0) continue;
    best.converged = false;
    best.restarts = attempt;
    best.bilinear_scaling = gamma;
    return best;
  }
  fail(ErrorKind::spectral, "reduced iterates stayed non-Hurwitz after all restarts");
}

struct MomentOptions {
  /// Velocities at which steady-state responses are sampled. Empty: 4r samples
  /// spread uniformly over [min_factor, max_factor] * reference_velocity.
  std::vector<double> velocities;
  double reference_velocity = 0.1;
  double min_factor = 0.0;
  double max_factor = 1.5;
  /// Also sample the response to the ambient-temperature input.
  bool include_ambient = true;
};

inline std::vector<double> moment_velocities(const MomentOptions& opt, Index r) {
  if (!opt.velocities.empty()) return opt.velocities;
  if (!(opt.reference_velocity > 0.0)) fail(ErrorKind::invalid_argument, "reference velocity must be positive");
  if (!(opt.min_factor >= 0.0 && opt.max_factor > opt.min_factor))
    fail(ErrorKind::invalid_argument, "velocity sample range must satisfy 0 <= min_factor < max_factor");
  const Index count = std::max<Index>(4 * r, 2);
  std::vector<double> out;
  for (Index k = 0; k < count; ++k) {
    const double frac = opt.min_factor + (opt.max_factor - opt.min_factor) * static_cast<double>(k) /
                                             static_cast<double>(count - 1);
    out.push_back(frac * opt.reference_velocity);
  }
  return out;
}

/// Galerkin basis (W = V) from the r dominant left singular vectors of the
/// steady-state responses
///   x_ss(v) = -(A(p*) + v Q_1)^{-1} B(p*) e,   e = inlet / ambient input,
/// sampled over a velocity range (parametric moment matching at s = 0). The
/// Galerkin projection of the symmetric negative definite A and of the
/// dissipative transport term keeps the ROM stable for every v >= 0.
inline ProjectionBasis moment_reduce(const ParametricFactors& factors, const ThermalParameters& p_star,
                                     const BilinearFom& fom, Index r, const MomentOptions& opt = {}) {
  const Index n = fom.state_dim();
  if (r < 1 || r > n) {
    std::ostringstream msg;
    msg << "reduced order " << r << " must lie in [1, " << n << "]";
    fail(ErrorKind::invalid_argument, msg.str());
  }
  p_star.validate();
  const auto velocities = moment_velocities(opt, r);
  const SparseMatrix a = factors.assemble_A(p_star);
  const SparseMatrix b = factors.assemble_B(p_star);

  const Index per_velocity = opt.include_ambient ? 2 : 1;
  Matrix snapshots(n, per_velocity * static_cast<Index>(velocities.size()));
  Index k = 0;
  for (double v : velocities) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::invalid_argument, "sample velocities must be finite and >= 0");
    Eigen::SparseLU<SparseMatrix> lu(SparseMatrix(a + v * fom.Q[0]));
    if (lu.info() != Eigen::Success) fail(ErrorKind::spectral, "steady-state operator is singular");
    snapshots.col(k++) = -lu.solve(Vector(b * Eigen::Vector4d(v, 1.0, v, 0.0)));
    if (opt.include_ambient) snapshots.col(k++) = -lu.solve(Vector(b * Eigen::Vector4d(v, 0.0, 0.0, 1.0)));
  }
  Eigen::BDCSVD<Matrix> svd(snapshots, Eigen::ComputeThinU);
  const auto& sigma = svd.singularValues();
  if (sigma.size() < r || !(sigma(r - 1) > 1e-13 * sigma(0))) {
    std::ostringstream msg;
    msg << "steady-state snapshots do not span " << r << " directions; sample more velocities";
    fail(ErrorKind::projection, msg.str());
  }

  ProjectionBasis basis;
  basis.V = svd.matrixU().leftCols(r);
  basis.W = basis.V;
  basis.converged = true;
  basis.condition = 1.0;
  basis.reduced_eigenvalues = detail::sorted_eigenvalues(Matrix(basis.W.transpose() * (a * basis.V)));
  return basis;
}

inline ReducedModel project(const ParametricFactors& factors, const BilinearFom& fom, const ProjectionBasis& basis) {
  const Index n = fom.state_dim();
  const Index r = basis.V.cols();
  if (basis.V.rows() != n || basis.W.rows() != n || basis.W.cols() != r)
    fail(ErrorKind::dimension, "projection basis does not match the FOM dimension");
  if (factors.A[0].rows() != n) fail(ErrorKind::dimension, "parametric factors do not match the FOM dimension");

  double cond = 1.0;
  const Matrix t = petrov_galerkin_projector(basis.V, basis.W, 1e12, &cond);
  ReducedModel rom;
  rom.full_dim = n;
  rom.order = r;
  rom.segment_length = factors.segment_length;
  rom.reduction_point = fom.params;
  rom.A_red.resize(r, 2 * r);
  for (int i = 0; i < 2; ++i) rom.A_red.middleCols(i * r, r) = t * (factors.A[static_cast<std::size_t>(i)] * basis.V);
  rom.Q_red.resize(r, 4 * r);
  for (int i = 0; i < 4; ++i) rom.Q_red.middleCols(i * r, r) = t * (fom.Q[static_cast<std::size_t>(i)] * basis.V);
  rom.B_red.resize(r, 12);
  for (int i = 0; i < 3; ++i) rom.B_red.middleCols(i * 4, 4) = t * Matrix(factors.B[static_cast<std::size_t>(i)]);
  rom.C_red = fom.C * basis.V;
  rom.V = basis.V;
  rom.info.converged = basis.converged;
  rom.info.iterations = basis.iterations;
  rom.info.final_change = basis.final_change;
  rom.info.condition = cond;
  rom.info.bilinear_scaling = basis.bilinear_scaling;
  return rom;
}

inline FixedRom evaluate_rom_at(const ReducedModel& rom, const ThermalParameters& p) {
  p.validate();
  const Index r = rom.order;
  const auto g = rom.g(p);
  const auto h = rom.h(p);
  FixedRom out;
  out.A = g(0) * rom.A_red.leftCols(r) + g(1) * rom.A_red.middleCols(r, r);
  for (int i = 0; i < 4; ++i) out.Q[static_cast<std::size_t>(i)] = rom.Q_red.middleCols(i * r, r);
  out.B = h(0) * rom.B_red.leftCols(4) + h(1) * rom.B_red.middleCols(4, 4) + h(2) * rom.B_red.middleCols(8, 4);
  out.C = rom.C_red;
  return out;
}

inline Vector rom_rhs(const FixedRom& rom, const Vector& xr, const Eigen::Vector4d& u) {
  if (xr.size() != rom.order()) fail(ErrorKind::dimension, "reduced state dimension mismatch");
  Vector rhs = rom.A * xr + rom.B * u;
  for (int i = 0; i < 4; ++i)
    if (u(i) != 0.0) rhs += u(i) * (rom.Q[static_cast<std::size_t>(i)] * xr);
  return rhs;
}

/// Trapezoidal integrator for a fixed-parameter ROM; same contract as FomStepper.
class RomStepper {
 public:
  explicit RomStepper(FixedRom rom) : rom_(std::make_shared<const FixedRom>(std::move(rom))) {
    for (int i = 0; i < 4; ++i)
      if (rom_->Q[static_cast<std::size_t>(i)].size() > 0 &&
          rom_->Q[static_cast<std::size_t>(i)].cwiseAbs().maxCoeff() > 0.0)
        active_.push_back(i);
  }

  const FixedRom& model() const { return *rom_; }

  Vector step(const Vector& xr, const ThermalInputs& u, double dt) { return step(xr, u.vector(), dt); }

  Vector step(const Vector& xr, const Eigen::Vector4d& u, double dt) {
    if (!(dt > 0.0)) fail(ErrorKind::integrator, "time step must be positive");
    if (xr.size() != rom_->order()) fail(ErrorKind::dimension, "step_rom: state dimension mismatch");
    refresh(u, dt);
    const Vector f = m_ * xr + rom_->B * u;
    Vector dx = lu_.solve(dt * f);
    if (!dx.allFinite()) fail(ErrorKind::integrator, "trapezoidal ROM step produced non-finite values");
    return xr + dx;
  }

 private:
  void refresh(const Eigen::Vector4d& u, double dt) {
    if (valid_ && dt_ == dt) {
      bool same = true;
      for (int i : active_) same = same && u_[static_cast<std::size_t>(i)] == u(i);
      if (same) return;
    }
    dt_ = dt;
    for (int i = 0; i < 4; ++i) u_[static_cast<std::size_t>(i)] = u(i);
    m_ = rom_->A;
    for (int i : active_) m_ += u(i) * rom_->Q[static_cast<std::size_t>(i)];
    Matrix lhs = Matrix::Identity(m_.rows(), m_.cols()) - 0.5 * dt * m_;
    lu_.compute(lhs);
    if (!(std::abs(lu_.determinant()) > 0.0)) {
      valid_ = false;
      fail(ErrorKind::integrator, "trapezoidal ROM step: singular system matrix");
    }
    valid_ = true;
  }

  std::shared_ptr<const FixedRom> rom_;
  std::vector<int> active_;
  bool valid_ = false;
  double dt_ = 0.0;
  std::array<double, 4> u_{};
  Matrix m_;
  Eigen::PartialPivLU<Matrix> lu_;
};

inline Vector step_rom(const FixedRom& rom, const Vector& xr, const ThermalInputs& u, double dt) {
  RomStepper stepper(rom);
  return stepper.step(xr, u, dt);
}

}  // namespace thermonet
