#pragma once

// Full-order bilinear model of the water temperature along one pipe.
//
// The advection-diffusion-relaxation equation
//   dT/dt + v dT/dz = -lambda (T - T_amb) + D d2T/dz2,   T(0) = T_in,  dT/dz(L) = 0
// is semi-discretized on N uniform cells (first-order upwind convection,
// second-order central diffusion). The inlet value is eliminated with a ghost
// point, which turns v*T_in into an extra input, so that
//   x' = A x + sum_i Q_i u_i x + B u,   y = C x,   u = (v, T_in, v*T_in, T_amb).

#include "thermonet/error.hpp"
#include "thermonet/types.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>
#include <vector>

namespace thermonet {

/// Flow velocities below this are rejected as reversed flow.
inline constexpr double kReverseVelocityTolerance = 1e-9;

struct PipeGeometry {
  double length = 0.0;          // m
  double inner_diameter = 0.0;  // m
  double cross_section = 0.0;   // m^2
  Index grid_points = 0;
  double segment_length = 0.0;  // m, length / grid_points

  friend bool operator==(const PipeGeometry&, const PipeGeometry&) = default;

  void validate() const {
    if (!(length > 0.0) || !(inner_diameter > 0.0) || !(cross_section > 0.0) || grid_points < 2) {
      std::ostringstream msg;
      msg << "invalid pipe geometry: L=" << length << " d=" << inner_diameter << " a=" << cross_section
          << " N=" << grid_points;
      fail(ErrorKind::invalid_geometry, msg.str());
    }
  }
};

inline double circular_area(double diameter) { return std::numbers::pi * diameter * diameter / 4.0; }

/// Uniform grid over [0, L]. A non-positive cross_section defaults to the circular area of d.
inline PipeGeometry build_grid(double length, Index grid_points, double inner_diameter = 0.02,
                               double cross_section = 0.0) {
  PipeGeometry g;
  g.length = length;
  g.inner_diameter = inner_diameter;
  g.cross_section = cross_section > 0.0 ? cross_section : circular_area(inner_diameter);
  g.grid_points = grid_points;
  g.validate();
  g.segment_length = length / static_cast<double>(grid_points);
  return g;
}

struct ThermalParameters {
  double lambda = 0.0;     // 1/s, effective heat transfer coefficient
  double diffusion = 0.0;  // m^2/s, axial diffusion coefficient

  void validate() const {
    if (!(lambda >= 0.0) || !(diffusion >= 0.0) || !std::isfinite(lambda) || !std::isfinite(diffusion)) {
      std::ostringstream msg;
      msg << "thermal parameters must be finite and non-negative: lambda=" << lambda << " D=" << diffusion;
      fail(ErrorKind::invalid_argument, msg.str());
    }
  }

  friend bool operator==(const ThermalParameters&, const ThermalParameters&) = default;
};

struct ThermalInputs {
  double velocity = 0.0;             // m/s
  double inlet_temperature = 0.0;    // degC
  double ambient_temperature = 0.0;  // degC

  /// The bilinear input vector (v, T_in, v*T_in, T_amb).
  Eigen::Vector4d vector() const {
    if (velocity < -kReverseVelocityTolerance) {
      std::ostringstream msg;
      msg << "reversed flow is not supported by the upwind pipe model: v=" << velocity << " m/s";
      fail(ErrorKind::invalid_argument, msg.str());
    }
    const double v = velocity > 0.0 ? velocity : 0.0;
    return {v, inlet_temperature, v * inlet_temperature, ambient_temperature};
  }

  friend bool operator==(const ThermalInputs&, const ThermalInputs&) = default;
};

/// Axial sensor positions in metres. The outlet is always appended as the last output.
struct SensorLayout {
  std::vector<double> positions;
};

/// Grid index (0-based) of the cell holding axial position z, i.e. j with j*dz < z <= (j+1)*dz.
inline Index sensor_index(const PipeGeometry& geom, double z) {
  if (!(z >= 0.0) || z > geom.length * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "sensor position " << z << " m outside pipe [0, " << geom.length << "]";
    fail(ErrorKind::invalid_argument, msg.str());
  }
  const double t = z / geom.segment_length;
  const auto j = static_cast<Index>(std::ceil(t - 1e-9 * std::max(1.0, t))) - 1;
  return std::clamp<Index>(j, 0, geom.grid_points - 1);
}

/// Row indices selected by the measurement matrix for a sensor layout.
inline std::vector<Index> sensor_rows(const PipeGeometry& geom, const SensorLayout& sensors) {
  std::vector<Index> rows;
  rows.reserve(sensors.positions.size() + 1);
  for (double z : sensors.positions) rows.push_back(sensor_index(geom, z));
  if (rows.empty() || rows.back() != geom.grid_points - 1) rows.push_back(geom.grid_points - 1);
  return rows;
}

struct BilinearFom {
  PipeGeometry geometry;
  ThermalParameters params;
  SparseMatrix A;                 // N x N
  std::array<SparseMatrix, 4> Q;  // frontal slices, N x N each
  SparseMatrix B;                 // N x 4
  SparseMatrix C;                 // n_m x N, last row is the outlet

  Index state_dim() const { return A.rows(); }
  Index output_dim() const { return C.rows(); }
};

/// Assembles the FOM matrices. The last row of A carries the zero-gradient
/// outlet (the right ghost mirrors T_N), and the upwind slice Q_1 has -1/dz on
/// the diagonal and +1/dz below it.
inline BilinearFom assemble_fom(const PipeGeometry& geom, const ThermalParameters& p,
                                const SensorLayout& sensors = {}) {
  geom.validate();
  p.validate();
  const Index n = geom.grid_points;
  const double dz = geom.segment_length;
  const double inv_dz = 1.0 / dz;
  const double beta = p.diffusion / (dz * dz);
  const double theta = -p.lambda - 2.0 * beta;

  BilinearFom fom;
  fom.geometry = geom;
  fom.params = p;

  std::vector<Triplet> a;
  a.reserve(3 * static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    a.emplace_back(i, i, i + 1 < n ? theta : -p.lambda - beta);
    if (i > 0) a.emplace_back(i, i - 1, beta);
    if (i + 1 < n) a.emplace_back(i, i + 1, beta);
  }
  fom.A.resize(n, n);
  fom.A.setFromTriplets(a.begin(), a.end());

  std::vector<Triplet> q;
  q.reserve(2 * static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    q.emplace_back(i, i, -inv_dz);
    if (i > 0) q.emplace_back(i, i - 1, inv_dz);
  }
  fom.Q[0].resize(n, n);
  fom.Q[0].setFromTriplets(q.begin(), q.end());
  for (int k = 1; k < 4; ++k) fom.Q[k].resize(n, n);

  std::vector<Triplet> b;
  b.emplace_back(0, 1, beta);
  b.emplace_back(0, 2, inv_dz);
  for (Index i = 0; i < n; ++i) b.emplace_back(i, 3, p.lambda);
  fom.B.resize(n, 4);
  fom.B.setFromTriplets(b.begin(), b.end());

  const auto rows = sensor_rows(geom, sensors);
  std::vector<Triplet> c;
  for (std::size_t r = 0; r < rows.size(); ++r) c.emplace_back(static_cast<Index>(r), rows[r], 1.0);
  fom.C.resize(static_cast<Index>(rows.size()), n);
  fom.C.setFromTriplets(c.begin(), c.end());
  return fom;
}

inline Vector bilinear_rhs(const BilinearFom& fom, const Vector& x, const Eigen::Vector4d& u) {
  if (x.size() != fom.state_dim()) {
    std::ostringstream msg;
    msg << "state dimension " << x.size() << " does not match model dimension " << fom.state_dim();
    fail(ErrorKind::dimension, msg.str());
  }
  Vector rhs = fom.A * x + fom.B * u;
  for (int i = 0; i < 4; ++i)
    if (u(i) != 0.0 && fom.Q[i].nonZeros() > 0) rhs += u(i) * (fom.Q[i] * x);
  return rhs;
}

inline Vector bilinear_rhs(const BilinearFom& fom, const Vector& x, const ThermalInputs& u) {
  return bilinear_rhs(fom, x, u.vector());
}

inline Vector measure(const BilinearFom& fom, const Vector& x) {
  if (x.size() != fom.state_dim()) fail(ErrorKind::dimension, "measure: state dimension mismatch");
  return fom.C * x;
}

/// Implicit trapezoidal integrator for the FOM with zero-order-hold inputs.
/// The factorization of (I - dt/2 M(u)) is cached while dt and the inputs
/// that scale nonzero Q slices stay unchanged.
class FomStepper {
 public:
  explicit FomStepper(BilinearFom fom) : FomStepper(std::make_shared<const BilinearFom>(std::move(fom))) {}

  /// Shares an immutable model between several steppers.
  explicit FomStepper(std::shared_ptr<const BilinearFom> fom) : fom_(std::move(fom)) {
    if (!fom_) fail(ErrorKind::invalid_argument, "FomStepper needs a model");
    for (int i = 0; i < 4; ++i)
      if (!is_zero(fom_->Q[i])) active_.push_back(i);
  }

  FomStepper(const FomStepper& other) : fom_(other.fom_), active_(other.active_) {}
  FomStepper& operator=(const FomStepper& other) {
    if (this != &other) {
      fom_ = other.fom_;
      active_ = other.active_;
      cache_.reset();
    }
    return *this;
  }
  FomStepper(FomStepper&&) noexcept = default;
  FomStepper& operator=(FomStepper&&) noexcept = default;

  const BilinearFom& model() const { return *fom_; }

  Vector step(const Vector& x, const ThermalInputs& u, double dt) { return step(x, u.vector(), dt); }

  Vector step(const Vector& x, const Eigen::Vector4d& u, double dt) {
    if (!(dt > 0.0)) fail(ErrorKind::integrator, "time step must be positive");
    if (x.size() != fom_->state_dim()) fail(ErrorKind::dimension, "step_fom: state dimension mismatch");
    Cache& c = factorization(u, dt);
    const Vector f = c.M * x + fom_->B * u;
    Vector dx = c.lu.solve(dt * f);
    if (c.lu.info() != Eigen::Success || !dx.allFinite())
      fail(ErrorKind::integrator, "trapezoidal step: linear solve failed");
    return x + dx;
  }

 private:
  struct Cache {
    double dt = 0.0;
    std::array<double, 4> u{};
    SparseMatrix M;
    Eigen::SparseLU<SparseMatrix> lu;
  };

  Cache& factorization(const Eigen::Vector4d& u, double dt) {
    if (cache_ && cache_->dt == dt) {
      bool same = true;
      for (int i : active_) same = same && cache_->u[static_cast<std::size_t>(i)] == u(i);
      if (same) return *cache_;
    }
    if (!cache_) cache_ = std::make_unique<Cache>();
    Cache& c = *cache_;
    c.dt = dt;
    for (int i = 0; i < 4; ++i) c.u[static_cast<std::size_t>(i)] = u(i);
    c.M = fom_->A;
    for (int i : active_) c.M += u(i) * fom_->Q[static_cast<std::size_t>(i)];
    SparseMatrix lhs = -0.5 * dt * c.M;
    for (Index i = 0; i < lhs.rows(); ++i) lhs.coeffRef(i, i) += 1.0;
    lhs.makeCompressed();
    c.lu.compute(lhs);
    if (c.lu.info() != Eigen::Success) {
      cache_.reset();
      fail(ErrorKind::integrator, "trapezoidal step: singular system matrix");
    }
    return c;
  }

  std::shared_ptr<const BilinearFom> fom_;
  std::vector<int> active_;
  std::unique_ptr<Cache> cache_;
};

/// One trapezoidal step without a persistent factorization cache.
inline Vector step_fom(const BilinearFom& fom, const Vector& x, const ThermalInputs& u, double dt) {
  FomStepper stepper(fom);
  return stepper.step(x, u, dt);
}

/// Writes a sparse matrix as "row col value" lines (0-based) after a
/// "# rows cols nnz" header. Values use 17 significant digits.
inline void write_triplets(std::ostream& out, const SparseMatrix& m) {
  out << "# " << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  const auto old_precision = out.precision(17);
  for (Index outer = 0; outer < m.outerSize(); ++outer)
    for (SparseMatrix::InnerIterator it(m, outer); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  out.precision(old_precision);
}

}  // namespace thermonet
