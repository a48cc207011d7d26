#include "thermonet/thermal_fom.hpp"

#include <gtest/gtest.h>
#include <gsl/gsl_cdf.h>

#include <cmath>

using namespace thermonet;

namespace {

Matrix dense(const SparseMatrix& m) { return Matrix(m); }

/// Steady profile of the upwind/relaxation recursion without diffusion:
/// (v/dz)(T_{i-1} - T_i) = lambda (T_i - T_amb), T_{-1} = T_in.
Vector upwind_steady_profile(Index n, double dz, double v, double lambda, double t_in, double t_amb) {
  Vector t(n);
  double prev = t_in;
  for (Index i = 0; i < n; ++i) {
    prev = t_amb + (prev - t_amb) * (v / dz) / (v / dz + lambda);
    t(i) = prev;
  }
  return t;
}

}  // namespace

TEST(PipeGrid, UniformSegmentsAndCircularArea) {
  const auto g = build_grid(10.0, 40, 0.02);
  EXPECT_DOUBLE_EQ(g.segment_length, 0.25);
  EXPECT_NEAR(g.cross_section, 3.141592653589793e-4, 1e-18);
  EXPECT_DOUBLE_EQ(build_grid(10.0, 40, 0.02, 5e-4).cross_section, 5e-4);
}

TEST(PipeGrid, RejectsDegenerateGeometry) {
  EXPECT_THROW(build_grid(0.0, 10), Error);
  EXPECT_THROW(build_grid(10.0, 1), Error);
  EXPECT_THROW(build_grid(10.0, 10, -0.02), Error);
  try {
    build_grid(-1.0, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_geometry);
  }
}

TEST(FomAssembly, MatricesMatchHandWrittenStencil) {
  const auto g = build_grid(2.0, 4, 0.02);  // dz = 0.5
  const ThermalParameters p{0.1, 0.05};     // beta = 0.2
  const auto fom = assemble_fom(g, p);
  Matrix a(4, 4);
  a << -0.5, 0.2, 0.0, 0.0,  //
      0.2, -0.5, 0.2, 0.0,   //
      0.0, 0.2, -0.5, 0.2,   //
      0.0, 0.0, 0.2, -0.3;
  EXPECT_LT((dense(fom.A) - a).norm(), 1e-15);

  Matrix q1(4, 4);
  q1 << -2, 0, 0, 0,  //
      2, -2, 0, 0,    //
      0, 2, -2, 0,    //
      0, 0, 2, -2;
  EXPECT_LT((dense(fom.Q[0]) - q1).norm(), 1e-15);
  for (int k = 1; k < 4; ++k) EXPECT_EQ(fom.Q[k].nonZeros(), 0);

  Matrix b = Matrix::Zero(4, 4);
  b(0, 1) = 0.2;
  b(0, 2) = 2.0;
  b.col(3).setConstant(0.1);
  EXPECT_LT((dense(fom.B) - b).norm(), 1e-15);
  ASSERT_EQ(fom.C.rows(), 1);
  EXPECT_EQ(fom.C.coeff(0, 3), 1.0);
}

TEST(FomAssembly, SensorRowsSelectContainingCell) {
  const auto g = build_grid(10.0, 40, 0.02);  // dz = 0.25
  EXPECT_EQ(sensor_index(g, 5.0), 19);
  EXPECT_EQ(sensor_index(g, 5.1), 20);
  EXPECT_EQ(sensor_index(g, 0.0), 0);
  EXPECT_EQ(sensor_index(g, 10.0), 39);
  EXPECT_THROW(sensor_index(g, 10.5), Error);
  EXPECT_THROW(sensor_index(g, -0.1), Error);
  const auto fom = assemble_fom(g, {1e-3, 1e-3}, SensorLayout{{2.5, 5.0}});
  ASSERT_EQ(fom.C.rows(), 3);
  EXPECT_EQ(fom.C.coeff(0, 9), 1.0);
  EXPECT_EQ(fom.C.coeff(1, 19), 1.0);
  EXPECT_EQ(fom.C.coeff(2, 39), 1.0);
}

TEST(FomAssembly, UniformEquilibriumIsAFixedPoint) {
  const auto g = build_grid(20.0, 60, 0.02);
  const auto fom = assemble_fom(g, {2e-3, 4e-3});
  const Vector x = Vector::Constant(60, 35.0);
  for (double v : {0.0, 0.05, 0.3}) {
    const Vector rhs = bilinear_rhs(fom, x, ThermalInputs{v, 35.0, 35.0});
    EXPECT_LT(rhs.lpNorm<Eigen::Infinity>(), 1e-12) << "v=" << v;
  }
}

TEST(FomAssembly, SteadyStateMatchesUpwindRecursion) {
  const double v = 0.2, lambda = 5e-3, t_in = 60.0, t_amb = 15.0;
  const auto g = build_grid(30.0, 120, 0.02);
  const auto fom = assemble_fom(g, {lambda, 0.0});
  const Eigen::Vector4d u(v, t_in, v * t_in, t_amb);
  SparseMatrix m = fom.A + v * fom.Q[0];
  Eigen::SparseLU<SparseMatrix> lu(m);
  const Vector x = lu.solve(-(fom.B * u));
  const Vector oracle = upwind_steady_profile(120, g.segment_length, v, lambda, t_in, t_amb);
  EXPECT_LT((x - oracle).lpNorm<Eigen::Infinity>(), 1e-10);
  // The continuous profile T_amb + (T_in - T_amb) exp(-lambda z / v) is met to O(dz).
  const double exact = t_amb + (t_in - t_amb) * std::exp(-lambda * 30.0 / v);
  EXPECT_NEAR(x(119), exact, 0.5);
}

TEST(FomStepping, RelaxationFollowsTrapezoidalAmplification) {
  const double lambda = 0.01, dt = 1.0;
  const auto g = build_grid(20.0, 50, 0.02);
  const auto fom = assemble_fom(g, {lambda, 0.0});
  FomStepper stepper(fom);
  Vector x = Vector::Constant(50, 70.0);
  for (int k = 0; k < 100; ++k) x = stepper.step(x, ThermalInputs{0.0, 20.0, 20.0}, dt);
  const double amp = (1.0 - 0.5 * lambda * dt) / (1.0 + 0.5 * lambda * dt);
  const double discrete = 20.0 + 50.0 * std::pow(amp, 100);
  const double continuous = 20.0 + 50.0 * std::exp(-1.0);
  EXPECT_LT((x.array() - discrete).abs().maxCoeff(), 1e-10);
  EXPECT_LT((x.array() - continuous).abs().maxCoeff(), 1e-3);
}

TEST(FomStepping, TransportFrontMatchesCascadeMedian) {
  // Pure upwind transport is a cascade of N first-order lags with total delay
  // L/v; the outlet step response is the Erlang(N, N v / L) distribution.
  const Index n = 200;
  const double length = 10.0, v = 0.1, dt = 0.5;
  const auto g = build_grid(length, n, 0.02);
  const auto fom = assemble_fom(g, {0.0, 0.0});
  FomStepper stepper(fom);
  Vector x = Vector::Constant(n, 20.0);
  double t = 0.0, prev = 20.0, crossing = -1.0;
  while (t < 200.0 && crossing < 0.0) {
    x = stepper.step(x, ThermalInputs{v, 60.0, 20.0}, dt);
    t += dt;
    const double y = x(n - 1);
    if (prev < 40.0 && y >= 40.0) crossing = t - dt + dt * (40.0 - prev) / (y - prev);
    prev = y;
  }
  const double median = gsl_cdf_gamma_Pinv(0.5, static_cast<double>(n), length / v / static_cast<double>(n));
  ASSERT_GT(crossing, 0.0);
  EXPECT_NEAR(crossing, median, 0.25);
  EXPECT_NEAR(crossing, length / v, 2.0 * g.segment_length / v);
}

TEST(FomStepping, CachedStepperMatchesOneShotStep) {
  const auto g = build_grid(10.0, 30, 0.02);
  const auto fom = assemble_fom(g, {1e-3, 2e-3}, SensorLayout{{5.0}});
  FomStepper stepper(fom);
  Vector a = Vector::Constant(30, 20.0), b = a;
  for (int k = 0; k < 20; ++k) {
    const ThermalInputs u{0.05 + 0.01 * (k % 3), 40.0 + k, 18.0};
    a = stepper.step(a, u, 2.0);
    b = step_fom(fom, b, u, 2.0);
  }
  EXPECT_LT((a - b).lpNorm<Eigen::Infinity>(), 1e-12);
  const Vector y = measure(fom, a);
  EXPECT_EQ(y.size(), 2);
  EXPECT_EQ(y(1), a(29));
}

TEST(FomStepping, RejectsInvalidSteps) {
  const auto fom = assemble_fom(build_grid(10.0, 20, 0.02), {1e-3, 1e-3});
  FomStepper stepper(fom);
  const Vector x = Vector::Constant(20, 20.0);
  EXPECT_THROW(stepper.step(x, ThermalInputs{0.1, 20.0, 20.0}, 0.0), Error);
  EXPECT_THROW(stepper.step(Vector::Zero(5), ThermalInputs{0.1, 20.0, 20.0}, 1.0), Error);
  EXPECT_THROW(stepper.step(x, ThermalInputs{-0.1, 20.0, 20.0}, 1.0), Error);
  EXPECT_THROW(assemble_fom(build_grid(10.0, 20, 0.02), {-1e-3, 0.0}), Error);
  EXPECT_THROW(assemble_fom(build_grid(10.0, 20, 0.02), {1e-3, 1e-3}, SensorLayout{{12.0}}), Error);
}
