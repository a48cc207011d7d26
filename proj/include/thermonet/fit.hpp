#pragma once

// Least-squares identification of (lambda, D) for one pipe from measured
// sensor temperatures, using the parametric ROM re-evaluated at every trial
// parameter vector and a bounded Nelder-Mead search (GSL nmsimplex2 on
// coordinates normalized to the bound box).

#include "thermonet/error.hpp"
#include "thermonet/mor.hpp"
#include "thermonet/thermal_fom.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace thermonet {

/// Inputs of a single-pipe experiment sampled every dt (zero-order hold).
struct PipeScenario {
  double dt = 1.0;
  double initial_temperature = 20.0;  // uniform initial profile, degC
  std::vector<ThermalInputs> inputs;
};

/// Outputs (sensors, then outlet) after every step of a fixed-parameter ROM.
/// The ROM runs on x = T0 * 1 + V x_r, T0 the initial temperature.
inline Matrix simulate_pipe(const FixedRom& rom, const PipeScenario& sc) {
  RomStepper stepper(rom);
  const double c = sc.initial_temperature;
  Vector xr = Vector::Zero(rom.order());
  Matrix y(static_cast<Index>(sc.inputs.size()), rom.C.rows());
  for (std::size_t k = 0; k < sc.inputs.size(); ++k) {
    const auto& u = sc.inputs[k];
    xr = stepper.step(xr, ThermalInputs{u.velocity, u.inlet_temperature - c, u.ambient_temperature - c}, sc.dt);
    y.row(static_cast<Index>(k)) = ((rom.C * xr).array() + c).transpose();
  }
  return y;
}

/// Same contract as the ROM overload, on the full-order model.
inline Matrix simulate_pipe(const BilinearFom& fom, const PipeScenario& sc) {
  FomStepper stepper(fom);
  Vector x = Vector::Constant(fom.state_dim(), sc.initial_temperature);
  Matrix y(static_cast<Index>(sc.inputs.size()), fom.output_dim());
  for (std::size_t k = 0; k < sc.inputs.size(); ++k) {
    x = stepper.step(x, sc.inputs[k], sc.dt);
    y.row(static_cast<Index>(k)) = (fom.C * x).transpose();
  }
  return y;
}

struct FitBounds {
  ThermalParameters lower;
  ThermalParameters upper;
};

struct FitOptions {
  std::optional<ThermalParameters> initial;  // default: centre of the bounds
  int max_iter = 400;
  double size_tol = 1e-9;           // simplex size in normalized coordinates
  double initial_step = 0.25;       // normalized
  double flat_tolerance = 1e-12;    // relative objective change treated as "no sensitivity"
};

struct FitResult {
  ThermalParameters params;
  double objective = 0.0;  // sum of squared output errors, K^2
  int iterations = 0;
  int rejected_trials = 0;
  bool converged = false;
  std::array<bool, 2> at_lower{false, false};  // (lambda, D)
  std::array<bool, 2> at_upper{false, false};
  bool on_boundary = false;
  std::array<bool, 2> unidentifiable{false, false};
  std::vector<std::string> warnings;
};

namespace detail {

struct FitContext {
  const ReducedModel* rom;
  const PipeScenario* scenario;
  const Matrix* measurements;
  FitBounds bounds;
  int evaluations = 0;
  int rejected = 0;
  int finite = 0;

  ThermalParameters map(const gsl_vector* z) const {
    return map(gsl_vector_get(z, 0), gsl_vector_get(z, 1));
  }
  ThermalParameters map(double z0, double z1) const {
    const auto& lo = bounds.lower;
    const auto& hi = bounds.upper;
    return {lo.lambda + std::clamp(z0, 0.0, 1.0) * (hi.lambda - lo.lambda),
            lo.diffusion + std::clamp(z1, 0.0, 1.0) * (hi.diffusion - lo.diffusion)};
  }

  /// Objective at p, or +inf when the ROM is unusable at p.
  double objective(const ThermalParameters& p) {
    ++evaluations;
    try {
      const Matrix y = simulate_pipe(evaluate_rom_at(*rom, p), *scenario);
      const double j = (y - *measurements).squaredNorm();
      if (std::isfinite(j)) {
        ++finite;
        return j;
      }
    } catch (const Error& e) {
      if (!e.is_numerical()) throw;
    }
    ++rejected;
    return std::numeric_limits<double>::infinity();
  }
};

inline double fit_objective(const gsl_vector* z, void* params) {
  auto* ctx = static_cast<FitContext*>(params);
  const double j = ctx->objective(ctx->map(z));
  // A huge finite value makes the simplex move away from rejected trials.
  return std::isfinite(j) ? j : std::numeric_limits<double>::max() / 4.0;
}

}  // namespace detail

inline FitResult fit_parameters(const ReducedModel& rom, const PipeScenario& scenario, const Matrix& measurements,
                                const FitBounds& bounds, const FitOptions& opt = {}) {
  bounds.lower.validate();
  bounds.upper.validate();
  if (!(bounds.upper.lambda >= bounds.lower.lambda) || !(bounds.upper.diffusion >= bounds.lower.diffusion) ||
      !std::isfinite(bounds.upper.lambda) || !std::isfinite(bounds.upper.diffusion))
    fail(ErrorKind::invalid_argument, "fit bounds must be finite with lower <= upper");
  if (measurements.rows() != static_cast<Index>(scenario.inputs.size()) || measurements.cols() != rom.C_red.rows()) {
    std::ostringstream msg;
    msg << "measurements are " << measurements.rows() << "x" << measurements.cols() << " but the scenario has "
        << scenario.inputs.size() << " steps and the ROM " << rom.C_red.rows() << " outputs";
    fail(ErrorKind::dimension, msg.str());
  }

  detail::FitContext ctx{&rom, &scenario, &measurements, bounds};
  auto normalize = [&](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; };
  const ThermalParameters start = opt.initial.value_or(
      ThermalParameters{0.5 * (bounds.lower.lambda + bounds.upper.lambda),
                        0.5 * (bounds.lower.diffusion + bounds.upper.diffusion)});

  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> z(gsl_vector_alloc(2), gsl_vector_free);
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> step(gsl_vector_alloc(2), gsl_vector_free);
  gsl_vector_set(z.get(), 0, normalize(start.lambda, bounds.lower.lambda, bounds.upper.lambda));
  gsl_vector_set(z.get(), 1, normalize(start.diffusion, bounds.lower.diffusion, bounds.upper.diffusion));
  gsl_vector_set_all(step.get(), opt.initial_step);

  gsl_multimin_function fn{&detail::fit_objective, 2, &ctx};
  std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> solver(
      gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2), gsl_multimin_fminimizer_free);
  gsl_error_handler_t* previous = gsl_set_error_handler_off();
  gsl_multimin_fminimizer_set(solver.get(), &fn, z.get(), step.get());

  FitResult result;
  int status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && result.iterations < opt.max_iter) {
    ++result.iterations;
    if (gsl_multimin_fminimizer_iterate(solver.get()) != GSL_SUCCESS) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver.get()), opt.size_tol);
  }
  gsl_set_error_handler(previous);
  result.converged = status == GSL_SUCCESS;
  result.rejected_trials = ctx.rejected;
  if (ctx.finite == 0) fail(ErrorKind::fit, "every trial parameter vector produced a non-finite objective");

  const gsl_vector* best = gsl_multimin_fminimizer_x(solver.get());
  result.params = ctx.map(best);
  result.objective = ctx.objective(result.params);
  if (!std::isfinite(result.objective)) fail(ErrorKind::fit, "fitted parameters give a non-finite objective");

  const std::array<double, 2> value{result.params.lambda, result.params.diffusion};
  const std::array<double, 2> lo{bounds.lower.lambda, bounds.lower.diffusion};
  const std::array<double, 2> hi{bounds.upper.lambda, bounds.upper.diffusion};
  const std::array<const char*, 2> name{"lambda", "D"};
  const double data_scale = std::max(1.0, measurements.squaredNorm());
  for (std::size_t i = 0; i < 2; ++i) {
    const double width = hi[i] - lo[i];
    const double eps = 1e-6 * std::max(width, std::abs(value[i]));
    result.at_lower[i] = value[i] <= lo[i] + eps;
    result.at_upper[i] = value[i] >= hi[i] - eps;
    if (result.at_lower[i] || result.at_upper[i]) {
      result.on_boundary = true;
      result.warnings.push_back(std::string(name[i]) + " is at its " + (result.at_lower[i] ? "lower" : "upper") +
                                " bound");
    }
    // Sensitivity probe along parameter i (one-sided near the bounds).
    const double delta = 1e-3 * (width > 0.0 ? width : std::max(std::abs(value[i]), 1e-6));
    auto probe = [&](double shift) {
      ThermalParameters p = result.params;
      (i == 0 ? p.lambda : p.diffusion) = std::max(0.0, value[i] + shift);
      return ctx.objective(p);
    };
    const double up = probe(delta), down = probe(-delta);
    const double change = std::max(std::abs(up - result.objective), std::abs(down - result.objective));
    if (std::isfinite(change) && change <= opt.flat_tolerance * data_scale) {
      result.unidentifiable[i] = true;
      result.warnings.push_back(std::string("objective is flat along ") + name[i] +
                                " (the data does not excite it); the returned value is not identifiable");
    }
  }
  if (!result.converged)
    result.warnings.push_back("Nelder-Mead stopped after " + std::to_string(result.iterations) +
                              " iterations without meeting the simplex-size tolerance");
  return result;
}

}  // namespace thermonet
