#pragma once

// Flow resistance of a single pipe (Darcy-Weisbach friction, lumped minor
// losses, control valve orifice) and the pressure-driven demand (emitter) law.
// Heads are pressures in Pa, flows in m^3/s; the head loss of a link is
// r_p(q) q |q|.

#include "thermonet/error.hpp"
#include "thermonet/thermal_fom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace thermonet {

inline constexpr double kLaminarLimit = 2400.0;  // Reynolds number of the regime switch
inline constexpr double kMinFlow = 1e-8;         // m^3/s, |q| floor for the resistance (Reynolds number)
inline constexpr double kGradientFlowFloor = 1e-11;  // m^3/s, |q| floor keeping d(head loss)/dq > 0
inline constexpr double kTransitionWidth = 1e-4;  // relative Re width of the laminar/turbulent bridge
inline constexpr double kDemandSmoothing = 100.0;  // Pa, width of the demand-law blend near h = 0
inline constexpr double kDefaultClosedArea = 1e-9;  // m^2

struct FluidProperties {
  double density = 998.2;                // kg/m^3
  double kinematic_viscosity = 1.0e-6;  // m^2/s

  void validate() const {
    if (!(density > 0.0) || !(kinematic_viscosity > 0.0) || !std::isfinite(density) ||
        !std::isfinite(kinematic_viscosity)) {
      std::ostringstream msg;
      msg << "fluid properties must be positive: rho=" << density << " nu=" << kinematic_viscosity;
      fail(ErrorKind::configuration, msg.str());
    }
  }

  friend bool operator==(const FluidProperties&, const FluidProperties&) = default;
};

struct Valve {
  double discharge_coefficient = 0.6;       // c_d
  double open_area = 0.0;                   // a_fo, m^2
  double closed_area = kDefaultClosedArea;  // a_fc, m^2
  double opening = 1.0;                     // u_v in [0, 1]

  void validate() const {
    if (!(discharge_coefficient > 0.0) || !(closed_area > 0.0) || !(open_area >= closed_area) ||
        !std::isfinite(open_area)) {
      std::ostringstream msg;
      msg << "invalid valve: c_d=" << discharge_coefficient << " a_fo=" << open_area << " a_fc=" << closed_area;
      fail(ErrorKind::configuration, msg.str());
    }
  }

  friend bool operator==(const Valve&, const Valve&) = default;
};

struct HydraulicLink {
  PipeGeometry geometry;
  double roughness = 0.0;    // absolute roughness eps, m
  double minor_loss = 0.0;   // k_min
  Valve valve;

  void validate() const {
    geometry.validate();
    if (!(roughness >= 0.0) || !(minor_loss >= 0.0)) {
      std::ostringstream msg;
      msg << "invalid link losses: roughness=" << roughness << " k_min=" << minor_loss;
      fail(ErrorKind::configuration, msg.str());
    }
    valve.validate();
  }

  friend bool operator==(const HydraulicLink&, const HydraulicLink&) = default;
};

struct DemandPoint {
  double emitter_coefficient = 0.6;  // c_d_e
  Valve valve;                       // discharge_coefficient unused; opening is u_d

  friend bool operator==(const DemandPoint&, const DemandPoint&) = default;
};

/// Re = |q| d / (a nu).
inline double reynolds(double q, const HydraulicLink& link, const FluidProperties& fluid) {
  return std::abs(q) * link.geometry.inner_diameter / (link.geometry.cross_section * fluid.kinematic_viscosity);
}

/// Haaland's explicit approximation of the turbulent Darcy friction factor.
inline double haaland(double re, double rel_roughness) {
  const double t = std::pow(rel_roughness / 3.7, 1.11) + 6.9 / re;
  const double x = -1.8 * std::log10(t);
  return 1.0 / (x * x);
}

/// Colebrook-White residual in the 1/sqrt(f) form:
///   1/sqrt(f) + 2 log10(eps/(3.7 d) + 2.51/(Re sqrt(f))).
inline double colebrook_residual(double f, double re, double rel_roughness) {
  const double x = 1.0 / std::sqrt(f);
  return x + 2.0 * std::log10(rel_roughness / 3.7 + 2.51 * x / re);
}

struct FrictionFactor {
  double value = 0.0;
  double derivative = 0.0;  // df/dRe
  bool laminar = false;
};

/// Darcy friction factor and its derivative with respect to Re. Re must be > 0.
inline FrictionFactor friction_factor_with_derivative(double re, double rel_roughness) {
  if (!(re > 0.0) || !(rel_roughness >= 0.0)) {
    std::ostringstream msg;
    msg << "friction factor needs Re > 0 and eps/d >= 0 (Re=" << re << ", eps/d=" << rel_roughness << ")";
    fail(ErrorKind::invalid_argument, msg.str());
  }
  if (re < kLaminarLimit) return {64.0 / re, -64.0 / (re * re), true};

  // Newton on F(x) = x + 2 log10(k + c x), x = 1/sqrt(f), from Haaland.
  const double k = rel_roughness / 3.7;
  const double c = 2.51 / re;
  const double two_over_ln10 = 2.0 / std::numbers::ln10;
  double x = 1.0 / std::sqrt(haaland(re, rel_roughness));
  for (int iter = 0; iter < 50; ++iter) {
    const double arg = k + c * x;
    const double fx = x + 2.0 * std::log10(arg);
    const double dfx = 1.0 + two_over_ln10 * c / arg;
    const double dx = fx / dfx;
    x -= dx;
    if (std::abs(dx) <= 1e-15 * std::abs(x)) break;
  }
  const double arg = k + c * x;
  const double fx_x = 1.0 + two_over_ln10 * c / arg;
  const double fx_re = -two_over_ln10 * c * x / (re * arg);
  const double dx_dre = -fx_re / fx_x;
  return {1.0 / (x * x), -2.0 / (x * x * x) * dx_dre, false};
}

inline double friction_factor(double re, double rel_roughness) {
  return friction_factor_with_derivative(re, rel_roughness).value;
}

/// a_v = a_fc + u (a_fo - a_fc); u outside [0, 1] is clamped and reported.
inline double valve_area(const Valve& valve, double opening, std::vector<std::string>* warnings = nullptr) {
  double u = opening;
  if (!(u >= 0.0 && u <= 1.0)) {
    u = std::isnan(u) ? 0.0 : std::clamp(u, 0.0, 1.0);
    if (warnings) {
      std::ostringstream msg;
      msg << "valve opening " << opening << " clamped to " << u;
      warnings->push_back(msg.str());
    }
  }
  return valve.closed_area + u * (valve.open_area - valve.closed_area);
}

struct Resistance {
  double value = 0.0;       // r_p, Pa s^2 / m^6
  double derivative = 0.0;  // dr_p / d|q| (zero inside the |q| floor)
};

/// r_p = rho/(2a^2) f L/d + rho/(2a^2) k_min + rho/(c_d a_v)^2, with |q| floored at kMinFlow.
inline Resistance pipe_resistance_with_derivative(double q, const HydraulicLink& link, const FluidProperties& fluid,
                                                  std::vector<std::string>* warnings = nullptr) {
  const auto& g = link.geometry;
  const double av = valve_area(link.valve, link.valve.opening, warnings);
  if (!(av > 0.0)) fail(ErrorKind::configuration, "valve area must be positive");
  const double dyn = fluid.density / (2.0 * g.cross_section * g.cross_section);
  const double aq = std::abs(q);
  const bool floored = aq < kMinFlow;
  const double re = reynolds(floored ? kMinFlow : aq, link, fluid);
  const double rel_roughness = link.roughness / g.inner_diameter;
  auto f = friction_factor_with_derivative(re, rel_roughness);
  // The friction factor jumps at the regime switch, so a link whose pressure
  // drop falls inside the jump would have no solution. Bridge the jump linearly
  // over Re in [Re_c, Re_c (1 + kTransitionWidth)]; both branches stay exact outside.
  const double re_hi = kLaminarLimit * (1.0 + kTransitionWidth);
  if (re >= kLaminarLimit && re < re_hi) {
    const double f_lo = 64.0 / kLaminarLimit;
    const double f_hi = friction_factor(re_hi, rel_roughness);
    const double slope = (f_hi - f_lo) / (re_hi - kLaminarLimit);
    f = {f_lo + slope * (re - kLaminarLimit), slope, false};
  }
  const double orifice = fluid.density / ((link.valve.discharge_coefficient * av) * (link.valve.discharge_coefficient * av));
  Resistance r;
  r.value = dyn * f.value * g.length / g.inner_diameter + dyn * link.minor_loss + orifice;
  const double dre_dq = g.inner_diameter / (g.cross_section * fluid.kinematic_viscosity);
  r.derivative = floored ? 0.0 : dyn * g.length / g.inner_diameter * f.derivative * dre_dq;
  return r;
}

inline double pipe_resistance(double q, const HydraulicLink& link, const FluidProperties& fluid) {
  return pipe_resistance_with_derivative(q, link, fluid).value;
}

struct HeadLoss {
  double value = 0.0;     // r_p q |q|, Pa
  double gradient = 0.0;  // d(head loss)/dq, > 0
};

/// Head loss and its exact derivative 2 r|q| + r'(|q|) q^2. Only the
/// derivative's |q| is floored (at kGradientFlowFloor) to keep it positive at
/// q = 0; below kMinFlow the resistance is constant, so flows through closed
/// valves (typically a few 1e-9 m^3/s) still converge quadratically.
inline HeadLoss head_loss(double q, const HydraulicLink& link, const FluidProperties& fluid) {
  const auto r = pipe_resistance_with_derivative(q, link, fluid);
  const double aq = std::max(std::abs(q), kGradientFlowFloor);
  return {r.value * q * std::abs(q), 2.0 * r.value * aq + r.derivative * aq * aq};
}

struct DemandFlow {
  double flow = 0.0;        // m^3/s
  double derivative = 0.0;  // dq/dh, 1/(Pa) m^3/s
};

/// q = c_d_e a_v sqrt(2 h / rho) for h >= eps_h; below, a C1 cubic blend
/// q = K sqrt(eps_h) (2.5 s^2 - 1.5 s^3), s = h/eps_h, that is monotone and flat at h = 0.
inline DemandFlow demand_flow(const DemandPoint& demand, double h, const FluidProperties& fluid,
                              std::vector<std::string>* warnings = nullptr) {
  if (!(h > 0.0)) return {};
  const double av = valve_area(demand.valve, demand.valve.opening, warnings);
  const double k = demand.emitter_coefficient * av * std::sqrt(2.0 / fluid.density);
  if (h >= kDemandSmoothing) {
    const double root = std::sqrt(h);
    return {k * root, 0.5 * k / root};
  }
  const double s = h / kDemandSmoothing;
  const double scale = k * std::sqrt(kDemandSmoothing);
  return {scale * s * s * (2.5 - 1.5 * s), scale * s * (5.0 - 4.5 * s) / kDemandSmoothing};
}

}  // namespace thermonet
