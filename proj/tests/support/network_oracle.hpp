#pragma once

// Test support: hydraulic problems built from network descriptions, and an
// independent solution of the network equations with a generic root finder
// (GSL hybrids on the full (q, h) system, no Schur complement, no GGA).

#include "thermonet/io/network_file.hpp"
#include "thermonet/network.hpp"
#include "thermonet/simulation.hpp"

#include <gsl/gsl_multiroots.h>
#include <gsl/gsl_vector.h>

#include <memory>
#include <optional>
#include <string>

namespace thermonet::testing {

struct BuiltProblem {
  std::unique_ptr<NetworkTopology> topology;
  HydraulicProblem problem;
};

inline BuiltProblem build_problem(const NetworkDescription& net) {
  BuiltProblem b;
  std::vector<LinkSpec> specs;
  for (const auto& l : net.links) specs.push_back(l.spec);
  b.topology = std::make_unique<NetworkTopology>(build_topology(net.nodes, specs));
  const auto& t = *b.topology;
  b.problem.topology = b.topology.get();
  b.problem.fluid = net.fluid;
  for (const auto& l : net.links) b.problem.links.push_back(l.spec.hydraulic);
  b.problem.demands.assign(static_cast<std::size_t>(t.unknown_count()), std::nullopt);
  for (const auto& d : net.demands) {
    const Index node = t.node_index.at(d.node);
    b.problem.demands[static_cast<std::size_t>(t.column_of[static_cast<std::size_t>(node)])] = d.point;
  }
  b.problem.known_heads.resize(t.known_count());
  for (Index c = 0; c < t.known_count(); ++c)
    b.problem.known_heads(c) = *t.nodes[static_cast<std::size_t>(t.known[static_cast<std::size_t>(c)])].known_head;
  b.problem.supply = Vector::Zero(t.unknown_count());
  return b;
}

struct RootOracleResult {
  bool ok = false;
  Vector q, h;
  int iterations = 0;
};

namespace detail {

struct OracleContext {
  const HydraulicProblem* pb;
  double q_scale, h_scale;
};

inline int oracle_residual(const gsl_vector* x, void* params, gsl_vector* f) {
  const auto& ctx = *static_cast<OracleContext*>(params);
  const auto& t = *ctx.pb->topology;
  const Index np = t.link_count(), nn = t.unknown_count();
  Vector q(np), h(nn);
  for (Index i = 0; i < np; ++i) q(i) = ctx.q_scale * gsl_vector_get(x, static_cast<std::size_t>(i));
  for (Index n = 0; n < nn; ++n) h(n) = ctx.h_scale * gsl_vector_get(x, static_cast<std::size_t>(np + n));
  // Energy: r(q) q|q| - (head drop along the link); mass: outflow - inflow + demand - supply.
  for (Index i = 0; i < np; ++i) {
    const auto& link = ctx.pb->links[static_cast<std::size_t>(i)];
    const double loss = pipe_resistance(q(i), link, ctx.pb->fluid) * q(i) * std::abs(q(i));
    auto head_at = [&](Index node) {
      const Index c = t.column_of[static_cast<std::size_t>(node)];
      return t.is_known(node) ? ctx.pb->known_heads(c) : h(c);
    };
    const double drop = head_at(t.from[static_cast<std::size_t>(i)]) - head_at(t.to[static_cast<std::size_t>(i)]);
    gsl_vector_set(f, static_cast<std::size_t>(i), (loss - drop) / ctx.h_scale);
  }
  Vector mass = Vector::Zero(nn);
  for (Index i = 0; i < np; ++i) {
    const Index a = t.from[static_cast<std::size_t>(i)], b = t.to[static_cast<std::size_t>(i)];
    if (!t.is_known(a)) mass(t.column_of[static_cast<std::size_t>(a)]) += q(i);
    if (!t.is_known(b)) mass(t.column_of[static_cast<std::size_t>(b)]) -= q(i);
  }
  for (Index n = 0; n < nn; ++n) {
    const auto& d = ctx.pb->demands[static_cast<std::size_t>(n)];
    if (d && h(n) > 0.0) {
      const double av = d->valve.closed_area + std::clamp(d->valve.opening, 0.0, 1.0) *
                                                   (d->valve.open_area - d->valve.closed_area);
      const double k = d->emitter_coefficient * av * std::sqrt(2.0 / ctx.pb->fluid.density);
      const double eps = kDemandSmoothing;
      if (h(n) >= eps) {
        mass(n) += k * std::sqrt(h(n));
      } else {
        const double s = h(n) / eps;
        mass(n) += k * std::sqrt(eps) * s * s * (2.5 - 1.5 * s);
      }
    }
    if (ctx.pb->supply.size() == nn) mass(n) -= ctx.pb->supply(n);
    gsl_vector_set(f, static_cast<std::size_t>(np + n), mass(n) / ctx.q_scale);
  }
  return GSL_SUCCESS;
}

}  // namespace detail

/// Solves the network equations with GSL's hybrid Powell method starting from
/// the given guess; stops on a scaled residual below tol.
inline RootOracleResult root_oracle(const HydraulicProblem& pb, const Vector& q0, const Vector& h0,
                                    double tol = 1e-14, int max_iter = 2000) {
  const auto& t = *pb.topology;
  const Index np = t.link_count(), nn = t.unknown_count();
  detail::OracleContext ctx{&pb, std::max(1e-9, q0.cwiseAbs().maxCoeff()),
                            std::max(1.0, pb.known_heads.cwiseAbs().maxCoeff())};
  gsl_multiroot_function fn{&detail::oracle_residual, static_cast<std::size_t>(np + nn), &ctx};
  gsl_vector* x = gsl_vector_alloc(static_cast<std::size_t>(np + nn));
  for (Index i = 0; i < np; ++i) gsl_vector_set(x, static_cast<std::size_t>(i), q0(i) / ctx.q_scale);
  for (Index n = 0; n < nn; ++n) gsl_vector_set(x, static_cast<std::size_t>(np + n), h0(n) / ctx.h_scale);
  gsl_multiroot_fsolver* s = gsl_multiroot_fsolver_alloc(gsl_multiroot_fsolver_hybrids, static_cast<std::size_t>(np + nn));
  gsl_multiroot_fsolver_set(s, &fn, x);
  RootOracleResult out;
  int status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && out.iterations < max_iter) {
    ++out.iterations;
    if (gsl_multiroot_fsolver_iterate(s)) break;
    status = gsl_multiroot_test_residual(s->f, tol);
  }
  out.ok = status == GSL_SUCCESS;
  out.q.resize(np);
  out.h.resize(nn);
  for (Index i = 0; i < np; ++i) out.q(i) = ctx.q_scale * gsl_vector_get(s->x, static_cast<std::size_t>(i));
  for (Index n = 0; n < nn; ++n) out.h(n) = ctx.h_scale * gsl_vector_get(s->x, static_cast<std::size_t>(np + n));
  gsl_multiroot_fsolver_free(s);
  gsl_vector_free(x);
  return out;
}

/// Bundled networks with at most four links.
inline std::vector<std::string> small_network_files() {
  return {"single_pipe.json", "parallel_pair.json", "branch_demand.json"};
}

}  // namespace thermonet::testing
