#pragma once

// Network graph, topological matrices and the Global Gradient Algorithm.
//
// Incidence convention: row i of the incidence matrix has +1 at the upstream
// (from) node and -1 at the downstream (to) node of link i; columns list the
// known-head nodes first, then the unknown-head nodes. With A_p0 / A_pn the
// column blocks and A_np = A_pn^T, the network equations are
//   energy:  r(q) q|q| - A_p0 h_0 - A_pn h_n = 0        (head drop along each link)
//   mass:    A_np q + q_n(h_n) - s = 0                  (outflow - inflow + demand = supply)
// where s is an optional fixed external supply at unknown-head nodes.

#include "thermonet/error.hpp"
#include "thermonet/hydraulics.hpp"
#include "thermonet/types.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace thermonet {

struct NodeSpec {
  std::string id;
  std::optional<double> known_head;  // Pa; set for fixed-head nodes

  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct LinkSpec {
  std::string id;
  std::string from;
  std::string to;
  HydraulicLink hydraulic;

  friend bool operator==(const LinkSpec&, const LinkSpec&) = default;
};

struct DemandSpec {
  std::string node;
  DemandPoint point;

  friend bool operator==(const DemandSpec&, const DemandSpec&) = default;
};

struct NetworkTopology {
  std::vector<NodeSpec> nodes;          // declaration order
  std::vector<LinkSpec> links;
  std::vector<Index> known;             // node indices with known head (column order of A_p0)
  std::vector<Index> unknown;           // node indices with unknown head (column order of A_pn)
  std::vector<Index> column_of;         // node index -> column within its block
  std::vector<Index> from, to;          // per link, node indices
  SparseMatrix incidence;               // n_p x (n_0 + n_n)
  SparseMatrix A_p0;                    // n_p x n_0
  SparseMatrix A_pn;                    // n_p x n_n
  SparseMatrix A_np;                    // n_n x n_p
  std::map<std::string, Index> node_index;
  std::map<std::string, Index> link_index;

  Index link_count() const { return static_cast<Index>(links.size()); }
  Index unknown_count() const { return static_cast<Index>(unknown.size()); }
  Index known_count() const { return static_cast<Index>(known.size()); }
  bool is_known(Index node) const { return nodes[static_cast<std::size_t>(node)].known_head.has_value(); }
};

/// Builds incidence and topological matrices; verifies ids, references and
/// connectivity (every node must reach a known-head node).
inline NetworkTopology build_topology(const std::vector<NodeSpec>& nodes, const std::vector<LinkSpec>& links) {
  NetworkTopology t;
  t.nodes = nodes;
  t.links = links;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id.empty()) fail(ErrorKind::configuration, "node with empty id");
    if (!t.node_index.emplace(nodes[i].id, static_cast<Index>(i)).second)
      fail(ErrorKind::configuration, "duplicate node id '" + nodes[i].id + "'");
    if (nodes[i].known_head && !std::isfinite(*nodes[i].known_head))
      fail(ErrorKind::configuration, "node '" + nodes[i].id + "' has a non-finite known head");
  }
  if (links.empty()) fail(ErrorKind::configuration, "network has no links");
  t.column_of.assign(nodes.size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    auto& block = nodes[i].known_head ? t.known : t.unknown;
    t.column_of[i] = static_cast<Index>(block.size());
    block.push_back(static_cast<Index>(i));
  }
  if (t.known.empty())
    fail(ErrorKind::configuration, "network needs at least one known-head node (none declared)");

  for (std::size_t k = 0; k < links.size(); ++k) {
    const auto& l = links[k];
    if (l.id.empty()) fail(ErrorKind::configuration, "link with empty id");
    if (!t.link_index.emplace(l.id, static_cast<Index>(k)).second)
      fail(ErrorKind::configuration, "duplicate link id '" + l.id + "'");
    const auto f = t.node_index.find(l.from);
    const auto g = t.node_index.find(l.to);
    if (f == t.node_index.end()) fail(ErrorKind::configuration, "link '" + l.id + "' references unknown node '" + l.from + "'");
    if (g == t.node_index.end()) fail(ErrorKind::configuration, "link '" + l.id + "' references unknown node '" + l.to + "'");
    if (f->second == g->second) fail(ErrorKind::configuration, "link '" + l.id + "' connects node '" + l.from + "' to itself");
    try {
      l.hydraulic.validate();
    } catch (const Error& e) {
      fail(ErrorKind::configuration, "link '" + l.id + "': " + e.what());
    }
    t.from.push_back(f->second);
    t.to.push_back(g->second);
  }

  // Connectivity: breadth-first search from all known-head nodes over undirected links.
  std::vector<std::vector<Index>> adjacent(nodes.size());
  for (std::size_t k = 0; k < links.size(); ++k) {
    adjacent[static_cast<std::size_t>(t.from[k])].push_back(t.to[k]);
    adjacent[static_cast<std::size_t>(t.to[k])].push_back(t.from[k]);
  }
  std::vector<bool> reached(nodes.size(), false);
  std::queue<Index> frontier;
  for (Index k : t.known) {
    reached[static_cast<std::size_t>(k)] = true;
    frontier.push(k);
  }
  while (!frontier.empty()) {
    const Index n = frontier.front();
    frontier.pop();
    for (Index m : adjacent[static_cast<std::size_t>(n)])
      if (!reached[static_cast<std::size_t>(m)]) {
        reached[static_cast<std::size_t>(m)] = true;
        frontier.push(m);
      }
  }
  std::string isolated;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!reached[i]) isolated += (isolated.empty() ? "" : ", ") + nodes[i].id;
  if (!isolated.empty())
    fail(ErrorKind::configuration, "network is disconnected: nodes without a path to a known head: " + isolated);

  const Index np = t.link_count();
  const Index n0 = t.known_count();
  const Index nn = t.unknown_count();
  std::vector<Triplet> full, p0, pn;
  for (Index k = 0; k < np; ++k) {
    for (const auto& [node, sign] : {std::pair{t.from[static_cast<std::size_t>(k)], 1.0},
                                     std::pair{t.to[static_cast<std::size_t>(k)], -1.0}}) {
      const Index col = t.column_of[static_cast<std::size_t>(node)];
      if (t.is_known(node)) {
        full.emplace_back(k, col, sign);
        p0.emplace_back(k, col, sign);
      } else {
        full.emplace_back(k, n0 + col, sign);
        pn.emplace_back(k, col, sign);
      }
    }
  }
  t.incidence.resize(np, n0 + nn);
  t.incidence.setFromTriplets(full.begin(), full.end());
  t.A_p0.resize(np, n0);
  t.A_p0.setFromTriplets(p0.begin(), p0.end());
  t.A_pn.resize(np, nn);
  t.A_pn.setFromTriplets(pn.begin(), pn.end());
  t.A_np = t.A_pn.transpose();
  return t;
}

/// A_pp = diag(r_i |q_i|) with |q_i| floored at kMinFlow.
inline Vector assemble_App(const Vector& q, const Vector& resistances) {
  if (q.size() != resistances.size()) fail(ErrorKind::dimension, "assemble_App: flow and resistance sizes differ");
  Vector d(q.size());
  for (Index i = 0; i < q.size(); ++i) d(i) = resistances(i) * std::max(std::abs(q(i)), kMinFlow);
  return d;
}

/// Everything the hydraulic solve needs at one instant.
struct HydraulicProblem {
  const NetworkTopology* topology = nullptr;
  FluidProperties fluid;
  std::vector<HydraulicLink> links;                // per link, with current valve openings
  std::vector<std::optional<DemandPoint>> demands;  // per unknown-head node column
  Vector known_heads;                              // h_0, Pa, in column order
  Vector supply;                                   // s, m^3/s per unknown-head node (may be empty = 0)
};

struct HydraulicState {
  Vector q;    // link flows, m^3/s
  Vector h;    // unknown heads, Pa
  Vector h0;   // known heads, Pa
  Vector qn;   // demand outflows, m^3/s
  int iterations = 0;
  double energy_residual = 0.0;  // ||E||_inf, Pa
  double mass_residual = 0.0;    // ||M||_inf, m^3/s
};

struct GgaOptions {
  double tol = 1e-9;
  int max_iter = 50;
  int max_halvings = 6;
};

namespace detail {

struct GgaResiduals {
  Vector energy;
  Vector mass;
  Vector gradient;   // dE_i/dq_i
  Vector demand;     // q_n(h)
  Vector demand_gradient;  // dq_n/dh
};

inline GgaResiduals gga_residuals(const HydraulicProblem& pb, const Vector& q, const Vector& h) {
  const auto& t = *pb.topology;
  GgaResiduals r;
  r.gradient.resize(q.size());
  Vector loss(q.size());
  for (Index i = 0; i < q.size(); ++i) {
    const auto hl = head_loss(q(i), pb.links[static_cast<std::size_t>(i)], pb.fluid);
    loss(i) = hl.value;
    r.gradient(i) = hl.gradient;
  }
  r.energy = loss - t.A_p0 * pb.known_heads - t.A_pn * h;
  r.demand = Vector::Zero(h.size());
  r.demand_gradient = Vector::Zero(h.size());
  for (Index n = 0; n < h.size(); ++n) {
    const auto& d = pb.demands[static_cast<std::size_t>(n)];
    if (!d) continue;
    const auto df = demand_flow(*d, h(n), pb.fluid);
    r.demand(n) = df.flow;
    r.demand_gradient(n) = df.derivative;
  }
  r.mass = t.A_np * q + r.demand;
  if (pb.supply.size() == h.size()) r.mass -= pb.supply;
  return r;
}

inline double merit(const GgaResiduals& r, double head_scale, double flow_scale) {
  const double e = r.energy.size() ? r.energy.lpNorm<Eigen::Infinity>() / head_scale : 0.0;
  const double m = r.mass.size() ? r.mass.lpNorm<Eigen::Infinity>() / flow_scale : 0.0;
  return std::max(e, m);
}

/// Unknown-head nodes that cannot reach a known head through links whose
/// conductance (1/D_pp) is not negligible, and that carry no demand gradient.
inline std::string isolated_nodes(const HydraulicProblem& pb, const Vector& conductance) {
  const auto& t = *pb.topology;
  const double cmax = conductance.size() ? conductance.maxCoeff() : 0.0;
  std::vector<bool> reached(t.nodes.size(), false);
  std::queue<Index> frontier;
  for (Index k : t.known) {
    reached[static_cast<std::size_t>(k)] = true;
    frontier.push(k);
  }
  while (!frontier.empty()) {
    const Index n = frontier.front();
    frontier.pop();
    for (Index k = 0; k < t.link_count(); ++k) {
      if (!(conductance(k) > 1e-15 * cmax)) continue;
      const Index a = t.from[static_cast<std::size_t>(k)], b = t.to[static_cast<std::size_t>(k)];
      const Index other = a == n ? b : (b == n ? a : -1);
      if (other >= 0 && !reached[static_cast<std::size_t>(other)]) {
        reached[static_cast<std::size_t>(other)] = true;
        frontier.push(other);
      }
    }
  }
  std::string out;
  for (Index n : t.unknown)
    if (!reached[static_cast<std::size_t>(n)]) out += (out.empty() ? "" : ", ") + t.nodes[static_cast<std::size_t>(n)].id;
  return out;
}

}  // namespace detail

/// Cold start: uniform q = 1e-4 m^3/s in the declared direction; unknown heads
/// from the harmonic (graph Laplacian) interpolation of the known heads.
inline HydraulicState cold_start(const HydraulicProblem& pb) {
  const auto& t = *pb.topology;
  HydraulicState s;
  s.q = Vector::Constant(t.link_count(), 1e-4);
  s.h0 = pb.known_heads;
  const Index nn = t.unknown_count();
  if (nn == 0) {
    s.h = Vector(0);
    return s;
  }
  // L_nn h_n = -L_n0 h_0 with the unit-weight Laplacian L = A^T A.
  const SparseMatrix lnn = t.A_np * t.A_pn;
  const Vector rhs = -(t.A_np * (t.A_p0 * pb.known_heads));
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(lnn);
  s.h = ldlt.info() == Eigen::Success ? Vector(ldlt.solve(rhs)) : Vector::Constant(nn, pb.known_heads.mean());
  return s;
}

/// Newton-Raphson solution of the network equations with the Schur-complement
/// update on the unknown heads and back-substitution for the flows.
inline HydraulicState gga_solve(const HydraulicProblem& pb, const HydraulicState* warm_start = nullptr,
                                const GgaOptions& opt = {}) {
  if (!pb.topology) fail(ErrorKind::configuration, "hydraulic problem has no topology");
  const auto& t = *pb.topology;
  const Index np = t.link_count();
  const Index nn = t.unknown_count();
  if (static_cast<Index>(pb.links.size()) != np || static_cast<Index>(pb.demands.size()) != nn ||
      pb.known_heads.size() != t.known_count())
    fail(ErrorKind::dimension, "hydraulic problem does not match the topology");
  if (!(opt.tol > 0.0)) fail(ErrorKind::invalid_argument, "GGA tolerance must be positive");

  HydraulicState s = warm_start && warm_start->q.size() == np && warm_start->h.size() == nn ? *warm_start
                                                                                           : cold_start(pb);
  s.h0 = pb.known_heads;
  s.iterations = 0;
  const double head_scale = std::max(1.0, pb.known_heads.lpNorm<Eigen::Infinity>());

  auto res = detail::gga_residuals(pb, s.q, s.h);
  auto converged = [&](const detail::GgaResiduals& r) {
    return (r.energy.size() == 0 || r.energy.lpNorm<Eigen::Infinity>() <= opt.tol) &&
           (r.mass.size() == 0 || r.mass.lpNorm<Eigen::Infinity>() <= opt.tol);
  };

  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  bool pattern_ready = false;
  while (!converged(res)) {
    if (s.iterations >= opt.max_iter) {
      std::ostringstream msg;
      msg << "GGA did not converge in " << opt.max_iter << " iterations (energy residual "
          << res.energy.lpNorm<Eigen::Infinity>() << " Pa, mass residual " << res.mass.lpNorm<Eigen::Infinity>()
          << " m^3/s)";
      fail(ErrorKind::convergence, msg.str());
    }
    const Vector inv_d = res.gradient.cwiseInverse();
    Vector dh(nn);
    if (nn > 0) {
      SparseMatrix schur = t.A_np * inv_d.asDiagonal() * t.A_pn;
      for (Index n = 0; n < nn; ++n) schur.coeffRef(n, n) += res.demand_gradient(n);
      const Vector rhs = -res.mass + t.A_np * inv_d.cwiseProduct(res.energy);
      if (!pattern_ready) {
        ldlt.analyzePattern(schur);
        pattern_ready = true;
      }
      ldlt.factorize(schur);
      bool singular = ldlt.info() != Eigen::Success;
      if (!singular) {
        dh = ldlt.solve(rhs);
        singular = !dh.allFinite() || (ldlt.vectorD().array() <= 0.0).any();
      }
      if (singular) {
        const std::string nodes = detail::isolated_nodes(pb, inv_d);
        fail(ErrorKind::structural, "singular GGA Schur complement" +
                                        (nodes.empty() ? std::string() : " (isolated nodes: " + nodes + ")"));
      }
    }
    const Vector dq = inv_d.cwiseProduct(-res.energy + (nn > 0 ? Vector(t.A_pn * dh) : Vector::Zero(np)));

    const double flow_scale = std::max(1e-6, s.q.lpNorm<Eigen::Infinity>());
    const double current = detail::merit(res, head_scale, flow_scale);
    double step = 1.0;
    Vector q_try = s.q + dq;
    Vector h_try = s.h + dh;
    auto trial = detail::gga_residuals(pb, q_try, h_try);
    for (int halving = 0; halving < opt.max_halvings && !(detail::merit(trial, head_scale, flow_scale) < current);
         ++halving) {
      step *= 0.5;
      q_try = s.q + step * dq;
      h_try = s.h + step * dh;
      trial = detail::gga_residuals(pb, q_try, h_try);
    }
    s.q = std::move(q_try);
    s.h = std::move(h_try);
    res = std::move(trial);
    ++s.iterations;
  }
  s.qn = res.demand;
  s.energy_residual = res.energy.size() ? res.energy.lpNorm<Eigen::Infinity>() : 0.0;
  s.mass_residual = res.mass.size() ? res.mass.lpNorm<Eigen::Infinity>() : 0.0;
  return s;
}

}  // namespace thermonet
