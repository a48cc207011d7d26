#pragma once

// Thermal-hydraulic network simulation: per step, solve the hydraulic state,
// convert link flows to velocities, feed every pipe model with the mixed
// temperature of its upstream node (from the previous step boundary), advance
// the pipe models and mix the outlet temperatures at the nodes.

#include "thermonet/error.hpp"
#include "thermonet/mor.hpp"
#include "thermonet/network.hpp"
#include "thermonet/thermal_fom.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace thermonet {

enum class ThermalModelKind { fom, rom };
enum class ReductionMethod { moment, h2 };
enum class FeedMode { head, flow };

struct ThermalLinkConfig {
  ThermalParameters params;
  std::vector<double> sensors;  // axial positions, m
  ThermalModelKind model = ThermalModelKind::rom;
  Index order = 7;
  ReductionMethod method = ReductionMethod::moment;
  double reference_velocity = 0.1;  // m/s, centre of the moment-matching velocity range

  friend bool operator==(const ThermalLinkConfig&, const ThermalLinkConfig&) = default;
};

struct NetworkLink {
  LinkSpec spec;
  ThermalLinkConfig thermal;

  friend bool operator==(const NetworkLink&, const NetworkLink&) = default;
};

struct NetworkDescription {
  FluidProperties fluid;
  std::vector<NodeSpec> nodes;
  std::vector<NetworkLink> links;
  std::vector<DemandSpec> demands;
  std::string feed_node;              // source of the network feed
  FeedMode feed_mode = FeedMode::head;
  std::optional<double> initial_temperature;  // degC; defaults to the first ambient sample

  friend bool operator==(const NetworkDescription&, const NetworkDescription&) = default;
};

/// Inputs of one step (zero-order hold over the step).
struct StepInputs {
  double feed = 0.0;                   // Pa (head mode) or m^3/s (flow mode)
  double feed_temperature = 0.0;       // T_up, degC
  double ambient_temperature = 0.0;    // T_amb, degC
  std::vector<std::pair<std::string, double>> valves;   // link id -> u_v
  std::vector<std::pair<std::string, double>> demands;  // node id -> u_d
};

struct Scenario {
  FeedMode feed_mode = FeedMode::head;
  std::vector<double> time;  // s, uniform
  std::vector<double> feed;  // Pa or m^3/s
  std::vector<double> feed_temperature;
  std::vector<double> ambient_temperature;
  std::vector<std::pair<std::string, std::vector<double>>> valves;   // link id -> u_v series
  std::vector<std::pair<std::string, std::vector<double>>> demands;  // node id -> u_d series

  std::size_t size() const { return time.size(); }

  StepInputs sample(std::size_t k) const {
    StepInputs in;
    in.feed = feed.at(k);
    in.feed_temperature = feed_temperature.at(k);
    in.ambient_temperature = ambient_temperature.at(k);
    for (const auto& [id, series] : valves) in.valves.emplace_back(id, series.at(k));
    for (const auto& [id, series] : demands) in.demands.emplace_back(id, series.at(k));
    return in;
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Node temperatures as flow-weighted averages of the inflowing link outlet
/// temperatures; nodes whose total inflow is at most kMinFlow keep their
/// previous value.
inline std::vector<double> mix_node_temperatures(const NetworkTopology& topology, const Vector& q,
                                                 const std::vector<double>& outlet_temperatures,
                                                 const std::vector<double>& previous) {
  std::vector<double> weight(topology.nodes.size(), 0.0), sum(topology.nodes.size(), 0.0);
  for (Index k = 0; k < topology.link_count(); ++k) {
    if (!(q(k) > kMinFlow)) continue;
    const auto node = static_cast<std::size_t>(topology.to[static_cast<std::size_t>(k)]);
    weight[node] += q(k);
    sum[node] += q(k) * outlet_temperatures[static_cast<std::size_t>(k)];
  }
  std::vector<double> out = previous;
  for (std::size_t n = 0; n < out.size(); ++n)
    if (weight[n] > kMinFlow) out[n] = sum[n] / weight[n];
  return out;
}

/// Thermal model of one link: either the full-order model or a ROM run on
/// x = offset * 1 + V x_r with inputs shifted by the offset.
class LinkThermalModel {
 public:
  LinkThermalModel(std::shared_ptr<const BilinearFom> fom, double initial_temperature)
      : fom_(std::move(fom)), fom_stepper_(std::make_unique<FomStepper>(fom_)) {
    x_ = Vector::Constant(fom_->state_dim(), initial_temperature);
  }

  LinkThermalModel(std::shared_ptr<const BilinearFom> fom, const ReducedModel& rom, double initial_temperature)
      : fom_(std::move(fom)), offset_(initial_temperature) {
    FixedRom fixed = evaluate_rom_at(rom, fom_->params);
    rom_stepper_ = std::make_unique<RomStepper>(std::move(fixed));
    x_ = Vector::Zero(rom.order);
  }

  bool reduced() const { return rom_stepper_ != nullptr; }
  Index state_dim() const { return x_.size(); }
  const Vector& state() const { return x_; }

  void step(double velocity, double inlet_temperature, double ambient_temperature, double dt) {
    if (rom_stepper_) {
      x_ = rom_stepper_->step(x_, ThermalInputs{velocity, inlet_temperature - offset_, ambient_temperature - offset_},
                              dt);
    } else {
      x_ = fom_stepper_->step(x_, ThermalInputs{velocity, inlet_temperature, ambient_temperature}, dt);
    }
  }

  /// Sensor temperatures followed by the outlet temperature.
  Vector outputs() const {
    if (rom_stepper_) return (rom_stepper_->model().C * x_).array() + offset_;
    return fom_->C * x_;
  }

 private:
  std::shared_ptr<const BilinearFom> fom_;
  std::unique_ptr<FomStepper> fom_stepper_;
  std::unique_ptr<RomStepper> rom_stepper_;
  double offset_ = 0.0;
  Vector x_;
};

struct StepRecord {
  double time = 0.0;  // s, end of the step
  HydraulicState hydraulic;
  std::vector<double> velocities;          // m/s, per link, as used by the thermal models
  std::vector<double> node_temperatures;   // degC, declaration order
  std::vector<double> sensor_temperatures; // degC, in NetworkSimulator::sensor_names() order
  double gga_seconds = 0.0;
  double thermal_seconds = 0.0;
};

struct SimulationOptions {
  GgaOptions gga;
  bool warm_start = true;
  /// ROMs to use instead of reducing at start-up, keyed by link id.
  std::map<std::string, ReducedModel> roms;
  /// Per-link model overrides keyed by link id (e.g. from the command line).
  std::map<std::string, ThermalModelKind> model_override;
};

class NetworkSimulator {
 public:
  NetworkSimulator(NetworkDescription net, double initial_temperature, SimulationOptions opt = {})
      : net_(std::move(net)), opt_(std::move(opt)) {
    net_.fluid.validate();
    std::vector<LinkSpec> specs;
    for (const auto& l : net_.links) specs.push_back(l.spec);
    topology_ = build_topology(net_.nodes, specs);
    configure_feed();
    configure_demands();
    for (const auto& [id, kind] : opt_.model_override)
      if (!topology_.link_index.count(id)) fail(ErrorKind::configuration, "model override for unknown link '" + id + "'");
    for (const auto& [id, rom] : opt_.roms)
      if (!topology_.link_index.count(id)) fail(ErrorKind::configuration, "ROM supplied for unknown link '" + id + "'");

    problem_.topology = &topology_;
    problem_.fluid = net_.fluid;
    for (const auto& l : net_.links) problem_.links.push_back(l.spec.hydraulic);
    problem_.known_heads.resize(topology_.known_count());
    for (Index c = 0; c < topology_.known_count(); ++c)
      problem_.known_heads(c) = *net_.nodes[static_cast<std::size_t>(topology_.known[static_cast<std::size_t>(c)])].known_head;
    problem_.supply = Vector::Zero(topology_.unknown_count());

    for (const auto& l : net_.links) build_link_model(l, initial_temperature);
    nodes_temperature_.assign(net_.nodes.size(), initial_temperature);
  }

  NetworkSimulator(const NetworkSimulator&) = delete;
  NetworkSimulator& operator=(const NetworkSimulator&) = delete;

  const NetworkTopology& topology() const { return topology_; }
  const NetworkDescription& description() const { return net_; }
  const std::vector<std::string>& sensor_names() const { return sensor_names_; }
  const std::vector<double>& node_temperatures() const { return nodes_temperature_; }
  const LinkThermalModel& link_model(Index k) const { return *models_[static_cast<std::size_t>(k)]; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Hydraulic state for the given inputs without advancing the thermal state.
  HydraulicState solve_hydraulics(const StepInputs& in, const HydraulicState* warm) {
    apply_controls(in);
    return gga_solve(problem_, warm, opt_.gga);
  }

  StepRecord step(const StepInputs& in, double time, double dt) {
    StepRecord rec;
    rec.time = time + dt;
    try {
      const auto t0 = std::chrono::steady_clock::now();
      rec.hydraulic = solve_hydraulics(in, opt_.warm_start && last_ ? &*last_ : nullptr);
      const auto t1 = std::chrono::steady_clock::now();
      last_ = rec.hydraulic;

      const std::size_t feed = static_cast<std::size_t>(topology_.node_index.at(net_.feed_node));
      std::vector<double> inlet = nodes_temperature_;
      inlet[feed] = in.feed_temperature;
      std::vector<double> outlets(net_.links.size());
      rec.velocities.resize(net_.links.size());
      for (std::size_t k = 0; k < net_.links.size(); ++k) {
        const double q = rec.hydraulic.q(static_cast<Index>(k));
        if (q < -kMinFlow) {
          std::ostringstream msg;
          msg << "flow reversal in link '" << net_.links[k].spec.id << "' (q=" << q
              << " m^3/s) is not supported by the upwind pipe models";
          fail(ErrorKind::configuration, msg.str());
        }
        const double v = q > kMinFlow ? q / net_.links[k].spec.hydraulic.geometry.cross_section : 0.0;
        rec.velocities[k] = v;
        models_[k]->step(v, inlet[static_cast<std::size_t>(topology_.from[k])], in.ambient_temperature, dt);
        const Vector y = models_[k]->outputs();
        outlets[k] = y(y.size() - 1);
        for (Index s = 0; s + 1 < y.size(); ++s) rec.sensor_temperatures.push_back(y(s));
      }
      std::vector<double> mixed = mix_node_temperatures(topology_, rec.hydraulic.q, outlets, nodes_temperature_);
      mixed[feed] = in.feed_temperature;
      nodes_temperature_ = std::move(mixed);
      rec.node_temperatures = nodes_temperature_;
      const auto t2 = std::chrono::steady_clock::now();
      rec.gga_seconds = std::chrono::duration<double>(t1 - t0).count();
      rec.thermal_seconds = std::chrono::duration<double>(t2 - t1).count();
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "t=" << time << " s: " << e.what();
      throw Error(e.kind(), msg.str());
    }
    return rec;
  }

 private:
  void configure_feed() {
    const auto it = topology_.node_index.find(net_.feed_node);
    if (it == topology_.node_index.end()) fail(ErrorKind::configuration, "feed node '" + net_.feed_node + "' is not declared");
    const bool known = topology_.is_known(it->second);
    if (net_.feed_mode == FeedMode::head && !known)
      fail(ErrorKind::configuration, "feed node '" + net_.feed_node + "' must have a known head in head-feed mode");
    if (net_.feed_mode == FeedMode::flow && known)
      fail(ErrorKind::configuration, "feed node '" + net_.feed_node + "' must not have a known head in flow-feed mode");
  }

  void configure_demands() {
    problem_.demands.assign(static_cast<std::size_t>(topology_.unknown_count()), std::nullopt);
    for (const auto& d : net_.demands) {
      const auto it = topology_.node_index.find(d.node);
      if (it == topology_.node_index.end()) fail(ErrorKind::configuration, "demand at undeclared node '" + d.node + "'");
      if (topology_.is_known(it->second))
        fail(ErrorKind::configuration, "demand at known-head node '" + d.node + "' is not supported");
      const auto col = static_cast<std::size_t>(topology_.column_of[static_cast<std::size_t>(it->second)]);
      if (problem_.demands[col]) fail(ErrorKind::configuration, "duplicate demand at node '" + d.node + "'");
      if (!(d.point.emitter_coefficient > 0.0))
        fail(ErrorKind::configuration, "demand at node '" + d.node + "' needs a positive emitter coefficient");
      if (!(d.point.valve.closed_area > 0.0) || !(d.point.valve.open_area >= d.point.valve.closed_area))
        fail(ErrorKind::configuration, "demand valve at node '" + d.node + "' needs 0 < a_fc <= a_fo");
      problem_.demands[col] = d.point;
    }
  }

  void apply_controls(const StepInputs& in) {
    const Index feed = topology_.node_index.at(net_.feed_node);
    const auto col = topology_.column_of[static_cast<std::size_t>(feed)];
    if (net_.feed_mode == FeedMode::head) {
      problem_.known_heads(col) = in.feed;
    } else {
      problem_.supply.setZero();
      problem_.supply(col) = in.feed;
    }
    for (const auto& [id, u] : in.valves) {
      const auto it = topology_.link_index.find(id);
      if (it == topology_.link_index.end()) fail(ErrorKind::configuration, "valve signal for unknown link '" + id + "'");
      auto& valve = problem_.links[static_cast<std::size_t>(it->second)].valve;
      valve.opening = clamp_signal(u, "u_v:" + id);
    }
    for (const auto& [id, u] : in.demands) {
      const auto it = topology_.node_index.find(id);
      if (it == topology_.node_index.end() || topology_.is_known(it->second))
        fail(ErrorKind::configuration, "demand signal for unknown demand node '" + id + "'");
      auto& d = problem_.demands[static_cast<std::size_t>(topology_.column_of[static_cast<std::size_t>(it->second)])];
      if (!d) fail(ErrorKind::configuration, "demand signal for node '" + id + "' without a demand point");
      d->valve.opening = clamp_signal(u, "u_d:" + id);
    }
  }

  double clamp_signal(double u, const std::string& name) {
    std::vector<std::string> w;
    Valve unit;
    unit.closed_area = 0.0;
    unit.open_area = 1.0;
    const double clamped = valve_area(unit, u, &w);
    for (auto& msg : w) warnings_.push_back(name + ": " + msg);
    return clamped;
  }

  void build_link_model(const NetworkLink& l, double initial_temperature) {
    const auto& geom = l.spec.hydraulic.geometry;
    auto fom = std::make_shared<const BilinearFom>(assemble_fom(geom, l.thermal.params, SensorLayout{l.thermal.sensors}));
    ThermalModelKind kind = l.thermal.model;
    if (const auto it = opt_.model_override.find(l.spec.id); it != opt_.model_override.end()) kind = it->second;
    const auto rows = sensor_rows(geom, SensorLayout{l.thermal.sensors});
    for (std::size_t s = 0; s + 1 < rows.size(); ++s) {
      std::ostringstream name;
      name << l.spec.id << "@" << l.thermal.sensors[s];
      sensor_names_.push_back(name.str());
    }
    if (kind == ThermalModelKind::fom) {
      models_.push_back(std::make_unique<LinkThermalModel>(fom, initial_temperature));
      return;
    }
    if (const auto it = opt_.roms.find(l.spec.id); it != opt_.roms.end()) {
      if (it->second.full_dim != fom->state_dim() || it->second.C_red.rows() != fom->output_dim())
        fail(ErrorKind::configuration, "supplied ROM for link '" + l.spec.id + "' does not match its grid or sensors");
      models_.push_back(std::make_unique<LinkThermalModel>(fom, it->second, initial_temperature));
      return;
    }
    const auto factors = decouple_parameters(geom);
    const Index r = std::min(l.thermal.order, fom->state_dim());
    ProjectionBasis basis;
    if (l.thermal.method == ReductionMethod::moment) {
      MomentOptions mo;
      mo.reference_velocity = l.thermal.reference_velocity;
      basis = moment_reduce(factors, l.thermal.params, *fom, r, mo);
    } else {
      H2Options ho;
      ho.expansion_velocity = l.thermal.reference_velocity;
      basis = h2_reduce(factors, l.thermal.params, *fom, r, ho);
    }
    models_.push_back(std::make_unique<LinkThermalModel>(fom, project(factors, *fom, basis), initial_temperature));
  }

  NetworkDescription net_;
  SimulationOptions opt_;
  NetworkTopology topology_;
  HydraulicProblem problem_;
  std::vector<std::unique_ptr<LinkThermalModel>> models_;
  std::vector<std::string> sensor_names_;
  std::vector<double> nodes_temperature_;
  std::optional<HydraulicState> last_;
  std::vector<std::string> warnings_;
};

/// Step period of a scenario: the uniform sample spacing, or the fallback for
/// a single-sample scenario. Non-uniform grids are rejected.
inline double scenario_step(const Scenario& sc, double fallback = 1.0) {
  if (sc.time.size() < 2) return fallback;
  const double dt = sc.time[1] - sc.time[0];
  if (!(dt > 0.0)) fail(ErrorKind::configuration, "scenario time must be strictly increasing");
  for (std::size_t k = 1; k < sc.time.size(); ++k) {
    const double d = sc.time[k] - sc.time[k - 1];
    if (!(std::abs(d - dt) <= 1e-9 * std::max(1.0, std::abs(sc.time[k])))) {
      std::ostringstream msg;
      msg << "scenario time grid is not uniform at sample " << k << " (t=" << sc.time[k] << " s)";
      fail(ErrorKind::configuration, msg.str());
    }
  }
  return dt;
}

inline double initial_temperature_for(const NetworkDescription& net, const Scenario& sc) {
  if (net.initial_temperature) return *net.initial_temperature;
  return sc.ambient_temperature.empty() ? 20.0 : sc.ambient_temperature.front();
}

inline std::vector<StepRecord> run_scenario(const NetworkDescription& net, const Scenario& sc,
                                            SimulationOptions opt = {}, double dt_fallback = 1.0) {
  if (sc.feed_mode != net.feed_mode)
    fail(ErrorKind::configuration, "scenario feed column does not match the network feed mode");
  std::vector<StepRecord> out;
  if (sc.size() == 0) return out;
  const double dt = scenario_step(sc, dt_fallback);
  NetworkSimulator sim(net, initial_temperature_for(net, sc), std::move(opt));
  out.reserve(sc.size());
  for (std::size_t k = 0; k < sc.size(); ++k) out.push_back(sim.step(sc.sample(k), sc.time[k], dt));
  return out;
}

}  // namespace thermonet
