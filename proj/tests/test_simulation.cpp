#include "thermonet/io/network_file.hpp"
#include "thermonet/simulation.hpp"
#include "support/bench_scenario.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <string>

using namespace thermonet;

namespace {

NetworkDescription load(const std::string& name) {
  return io::load_network(std::string(THERMONET_DATA_DIR) + "/" + name);
}

Scenario constant_scenario(std::size_t steps, double head_pa, double t_up, double t_amb) {
  Scenario sc;
  for (std::size_t k = 0; k < steps; ++k) {
    sc.time.push_back(static_cast<double>(k));
    sc.feed.push_back(head_pa);
    sc.feed_temperature.push_back(t_up);
    sc.ambient_temperature.push_back(t_amb);
  }
  return sc;
}

}  // namespace

TEST(Mixing, FlowWeightedAverageOfInflows) {
  HydraulicLink l;
  l.geometry = build_grid(10.0, 10, 0.02);
  l.valve.open_area = 3e-4;
  const auto t = build_topology({{"S", 1e4}, {"A", std::nullopt}, {"B", std::nullopt}, {"R", 0.0}},
                                {{"sa", "S", "A", l}, {"sb", "S", "B", l}, {"ar", "A", "R", l}, {"br", "B", "R", l}});
  Vector q(4);
  q << 1e-4, 3e-4, 1e-4, 3e-4;
  const std::vector<double> outlets{40.0, 60.0, 30.0, 50.0};
  const std::vector<double> previous{0.0, 1.0, 2.0, 3.0};
  const auto mixed = mix_node_temperatures(t, q, outlets, previous);
  EXPECT_DOUBLE_EQ(mixed[1], 40.0);
  EXPECT_DOUBLE_EQ(mixed[2], 60.0);
  EXPECT_DOUBLE_EQ(mixed[3], (1e-4 * 30.0 + 3e-4 * 50.0) / 4e-4);
  EXPECT_DOUBLE_EQ(mixed[0], 0.0);  // no inflow: previous value kept
  q << 1e-4, 0.0, 1e-4, 0.0;
  const auto stagnant = mix_node_temperatures(t, q, outlets, previous);
  EXPECT_DOUBLE_EQ(stagnant[2], 2.0);
  EXPECT_DOUBLE_EQ(stagnant[3], 30.0);
}

TEST(Simulation, SinglePipeMatchesDirectFomRun) {
  auto net = load("single_pipe.json");
  const auto sc = constant_scenario(300, io::bar_to_pa(0.3), 55.0, 20.0);
  SimulationOptions opt;
  opt.model_override["p"] = ThermalModelKind::fom;
  NetworkSimulator sim(net, 20.0, opt);
  const auto& link = net.links.front();
  FomStepper direct(assemble_fom(link.spec.hydraulic.geometry, link.thermal.params, SensorLayout{link.thermal.sensors}));
  Vector x = Vector::Constant(link.spec.hydraulic.geometry.grid_points, 20.0);
  for (std::size_t k = 0; k < sc.size(); ++k) {
    const auto rec = sim.step(sc.sample(k), sc.time[k], 1.0);
    x = direct.step(x, ThermalInputs{rec.velocities[0], 55.0, 20.0}, 1.0);
    ASSERT_EQ(rec.sensor_temperatures.size(), 1u);
    EXPECT_NEAR(rec.sensor_temperatures[0], x(sensor_index(link.spec.hydraulic.geometry, 10.0)), 1e-12);
    EXPECT_NEAR(rec.node_temperatures[1], x(x.size() - 1), 1e-12);
    EXPECT_DOUBLE_EQ(rec.velocities[0], rec.hydraulic.q(0) / link.spec.hydraulic.geometry.cross_section);
  }
}

TEST(Simulation, ReducedLinkTracksFullOrderLink) {
  auto net = load("single_pipe.json");
  const auto sc = constant_scenario(900, io::bar_to_pa(0.3), 55.0, 20.0);
  SimulationOptions fom_opt;
  fom_opt.model_override["p"] = ThermalModelKind::fom;
  SimulationOptions rom_opt;
  rom_opt.model_override["p"] = ThermalModelKind::rom;
  const auto a = run_scenario(net, sc, fom_opt);
  const auto b = run_scenario(net, sc, rom_opt);
  double err = 0.0, mag = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    err += std::abs(a[k].node_temperatures[1] - b[k].node_temperatures[1]);
    mag += std::abs(a[k].node_temperatures[1]);
  }
  EXPECT_LT(100.0 * err / mag, 2.0);
}

TEST(Simulation, IdentityOrderRomReproducesFom) {
  auto net = load("single_pipe.json");
  auto& thermal = net.links.front().thermal;
  thermal.order = net.links.front().spec.hydraulic.geometry.grid_points;
  thermal.method = ReductionMethod::h2;
  const auto sc = constant_scenario(200, io::bar_to_pa(0.3), 55.0, 20.0);
  SimulationOptions fom_opt;
  fom_opt.model_override["p"] = ThermalModelKind::fom;
  SimulationOptions rom_opt;
  rom_opt.model_override["p"] = ThermalModelKind::rom;
  const auto a = run_scenario(net, sc, fom_opt);
  const auto b = run_scenario(net, sc, rom_opt);
  for (std::size_t k = 0; k < a.size(); ++k)
    EXPECT_NEAR(a[k].node_temperatures[1], b[k].node_temperatures[1], 1e-9);
}

namespace {

/// Worst violation (degC, positive = outside) of the input-history bounds over a run.
double worst_bound_violation(const NetworkDescription& net, const Scenario& sc, const SimulationOptions& opt) {
  NetworkSimulator sim(net, initial_temperature_for(net, sc), opt);
  double lo = initial_temperature_for(net, sc), hi = lo, worst = -1e300;
  for (std::size_t k = 0; k < sc.size(); ++k) {
    lo = std::min({lo, sc.feed_temperature[k], sc.ambient_temperature[k]});
    hi = std::max({hi, sc.feed_temperature[k], sc.ambient_temperature[k]});
    const auto rec = sim.step(sc.sample(k), sc.time[k], 1.0);
    for (double t : rec.node_temperatures) worst = std::max({worst, lo - t, t - hi});
    EXPECT_LE(rec.hydraulic.energy_residual, 1e-9);
    EXPECT_LE(rec.hydraulic.mass_residual, 1e-9);
  }
  return worst;
}

}  // namespace

TEST(Simulation, ThreePathFullOrderStaysWithinInputBounds) {
  const auto net = load("three_path.json");
  const auto sc = thermonet::testing::bench_scenario(1.5, 0.5);
  SimulationOptions opt;
  for (const auto& l : net.links) opt.model_override[l.spec.id] = ThermalModelKind::fom;
  EXPECT_LE(worst_bound_violation(net, sc, opt), 1e-6);
  NetworkSimulator sim(net, 20.0, opt);
  EXPECT_EQ(sim.sensor_names().size(), 6u);
  EXPECT_EQ(sim.sensor_names().front(), "up1@5");
}

TEST(Simulation, ThreePathReducedOvershootIsSmall) {
  // Reduced links are not positivity preserving: a sharp front entering a
  // freshly opened branch produces a small undershoot at the outlet.
  const auto net = load("three_path.json");
  const auto sc = thermonet::testing::bench_scenario(1.5, 0.5);
  const double worst = worst_bound_violation(net, sc, SimulationOptions{});
  RecordProperty("rom_bound_violation_degC", std::to_string(worst));
  EXPECT_LE(worst, 0.5);
}

TEST(Simulation, ClosedValvesKeepBranchesStagnant) {
  const auto net = load("three_path.json");
  auto sc = thermonet::testing::bench_scenario(0.25, 1.0);
  NetworkSimulator sim(net, 20.0);
  StepRecord rec;
  for (std::size_t k = 0; k < sc.size(); ++k) rec = sim.step(sc.sample(k), sc.time[k], 1.0);
  // With all control valves shut the branch flows stay at the leakage level,
  // below the stagnation threshold, so the branch pipes see v = 0 and the
  // branch midpoints keep their initial temperature.
  const auto& topo = sim.topology();
  for (const auto& l : net.links)
    if (l.spec.id.starts_with("up") || l.spec.id.starts_with("down"))
      EXPECT_EQ(rec.velocities[static_cast<std::size_t>(topo.link_index.at(l.spec.id))], 0.0) << l.spec.id;
  for (const char* m : {"M1", "M2", "M3"})
    EXPECT_NEAR(rec.node_temperatures[static_cast<std::size_t>(topo.node_index.at(m))], 20.0, 1e-6) << m;
}

TEST(Simulation, RunsAreDeterministic) {
  const auto net = load("parallel_pair.json");
  const auto sc = constant_scenario(120, io::bar_to_pa(0.3), 50.0, 18.0);
  const auto a = run_scenario(net, sc);
  const auto b = run_scenario(net, sc);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].node_temperatures, b[k].node_temperatures);
    EXPECT_EQ(a[k].sensor_temperatures, b[k].sensor_temperatures);
  }
}

TEST(Simulation, RejectsInconsistentInputs) {
  const auto net = load("parallel_pair.json");
  auto sc = constant_scenario(3, io::bar_to_pa(0.3), 50.0, 18.0);
  sc.valves.emplace_back("nope", std::vector<double>(3, 1.0));
  EXPECT_THROW(run_scenario(net, sc), Error);

  auto flow = constant_scenario(3, 1e-4, 50.0, 18.0);
  flow.feed_mode = FeedMode::flow;
  EXPECT_THROW(run_scenario(net, flow), Error);

  SimulationOptions opt;
  opt.model_override["missing"] = ThermalModelKind::fom;
  EXPECT_THROW(NetworkSimulator(net, 20.0, opt), Error);

  // A reversed head difference drives flow against the upwind direction.
  auto reversed = constant_scenario(2, io::bar_to_pa(-0.3), 50.0, 18.0);
  try {
    run_scenario(net, reversed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("flow reversal"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("t=0"), std::string::npos);
  }
}

TEST(Simulation, ValveSignalsAreClampedWithWarning) {
  const auto net = load("parallel_pair.json");
  NetworkSimulator sim(net, 20.0);
  StepInputs in;
  in.feed = io::bar_to_pa(0.3);
  in.feed_temperature = 40.0;
  in.ambient_temperature = 20.0;
  in.valves = {{"a", 1.5}};
  sim.step(in, 0.0, 1.0);
  ASSERT_EQ(sim.warnings().size(), 1u);
  EXPECT_NE(sim.warnings().front().find("u_v:a"), std::string::npos);
}
