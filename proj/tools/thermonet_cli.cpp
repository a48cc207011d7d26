// Command-line front end: build-fom, reduce, simulate, hydraulics, compare, fit.
//
// Exit codes: 0 success, 1 unexpected failure, 2 usage error, 3 input error
// (parse or configuration), 4 numerical failure (non-convergence, unstable
// reduction, failed fit).

#include "thermonet/fit.hpp"
#include "thermonet/io/network_file.hpp"
#include "thermonet/io/results_file.hpp"
#include "thermonet/io/rom_file.hpp"
#include "thermonet/io/scenario_file.hpp"
#include "thermonet/mor.hpp"
#include "thermonet/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace thermonet;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string network, scenario, out, link, model, method, rom, bounds;
  std::vector<std::string> files;
  std::optional<double> dt;
  double tol = GgaOptions{}.tol;
  int max_iter = GgaOptions{}.max_iter;
  std::optional<Index> order;
  std::optional<unsigned> seed;
  std::size_t row = 0;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void emit(const Options& o, const std::string& content) {
  if (o.out.empty())
    std::cout << content;
  else
    io::write_atomic(o.out, content);
}

const NetworkLink& find_link(const NetworkDescription& net, const std::string& id) {
  if (id.empty()) throw UsageError("--link is required");
  for (const auto& l : net.links)
    if (l.spec.id == id) return l;
  fail(ErrorKind::configuration, "network has no link '" + id + "'");
}

ThermalModelKind parse_model(const std::string& s) {
  if (s == "fom") return ThermalModelKind::fom;
  if (s == "rom") return ThermalModelKind::rom;
  throw UsageError("--model must be 'fom' or 'rom'");
}

GgaOptions gga_options(const Options& o) {
  if (!(o.tol > 0.0)) throw UsageError("--tol must be positive");
  if (o.max_iter < 1) throw UsageError("--max-iter must be at least 1");
  GgaOptions g;
  g.tol = o.tol;
  g.max_iter = o.max_iter;
  return g;
}

ReducedModel reduce_link(const NetworkLink& l, const Options& o, ProjectionBasis* basis_out = nullptr) {
  const auto& geom = l.spec.hydraulic.geometry;
  const auto fom = assemble_fom(geom, l.thermal.params, SensorLayout{l.thermal.sensors});
  const auto factors = decouple_parameters(geom);
  const Index r = o.order.value_or(l.thermal.order);
  ReductionMethod method = l.thermal.method;
  if (o.method == "moment") method = ReductionMethod::moment;
  else if (o.method == "h2") method = ReductionMethod::h2;
  else if (!o.method.empty()) throw UsageError("--method must be 'moment' or 'h2'");
  ProjectionBasis basis;
  if (method == ReductionMethod::moment) {
    MomentOptions mo;
    mo.reference_velocity = l.thermal.reference_velocity;
    basis = moment_reduce(factors, l.thermal.params, fom, r, mo);
  } else {
    H2Options ho;
    ho.expansion_velocity = l.thermal.reference_velocity;
    basis = h2_reduce(factors, l.thermal.params, fom, r, ho);
  }
  if (basis_out) *basis_out = basis;
  return project(factors, fom, basis);
}

nlohmann::ordered_json triplets(const SparseMatrix& m) {
  nlohmann::ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["entries"] = nlohmann::ordered_json::array();
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) j["entries"].push_back({it.row(), it.col(), it.value()});
  return j;
}

int cmd_build_fom(const Options& o) {
  const auto net = io::load_network(o.network);
  const auto& l = find_link(net, o.link);
  const auto fom = assemble_fom(l.spec.hydraulic.geometry, l.thermal.params, SensorLayout{l.thermal.sensors});
  Index nnz = fom.A.nonZeros() + fom.B.nonZeros() + fom.C.nonZeros();
  for (const auto& q : fom.Q) nnz += q.nonZeros();
  nlohmann::ordered_json j;
  j["link"] = l.spec.id;
  j["N"] = fom.state_dim();
  j["outputs"] = fom.output_dim();
  j["segment_length_m"] = fom.geometry.segment_length;
  j["nonzeros"] = nnz;
  j["A"] = triplets(fom.A);
  for (std::size_t i = 0; i < fom.Q.size(); ++i) j["Q" + std::to_string(i + 1)] = triplets(fom.Q[i]);
  j["B"] = triplets(fom.B);
  j["C"] = triplets(fom.C);
  if (!o.out.empty()) io::write_atomic(o.out, j.dump() + "\n");
  std::cout << "link " << l.spec.id << ": N=" << fom.state_dim() << " outputs=" << fom.output_dim()
            << " nonzeros=" << nnz << " (A " << fom.A.nonZeros() << ", Q1 " << fom.Q[0].nonZeros() << ", B "
            << fom.B.nonZeros() << ", C " << fom.C.nonZeros() << ")\n";
  return 0;
}

int cmd_reduce(const Options& o) {
  if (o.out.empty()) throw UsageError("reduce needs --out");
  const auto net = io::load_network(o.network);
  const auto& l = find_link(net, o.link);
  const auto t0 = Clock::now();
  ProjectionBasis basis;
  const auto rom = reduce_link(l, o, &basis);
  const double elapsed = seconds_since(t0);
  io::write_atomic(o.out, io::serialize_rom(rom));
  std::cout << "link " << l.spec.id << ": N=" << rom.full_dim << " r=" << rom.order
            << " converged=" << (rom.info.converged ? "yes" : "no") << " iterations=" << rom.info.iterations
            << " final_change=" << rom.info.final_change << " condition=" << rom.info.condition
            << " reduction_s=" << elapsed << "\n";
  return 0;
}

/// Runs the scenario on the network, holding each sample for its full period
/// and sub-stepping at --dt when that is finer than the sample spacing.
struct RunOutput {
  std::vector<StepRecord> records;
  std::vector<std::string> warnings;
  std::vector<std::string> sensor_names;
  io::CsvTable table;
  double wall_seconds = 0.0;
};

SimulationOptions simulation_options(const Options& o, const NetworkDescription& net) {
  SimulationOptions opt;
  opt.gga = gga_options(o);
  if (!o.model.empty()) {
    const auto kind = parse_model(o.model);
    if (!o.link.empty()) {
      find_link(net, o.link);
      opt.model_override[o.link] = kind;
    } else {
      for (const auto& l : net.links) opt.model_override[l.spec.id] = kind;
    }
  }
  if (!o.rom.empty()) {
    if (o.link.empty()) throw UsageError("--rom needs --link");
    if (o.model == "fom") throw UsageError("--rom cannot be combined with --model fom");
    opt.roms[o.link] = io::load_rom(o.rom);
    opt.model_override[o.link] = ThermalModelKind::rom;
  }
  return opt;
}

RunOutput run(const Options& o, const NetworkDescription& net, const Scenario& sc) {
  if (sc.feed_mode != net.feed_mode)
    fail(ErrorKind::configuration, o.scenario + ": feed column does not match the network feed mode");
  if (sc.size() == 0) fail(ErrorKind::parse, o.scenario + ": scenario has no samples");
  const double period = scenario_step(sc, o.dt.value_or(1.0));
  int substeps = 1;
  if (o.dt) {
    if (!(*o.dt > 0.0)) throw UsageError("--dt must be positive");
    substeps = static_cast<int>(std::llround(period / *o.dt));
    if (substeps < 1 || std::abs(substeps * *o.dt - period) > 1e-9 * period)
      throw UsageError("--dt must divide the scenario sample spacing");
  }
  const double dt = period / substeps;
  RunOutput out;
  NetworkSimulator sim(net, initial_temperature_for(net, sc), simulation_options(o, net));
  const auto t0 = Clock::now();
  for (std::size_t k = 0; k < sc.size(); ++k) {
    const auto in = sc.sample(k);
    StepRecord rec;
    double gga = 0.0, thermal = 0.0;
    for (int s = 0; s < substeps; ++s) {
      rec = sim.step(in, sc.time[k] + s * dt, dt);
      gga += rec.gga_seconds;
      thermal += rec.thermal_seconds;
    }
    rec.gga_seconds = gga / substeps;
    rec.thermal_seconds = thermal / substeps;
    out.records.push_back(std::move(rec));
  }
  out.wall_seconds = seconds_since(t0);
  out.warnings = sim.warnings();
  out.sensor_names = sim.sensor_names();
  out.table = io::results_table(sim, out.records);
  return out;
}

int cmd_simulate(const Options& o) {
  if (o.out.empty()) throw UsageError("simulate needs --out");
  const auto net = io::load_network(o.network);
  const auto sc = io::load_scenario(o.scenario);
  const auto r = run(o, net, sc);
  io::write_atomic(o.out, io::format_csv(r.table));
  nlohmann::ordered_json extra;
  extra["wall_seconds"] = r.wall_seconds;
  extra["model"] = o.model.empty() ? "network" : o.model;
  if (o.seed) extra["seed"] = *o.seed;
  io::write_atomic(o.out + ".meta.json", io::results_metadata(io::summarize_timings(r.records), r.warnings, extra));
  for (const auto& w : r.warnings) std::cerr << "thermonet: warning: " << w << "\n";
  const auto s = io::summarize_timings(r.records);
  std::cout << "steps=" << s.steps << " mean_gga_ms=" << 1e3 * s.mean_gga_seconds
            << " mean_thermal_ms=" << 1e3 * s.mean_thermal_seconds << " mean_gga_iterations=" << s.mean_gga_iterations
            << "\n";
  return 0;
}

int cmd_hydraulics(const Options& o) {
  const auto net = io::load_network(o.network);
  SimulationOptions opt;
  opt.gga = gga_options(o);
  // Hydraulics only: no reduction is needed for the thermal models.
  for (const auto& l : net.links) opt.model_override[l.spec.id] = ThermalModelKind::fom;
  NetworkSimulator sim(net, net.initial_temperature.value_or(20.0), opt);
  StepInputs in;
  if (!o.scenario.empty()) {
    const auto sc = io::load_scenario(o.scenario);
    if (o.row >= sc.size())
      throw UsageError("--row " + std::to_string(o.row) + " is beyond the " + std::to_string(sc.size()) +
                       " scenario samples");
    in = sc.sample(o.row);
  } else {
    if (net.feed_mode != FeedMode::head)
      fail(ErrorKind::configuration, o.network + ": a flow-fed network needs --scenario for the supply");
    for (const auto& n : net.nodes)
      if (n.id == net.feed_node) in.feed = n.known_head.value_or(0.0);
  }
  const auto t0 = Clock::now();
  const auto s = sim.solve_hydraulics(in, nullptr);
  const double elapsed = seconds_since(t0);
  const auto& topo = sim.topology();
  std::ostringstream text;
  for (std::size_t k = 0; k < topo.links.size(); ++k)
    text << "q:" << topo.links[k].id << "_lpm=" << io::format_number(io::m3s_to_lpm(s.q(static_cast<Index>(k))))
         << "\n";
  for (std::size_t c = 0; c < topo.unknown.size(); ++c)
    text << "h:" << topo.nodes[static_cast<std::size_t>(topo.unknown[c])].id
         << "_bar=" << io::format_number(io::pa_to_bar(s.h(static_cast<Index>(c)))) << "\n";
  for (Index c = 0; c < s.qn.size(); ++c)
    if (s.qn(c) != 0.0)
      text << "qn:" << topo.nodes[static_cast<std::size_t>(topo.unknown[static_cast<std::size_t>(c)])].id
           << "_lpm=" << io::format_number(io::m3s_to_lpm(s.qn(c))) << "\n";
  text << "iterations=" << s.iterations << "\n";
  text << "energy_residual_Pa=" << io::format_number(s.energy_residual) << "\n";
  text << "mass_residual_m3s=" << io::format_number(s.mass_residual) << "\n";
  emit(o, text.str());
  std::cerr << "thermonet: gga_ms=" << 1e3 * elapsed << "\n";
  return 0;
}

int cmd_compare(const Options& o) {
  if (o.files.size() != 2) throw UsageError("compare needs exactly two files: <reference> <predicted>");
  const auto a = io::load_results(o.files[0]);
  const auto b = io::load_results(o.files[1]);
  const auto metrics = io::compare_tables(a, b);
  if (metrics.empty()) fail(ErrorKind::configuration, "the two files share no data columns");
  std::ostringstream csv;
  csv << "column,max_abs_error,mean_relative_error_percent,range_normalized\n";
  double worst_mre = 0.0, worst_abs = 0.0;
  double worst_t_mre = 0.0;
  for (const auto& [name, m] : metrics) {
    csv << name << "," << io::format_number(m.max_abs_error) << "," << io::format_number(m.mean_relative_error) << ","
        << (m.range_normalized ? 1 : 0) << "\n";
    worst_mre = std::max(worst_mre, m.mean_relative_error);
    worst_abs = std::max(worst_abs, m.max_abs_error);
    if (name.rfind("T:", 0) == 0) worst_t_mre = std::max(worst_t_mre, m.mean_relative_error);
  }
  if (!o.out.empty()) io::write_atomic(o.out, csv.str());
  else std::cout << csv.str();
  std::cout << "columns=" << metrics.size() << " max_abs_error=" << io::format_number(worst_abs)
            << " max_mre_percent=" << io::format_number(worst_mre)
            << " max_temperature_mre_percent=" << io::format_number(worst_t_mre) << "\n";
  return 0;
}

std::pair<ThermalParameters, ThermalParameters> fit_bounds(const Options& o, const ThermalParameters& p) {
  if (o.bounds.empty()) {
    auto range = [](double x, double fallback_hi) {
      return x > 0.0 ? std::pair{0.1 * x, 10.0 * x} : std::pair{0.0, fallback_hi};
    };
    const auto [l0, l1] = range(p.lambda, 1e-2);
    const auto [d0, d1] = range(p.diffusion, 1e-1);
    return {{l0, d0}, {l1, d1}};
  }
  std::vector<double> v;
  std::stringstream ss(o.bounds);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(io::parse_number(item, "--bounds"));
  if (v.size() != 4) throw UsageError("--bounds expects lambda_min,lambda_max,D_min,D_max");
  return {{v[0], v[2]}, {v[1], v[3]}};
}

int cmd_fit(const Options& o) {
  if (o.files.size() != 1) throw UsageError("fit needs one measurement file");
  const auto net = io::load_network(o.network);
  const auto& link = find_link(net, o.link);
  const auto sc = io::load_scenario(o.scenario);
  const auto measured = io::load_results(o.files[0]);

  // Replay the network to obtain the link's velocity and inlet temperature.
  SimulationOptions opt = simulation_options(o, net);
  NetworkSimulator sim(net, initial_temperature_for(net, sc), opt);
  const auto& topo = sim.topology();
  const auto li = static_cast<std::size_t>(topo.link_index.at(link.spec.id));
  const auto from = static_cast<std::size_t>(topo.from[li]);
  const auto feed = static_cast<std::size_t>(topo.node_index.at(net.feed_node));
  const double dt = scenario_step(sc, o.dt.value_or(1.0));
  PipeScenario ps;
  ps.dt = dt;
  ps.initial_temperature = initial_temperature_for(net, sc);
  for (std::size_t k = 0; k < sc.size(); ++k) {
    const double inlet = from == feed ? sc.feed_temperature[k] : sim.node_temperatures()[from];
    const auto rec = sim.step(sc.sample(k), sc.time[k], dt);
    ps.inputs.push_back({rec.velocities[li], inlet, sc.ambient_temperature[k]});
  }

  // Measurements: the link's sensor columns, then its outlet node.
  std::vector<std::string> columns;
  for (const auto& s : sim.sensor_names())
    if (s.rfind(link.spec.id + "@", 0) == 0) columns.push_back("T:" + s + "_C");
  columns.push_back("T:" + link.spec.to + "_C");
  if (measured.rows() != sc.size())
    fail(ErrorKind::configuration, o.files[0] + ": " + std::to_string(measured.rows()) + " rows but the scenario has " +
                                       std::to_string(sc.size()) + " samples");
  Matrix y(static_cast<Index>(sc.size()), static_cast<Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto i = measured.find(columns[c]);
    if (i < 0) fail(ErrorKind::parse, o.files[0] + ": missing column '" + columns[c] + "'");
    for (std::size_t k = 0; k < sc.size(); ++k)
      y(static_cast<Index>(k), static_cast<Index>(c)) = measured.columns[static_cast<std::size_t>(i)][k];
  }

  const auto rom = reduce_link(link, o);
  const auto [lo, hi] = fit_bounds(o, link.thermal.params);
  FitOptions fo;
  fo.initial = link.thermal.params;
  if (fo.initial->lambda < lo.lambda || fo.initial->lambda > hi.lambda || fo.initial->diffusion < lo.diffusion ||
      fo.initial->diffusion > hi.diffusion)
    fo.initial.reset();
  const auto t0 = Clock::now();
  const auto r = fit_parameters(rom, ps, y, FitBounds{lo, hi}, fo);
  const double elapsed = seconds_since(t0);

  nlohmann::ordered_json j;
  j["link"] = link.spec.id;
  j["lambda_per_s"] = r.params.lambda;
  j["D_m2_s"] = r.params.diffusion;
  j["objective_K2"] = r.objective;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["on_boundary"] = r.on_boundary;
  j["rejected_trials"] = r.rejected_trials;
  j["warnings"] = r.warnings;
  j["fit_seconds"] = elapsed;
  emit(o, j.dump(2) + "\n");
  for (const auto& w : r.warnings) std::cerr << "thermonet: warning: " << w << "\n";
  return 0;
}

int exit_code_for(const Error& e) {
  if (e.is_numerical()) return kExitNumerical;
  return kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal-hydraulic water network simulator"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("--network", o.network, "Network description (JSON)")->required();
    c->add_option("--out", o.out, "Output file (written atomically)");
    c->add_option("--tol", o.tol, "GGA residual tolerance");
    c->add_option("--max-iter", o.max_iter, "GGA iteration limit");
    c->add_option("--seed", o.seed, "Seed recorded in the run metadata");
  };

  auto* build = app.add_subcommand("build-fom", "Assemble one link's full-order model and dump its matrices");
  common(build);
  build->add_option("--link", o.link, "Link id")->required();

  auto* reduce = app.add_subcommand("reduce", "Reduce one link and save the reduced model");
  common(reduce);
  reduce->add_option("--link", o.link, "Link id")->required();
  reduce->add_option("--order", o.order, "Reduced order r");
  reduce->add_option("--method", o.method, "Reduction method (moment|h2); default from the network");

  auto* simulate = app.add_subcommand("simulate", "Run a scenario and write a results file");
  common(simulate);
  simulate->add_option("--scenario", o.scenario, "Scenario (CSV)")->required();
  simulate->add_option("--dt", o.dt, "Integration step (must divide the sample spacing)");
  simulate->add_option("--model", o.model, "Thermal model for --link, or for all links (fom|rom)");
  simulate->add_option("--link", o.link, "Link the --model / --rom choice applies to");
  simulate->add_option("--rom", o.rom, "Reduced model file for --link");

  auto* hydraulics = app.add_subcommand("hydraulics", "Solve the network hydraulics for one set of controls");
  common(hydraulics);
  hydraulics->add_option("--scenario", o.scenario, "Scenario providing the controls");
  hydraulics->add_option("--row", o.row, "Scenario sample to use (default 0)");

  auto* compare = app.add_subcommand("compare", "Error metrics between two results files");
  compare->add_option("files", o.files, "<reference> <predicted>")->required();
  compare->add_option("--out", o.out, "Per-column metrics (CSV)");

  auto* fit = app.add_subcommand("fit", "Fit (lambda, D) of one link to measured temperatures");
  common(fit);
  fit->add_option("measurements", o.files, "Results-format file with the link's sensor and outlet columns")
      ->required()
      ;
  fit->add_option("--link", o.link, "Link id")->required();
  fit->add_option("--scenario", o.scenario, "Scenario (CSV)")->required();
  fit->add_option("--order", o.order, "Reduced order r");
  fit->add_option("--method", o.method, "Reduction method (moment|h2)");
  fit->add_option("--model", o.model, "Thermal model for the other links (fom|rom)");
  fit->add_option("--bounds", o.bounds, "lambda_min,lambda_max,D_min,D_max");
  fit->add_option("--dt", o.dt, "Step for single-sample scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*build) return cmd_build_fom(o);
    if (*reduce) return cmd_reduce(o);
    if (*simulate) return cmd_simulate(o);
    if (*hydraulics) return cmd_hydraulics(o);
    if (*compare) return cmd_compare(o);
    if (*fit) return cmd_fit(o);
  } catch (const UsageError& e) {
    std::cerr << "thermonet: usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "thermonet: " << (e.is_numerical() ? "numerical error: " : "error: ") << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "thermonet: unexpected failure: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
