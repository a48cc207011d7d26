#pragma once

// Results files and error metrics.
//
// Results CSV columns (one row per step, deterministic header order):
//   time_s, q:<link>_lpm..., h:<unknown node>_bar..., T:<link>@<z>_C (sensors)...,
//   T:<node>_C..., gga_iterations, energy_residual_Pa, mass_residual_m3s
// Wall-clock timings go to a JSON sidecar (<results>.meta.json) so the CSV
// itself is byte-identical across runs.

#include "thermonet/error.hpp"
#include "thermonet/io/format.hpp"
#include "thermonet/simulation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace thermonet::io {

inline CsvTable results_table(const NetworkSimulator& sim, const std::vector<StepRecord>& records) {
  const auto& topo = sim.topology();
  CsvTable t;
  auto add = [&](std::string name) {
    t.header.push_back(std::move(name));
    t.columns.emplace_back();
    t.columns.back().reserve(records.size());
  };
  add("time_s");
  for (const auto& l : topo.links) add("q:" + l.id + "_lpm");
  for (Index n : topo.unknown) add("h:" + topo.nodes[static_cast<std::size_t>(n)].id + "_bar");
  for (const auto& s : sim.sensor_names()) add("T:" + s + "_C");
  for (const auto& n : topo.nodes) add("T:" + n.id + "_C");
  add("gga_iterations");
  add("energy_residual_Pa");
  add("mass_residual_m3s");

  for (const auto& rec : records) {
    std::size_t c = 0;
    t.columns[c++].push_back(rec.time);
    for (Index k = 0; k < rec.hydraulic.q.size(); ++k) t.columns[c++].push_back(m3s_to_lpm(rec.hydraulic.q(k)));
    for (Index k = 0; k < rec.hydraulic.h.size(); ++k) t.columns[c++].push_back(pa_to_bar(rec.hydraulic.h(k)));
    for (double x : rec.sensor_temperatures) t.columns[c++].push_back(x);
    for (double x : rec.node_temperatures) t.columns[c++].push_back(x);
    t.columns[c++].push_back(rec.hydraulic.iterations);
    t.columns[c++].push_back(rec.hydraulic.energy_residual);
    t.columns[c++].push_back(rec.hydraulic.mass_residual);
  }
  return t;
}

struct TimingSummary {
  std::size_t steps = 0;
  double mean_gga_seconds = 0.0;
  double max_gga_seconds = 0.0;
  double mean_thermal_seconds = 0.0;
  double mean_gga_iterations = 0.0;
};

inline TimingSummary summarize_timings(const std::vector<StepRecord>& records) {
  TimingSummary s;
  s.steps = records.size();
  for (const auto& r : records) {
    s.mean_gga_seconds += r.gga_seconds;
    s.max_gga_seconds = std::max(s.max_gga_seconds, r.gga_seconds);
    s.mean_thermal_seconds += r.thermal_seconds;
    s.mean_gga_iterations += r.hydraulic.iterations;
  }
  if (s.steps) {
    const double n = static_cast<double>(s.steps);
    s.mean_gga_seconds /= n;
    s.mean_thermal_seconds /= n;
    s.mean_gga_iterations /= n;
  }
  return s;
}

inline std::string results_metadata(const TimingSummary& s, const std::vector<std::string>& warnings,
                                    const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json j;
  j["steps"] = s.steps;
  j["mean_gga_step_ms"] = 1e3 * s.mean_gga_seconds;
  j["max_gga_step_ms"] = 1e3 * s.max_gga_seconds;
  j["mean_thermal_step_ms"] = 1e3 * s.mean_thermal_seconds;
  j["mean_gga_iterations"] = s.mean_gga_iterations;
  j["warnings"] = warnings;
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j.dump(2) + "\n";
}

inline CsvTable load_results(const std::filesystem::path& path) { return parse_csv(read_file(path), path.string()); }

struct ErrorMetrics {
  double max_abs_error = 0.0;
  double mean_relative_error = 0.0;  // percent
  bool range_normalized = false;     // fallback normalization was used
};

/// MRE = 100 * mean|y - yhat| / mean|y|. When the reference changes sign or
/// mean|y| < 1e-9 the mean error is normalized by the reference range instead
/// (and reported as such); a constant zero reference yields the raw mean error.
inline ErrorMetrics compute_metrics(const std::vector<double>& reference, const std::vector<double>& predicted) {
  if (reference.size() != predicted.size()) {
    fail(ErrorKind::dimension, "metric series lengths differ (" + std::to_string(reference.size()) + " vs " +
                                   std::to_string(predicted.size()) + ")");
  }
  ErrorMetrics m;
  if (reference.empty()) return m;
  double err = 0.0, mag = 0.0, lo = reference.front(), hi = reference.front();
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double e = std::abs(reference[i] - predicted[i]);
    m.max_abs_error = std::max(m.max_abs_error, e);
    err += e;
    mag += std::abs(reference[i]);
    lo = std::min(lo, reference[i]);
    hi = std::max(hi, reference[i]);
    pos = pos || reference[i] > 0.0;
    neg = neg || reference[i] < 0.0;
  }
  const double n = static_cast<double>(reference.size());
  err /= n;
  mag /= n;
  if ((pos && neg) || mag < 1e-9) {
    m.range_normalized = true;
    const double range = hi - lo;
    m.mean_relative_error = 100.0 * (range > 0.0 ? err / range : err);
  } else {
    m.mean_relative_error = 100.0 * err / mag;
  }
  return m;
}

/// Per-column metrics for every column shared by two tables (time excluded).
inline std::vector<std::pair<std::string, ErrorMetrics>> compare_tables(const CsvTable& reference,
                                                                         const CsvTable& predicted) {
  if (reference.rows() != predicted.rows())
    fail(ErrorKind::dimension, "tables have different row counts (" + std::to_string(reference.rows()) + " vs " +
                                   std::to_string(predicted.rows()) + ")");
  std::vector<std::pair<std::string, ErrorMetrics>> out;
  for (std::size_t i = 0; i < reference.header.size(); ++i) {
    const auto& name = reference.header[i];
    if (name == "time_s") continue;
    const auto j = predicted.find(name);
    if (j < 0) continue;
    out.emplace_back(name, compute_metrics(reference.columns[i], predicted.columns[static_cast<std::size_t>(j)]));
  }
  return out;
}

}  // namespace thermonet::io
