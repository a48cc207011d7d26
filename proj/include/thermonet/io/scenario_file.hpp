#pragma once

// Scenario files: comma-separated text with a header row.
//   time_s, h_up_bar | q_up_lpm, T_up_C, T_amb_C, u_v:<link id>..., u_d:<node id>...
// The time grid must be strictly increasing and equispaced; valve signals
// must lie in [0, 1].

#include "thermonet/error.hpp"
#include "thermonet/io/format.hpp"
#include "thermonet/simulation.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>

namespace thermonet::io {

inline Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>") {
  const CsvTable t = parse_csv(text, source);
  auto column = [&](const char* name) -> const std::vector<double>& {
    const auto i = t.find(name);
    if (i < 0) fail(ErrorKind::parse, source + ": missing column '" + name + "'");
    return t.columns[static_cast<std::size_t>(i)];
  };

  Scenario sc;
  sc.time = column("time_s");
  const bool head = t.find("h_up_bar") >= 0;
  const bool flow = t.find("q_up_lpm") >= 0;
  if (head == flow) fail(ErrorKind::parse, source + ": exactly one of the columns 'h_up_bar' and 'q_up_lpm' is required");
  sc.feed_mode = head ? FeedMode::head : FeedMode::flow;
  for (double x : column(head ? "h_up_bar" : "q_up_lpm")) sc.feed.push_back(head ? bar_to_pa(x) : lpm_to_m3s(x));
  sc.feed_temperature = column("T_up_C");
  sc.ambient_temperature = column("T_amb_C");

  for (std::size_t i = 0; i < t.header.size(); ++i) {
    const auto& name = t.header[i];
    if (name == "time_s" || name == "h_up_bar" || name == "q_up_lpm" || name == "T_up_C" || name == "T_amb_C") continue;
    const bool valve = name.rfind("u_v:", 0) == 0;
    const bool demand = name.rfind("u_d:", 0) == 0;
    if ((!valve && !demand) || name.size() == 4)
      fail(ErrorKind::parse, source + ": unrecognized column '" + name + "'");
    const auto& series = t.columns[i];
    for (std::size_t k = 0; k < series.size(); ++k)
      if (!(series[k] >= 0.0 && series[k] <= 1.0)) {
        std::ostringstream msg;
        msg << source << ": column '" << name << "' row " << k + 1 << ": control signal " << series[k]
            << " outside [0, 1]";
        fail(ErrorKind::parse, msg.str());
      }
    (valve ? sc.valves : sc.demands).emplace_back(name.substr(4), series);
  }

  for (std::size_t k = 1; k < sc.time.size(); ++k) {
    const double dt = sc.time[1] - sc.time[0];
    const double d = sc.time[k] - sc.time[k - 1];
    if (!(d > 0.0) || !(std::abs(d - dt) <= 1e-9 * std::max(1.0, std::abs(sc.time[k])))) {
      std::ostringstream msg;
      msg << source << ": time_s row " << k + 1 << " (" << sc.time[k]
          << " s) breaks the strictly increasing uniform time grid";
      fail(ErrorKind::parse, msg.str());
    }
  }
  return sc;
}

inline std::string serialize_scenario(const Scenario& sc) {
  CsvTable t;
  t.header.push_back("time_s");
  t.columns.push_back(sc.time);
  const bool head = sc.feed_mode == FeedMode::head;
  t.header.push_back(head ? "h_up_bar" : "q_up_lpm");
  std::vector<double> feed;
  for (double x : sc.feed) feed.push_back(head ? pa_to_bar(x) : m3s_to_lpm(x));
  t.columns.push_back(std::move(feed));
  t.header.push_back("T_up_C");
  t.columns.push_back(sc.feed_temperature);
  t.header.push_back("T_amb_C");
  t.columns.push_back(sc.ambient_temperature);
  for (const auto& [id, series] : sc.valves) {
    t.header.push_back("u_v:" + id);
    t.columns.push_back(series);
  }
  for (const auto& [id, series] : sc.demands) {
    t.header.push_back("u_d:" + id);
    t.columns.push_back(series);
  }
  for (const auto& c : t.columns)
    if (c.size() != sc.time.size()) fail(ErrorKind::dimension, "scenario columns have different lengths");
  return format_csv(t);
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_file(path), path.string());
}

}  // namespace thermonet::io
