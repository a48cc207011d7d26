#pragma once

// Network description file (JSON). Heads are given in bar, lengths and
// diameters in m, areas in m^2; everything is converted to SI at the boundary.
//
// {
//   "format": "thermonet-network", "version": 1,
//   "fluid": {"density_kg_m3": 998.2, "kinematic_viscosity_m2_s": 1e-6},
//   "feed": {"node": "S", "mode": "head" | "flow"},
//   "initial_temperature_C": 20,                      (optional)
//   "nodes": [{"id": "S", "head_bar": 0.5}, {"id": "J1"}, ...],
//   "links": [{"id": "p1", "from": "S", "to": "J1",
//              "length_m": 5, "diameter_m": 0.02, "area_m2": ... (optional),
//              "roughness_m": 1.5e-6, "k_min": 1.0,
//              "valve": {"c_d": 0.6, "a_open_m2": 3e-4, "a_closed_m2": 1e-9, "opening": 1},
//              "thermal": {"lambda_per_s": 5e-4, "D_m2_s": 5e-3, "grid_points": 50,
//                          "sensors_m": [2.5], "model": "rom" | "fom", "order": 7,
//                          "reduction": "moment" | "h2", "reference_velocity_m_s": 0.1}}],
//   "demands": [{"node": "M1", "c_de": 0.6,
//                "valve": {"a_open_m2": 2e-5, "a_closed_m2": 1e-9, "opening": 0}}]
// }

#include "thermonet/error.hpp"
#include "thermonet/io/format.hpp"
#include "thermonet/simulation.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace thermonet::io {

using Json = nlohmann::ordered_json;

namespace detail {

class JsonReader {
 public:
  explicit JsonReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void error(const std::string& path, const std::string& what) const {
    fail(ErrorKind::parse, source_ + ": " + path + ": " + what);
  }

  const Json& member(const Json& obj, const std::string& path, const char* key) const {
    if (!obj.is_object()) error(path, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) error(path, std::string("missing field '") + key + "'");
    return *it;
  }

  double number(const Json& obj, const std::string& path, const char* key) const {
    const auto& v = member(obj, path, key);
    if (!v.is_number()) error(path + "." + key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) error(path + "." + key, "expected a finite number");
    return x;
  }

  double number_or(const Json& obj, const std::string& path, const char* key, double fallback) const {
    return obj.contains(key) ? number(obj, path, key) : fallback;
  }

  std::string string(const Json& obj, const std::string& path, const char* key) const {
    const auto& v = member(obj, path, key);
    if (!v.is_string()) error(path + "." + key, "expected a string");
    return v.get<std::string>();
  }

  std::string string_or(const Json& obj, const std::string& path, const char* key, const std::string& fallback) const {
    return obj.contains(key) ? string(obj, path, key) : fallback;
  }

  const Json& array(const Json& obj, const std::string& path, const char* key) const {
    const auto& v = member(obj, path, key);
    if (!v.is_array()) error(path + "." + key, "expected an array");
    return v;
  }

  Index count(const Json& obj, const std::string& path, const char* key) const {
    const auto& v = member(obj, path, key);
    if (!v.is_number_integer()) error(path + "." + key, "expected an integer");
    return v.get<Index>();
  }

 private:
  std::string source_;
};

inline Valve read_valve(const JsonReader& r, const Json& obj, const std::string& path, bool with_cd) {
  Valve v;
  if (with_cd) v.discharge_coefficient = r.number(obj, path, "c_d");
  v.open_area = r.number(obj, path, "a_open_m2");
  v.closed_area = r.number_or(obj, path, "a_closed_m2", kDefaultClosedArea);
  v.opening = r.number_or(obj, path, "opening", 1.0);
  if (!(v.opening >= 0.0 && v.opening <= 1.0)) r.error(path + ".opening", "must lie in [0, 1]");
  if (!(v.closed_area > 0.0) || !(v.open_area >= v.closed_area))
    r.error(path, "valve areas must satisfy 0 < a_closed_m2 <= a_open_m2");
  if (with_cd && !(v.discharge_coefficient > 0.0)) r.error(path + ".c_d", "must be positive");
  return v;
}

inline Json write_valve(const Valve& v, bool with_cd) {
  Json j;
  if (with_cd) j["c_d"] = v.discharge_coefficient;
  j["a_open_m2"] = v.open_area;
  j["a_closed_m2"] = v.closed_area;
  j["opening"] = v.opening;
  return j;
}

}  // namespace detail

inline NetworkDescription parse_network(const std::string& text, const std::string& source = "<network>") {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::parse, source + ": " + e.what());
  }
  const detail::JsonReader r(source);
  if (!doc.is_object()) r.error("$", "expected a JSON object");
  if (r.string_or(doc, "$", "format", "thermonet-network") != "thermonet-network")
    r.error("$.format", "unsupported format (expected 'thermonet-network')");
  if (doc.contains("version") && r.count(doc, "$", "version") != 1) r.error("$.version", "unsupported version");

  NetworkDescription net;
  if (doc.contains("fluid")) {
    const auto& f = doc["fluid"];
    net.fluid.density = r.number_or(f, "$.fluid", "density_kg_m3", net.fluid.density);
    net.fluid.kinematic_viscosity = r.number_or(f, "$.fluid", "kinematic_viscosity_m2_s", net.fluid.kinematic_viscosity);
    if (!(net.fluid.density > 0.0) || !(net.fluid.kinematic_viscosity > 0.0))
      r.error("$.fluid", "density and viscosity must be positive");
  }
  const auto& feed = r.member(doc, "$", "feed");
  net.feed_node = r.string(feed, "$.feed", "node");
  const auto mode = r.string_or(feed, "$.feed", "mode", "head");
  if (mode == "head") net.feed_mode = FeedMode::head;
  else if (mode == "flow") net.feed_mode = FeedMode::flow;
  else r.error("$.feed.mode", "expected 'head' or 'flow', got '" + mode + "'");
  if (doc.contains("initial_temperature_C")) net.initial_temperature = r.number(doc, "$", "initial_temperature_C");

  const auto& nodes = r.array(doc, "$", "nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "$.nodes[" + std::to_string(i) + "]";
    NodeSpec n;
    n.id = r.string(nodes[i], path, "id");
    if (nodes[i].contains("head_bar")) n.known_head = bar_to_pa(r.number(nodes[i], path, "head_bar"));
    net.nodes.push_back(std::move(n));
  }

  const auto& links = r.array(doc, "$", "links");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const std::string path = "$.links[" + std::to_string(i) + "]";
    const auto& lj = links[i];
    NetworkLink l;
    l.spec.id = r.string(lj, path, "id");
    l.spec.from = r.string(lj, path, "from");
    l.spec.to = r.string(lj, path, "to");
    const auto& th = r.member(lj, path, "thermal");
    const std::string tpath = path + ".thermal";
    const double length = r.number(lj, path, "length_m");
    const Index grid_points = r.count(th, tpath, "grid_points");
    const double diameter = r.number(lj, path, "diameter_m");
    const double area = r.number_or(lj, path, "area_m2", 0.0);
    try {
      l.spec.hydraulic.geometry = build_grid(length, grid_points, diameter, area);
    } catch (const Error& e) {
      r.error(path, e.what());
    }
    l.spec.hydraulic.roughness = r.number_or(lj, path, "roughness_m", 0.0);
    l.spec.hydraulic.minor_loss = r.number_or(lj, path, "k_min", 0.0);
    if (l.spec.hydraulic.roughness < 0.0) r.error(path + ".roughness_m", "must be non-negative");
    if (l.spec.hydraulic.minor_loss < 0.0) r.error(path + ".k_min", "must be non-negative");
    l.spec.hydraulic.valve = detail::read_valve(r, r.member(lj, path, "valve"), path + ".valve", true);

    l.thermal.params = {r.number(th, tpath, "lambda_per_s"), r.number(th, tpath, "D_m2_s")};
    if (!(l.thermal.params.lambda >= 0.0) || !(l.thermal.params.diffusion >= 0.0))
      r.error(tpath, "lambda_per_s and D_m2_s must be non-negative");
    if (th.contains("sensors_m")) {
      const auto& s = r.array(th, tpath, "sensors_m");
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (!s[k].is_number()) r.error(tpath + ".sensors_m[" + std::to_string(k) + "]", "expected a number");
        const double z = s[k].get<double>();
        if (!(z >= 0.0 && z <= l.spec.hydraulic.geometry.length))
          r.error(tpath + ".sensors_m[" + std::to_string(k) + "]", "sensor outside the pipe");
        l.thermal.sensors.push_back(z);
      }
    }
    const auto model = r.string_or(th, tpath, "model", "rom");
    if (model == "rom") l.thermal.model = ThermalModelKind::rom;
    else if (model == "fom") l.thermal.model = ThermalModelKind::fom;
    else r.error(tpath + ".model", "expected 'rom' or 'fom', got '" + model + "'");
    if (th.contains("order")) l.thermal.order = r.count(th, tpath, "order");
    if (l.thermal.order < 1) r.error(tpath + ".order", "must be at least 1");
    const auto method = r.string_or(th, tpath, "reduction", "moment");
    if (method == "moment") l.thermal.method = ReductionMethod::moment;
    else if (method == "h2") l.thermal.method = ReductionMethod::h2;
    else r.error(tpath + ".reduction", "expected 'moment' or 'h2', got '" + method + "'");
    l.thermal.reference_velocity = r.number_or(th, tpath, "reference_velocity_m_s", l.thermal.reference_velocity);
    if (!(l.thermal.reference_velocity > 0.0)) r.error(tpath + ".reference_velocity_m_s", "must be positive");
    net.links.push_back(std::move(l));
  }

  if (doc.contains("demands")) {
    const auto& demands = r.array(doc, "$", "demands");
    for (std::size_t i = 0; i < demands.size(); ++i) {
      const std::string path = "$.demands[" + std::to_string(i) + "]";
      DemandSpec d;
      d.node = r.string(demands[i], path, "node");
      d.point.emitter_coefficient = r.number(demands[i], path, "c_de");
      if (!(d.point.emitter_coefficient > 0.0)) r.error(path + ".c_de", "must be positive");
      d.point.valve = detail::read_valve(r, r.member(demands[i], path, "valve"), path + ".valve", false);
      net.demands.push_back(std::move(d));
    }
  }
  return net;
}

inline std::string serialize_network(const NetworkDescription& net) {
  Json doc;
  doc["format"] = "thermonet-network";
  doc["version"] = 1;
  doc["fluid"] = {{"density_kg_m3", net.fluid.density}, {"kinematic_viscosity_m2_s", net.fluid.kinematic_viscosity}};
  doc["feed"] = {{"node", net.feed_node}, {"mode", net.feed_mode == FeedMode::head ? "head" : "flow"}};
  if (net.initial_temperature) doc["initial_temperature_C"] = *net.initial_temperature;
  doc["nodes"] = Json::array();
  for (const auto& n : net.nodes) {
    Json j{{"id", n.id}};
    if (n.known_head) j["head_bar"] = pa_to_bar(*n.known_head);
    doc["nodes"].push_back(std::move(j));
  }
  doc["links"] = Json::array();
  for (const auto& l : net.links) {
    const auto& g = l.spec.hydraulic.geometry;
    Json th{{"lambda_per_s", l.thermal.params.lambda},
            {"D_m2_s", l.thermal.params.diffusion},
            {"grid_points", g.grid_points},
            {"sensors_m", l.thermal.sensors},
            {"model", l.thermal.model == ThermalModelKind::rom ? "rom" : "fom"},
            {"order", l.thermal.order},
            {"reduction", l.thermal.method == ReductionMethod::moment ? "moment" : "h2"},
            {"reference_velocity_m_s", l.thermal.reference_velocity}};
    doc["links"].push_back(Json{{"id", l.spec.id},
                                {"from", l.spec.from},
                                {"to", l.spec.to},
                                {"length_m", g.length},
                                {"diameter_m", g.inner_diameter},
                                {"area_m2", g.cross_section},
                                {"roughness_m", l.spec.hydraulic.roughness},
                                {"k_min", l.spec.hydraulic.minor_loss},
                                {"valve", detail::write_valve(l.spec.hydraulic.valve, true)},
                                {"thermal", std::move(th)}});
  }
  doc["demands"] = Json::array();
  for (const auto& d : net.demands)
    doc["demands"].push_back(
        Json{{"node", d.node}, {"c_de", d.point.emitter_coefficient}, {"valve", detail::write_valve(d.point.valve, false)}});
  return doc.dump(2) + "\n";
}

inline NetworkDescription load_network(const std::filesystem::path& path) {
  return parse_network(read_file(path), path.string());
}

}  // namespace thermonet::io
