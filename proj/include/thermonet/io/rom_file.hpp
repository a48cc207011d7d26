#pragma once

// Reduced-model container (JSON). Matrices are stored row-major as arrays of
// numbers in shortest round-trip form, so save -> load is bit-exact.

#include "thermonet/error.hpp"
#include "thermonet/io/format.hpp"
#include "thermonet/mor.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <string>

namespace thermonet::io {

namespace detail {

inline nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  nlohmann::ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  auto data = nlohmann::ordered_json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) fail(ErrorKind::configuration, "cannot store a non-finite matrix entry");
      data.push_back(m(r, c));
    }
  j["data"] = std::move(data);
  return j;
}

inline Matrix matrix_from_json(const nlohmann::ordered_json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data") || !j["data"].is_array())
    fail(ErrorKind::parse, where + ": expected {rows, cols, data}");
  const auto rows = j["rows"].get<Index>();
  const auto cols = j["cols"].get<Index>();
  const auto& data = j["data"];
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
    fail(ErrorKind::parse, where + ": data length does not match rows*cols");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const auto& v = data[k++];
      if (!v.is_number()) fail(ErrorKind::parse, where + ": non-numeric entry");
      m(r, c) = v.get<double>();
    }
  return m;
}

}  // namespace detail

inline std::string serialize_rom(const ReducedModel& rom) {
  nlohmann::ordered_json j;
  j["format"] = "thermonet-rom";
  j["version"] = 1;
  j["full_dim"] = rom.full_dim;
  j["order"] = rom.order;
  j["segment_length_m"] = rom.segment_length;
  j["g_map"] = kGMapId;
  j["h_map"] = kHMapId;
  j["reduction_point"] = {{"lambda_per_s", rom.reduction_point.lambda}, {"D_m2_s", rom.reduction_point.diffusion}};
  j["info"] = {{"converged", rom.info.converged},
               {"iterations", rom.info.iterations},
               {"final_change", rom.info.final_change},
               {"condition", rom.info.condition},
               {"bilinear_scaling", rom.info.bilinear_scaling}};
  j["A_red"] = detail::matrix_to_json(rom.A_red);
  j["Q_red"] = detail::matrix_to_json(rom.Q_red);
  j["B_red"] = detail::matrix_to_json(rom.B_red);
  j["C_red"] = detail::matrix_to_json(rom.C_red);
  j["V"] = detail::matrix_to_json(rom.V);
  return j.dump() + "\n";
}

inline ReducedModel parse_rom(const std::string& text, const std::string& source = "<rom>") {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::parse, source + ": " + e.what());
  }
  try {
    if (j.value("format", std::string()) != "thermonet-rom") fail(ErrorKind::parse, source + ": not a ROM container");
    if (j.value("version", 0) != 1) fail(ErrorKind::parse, source + ": unsupported ROM container version");
    if (j.at("g_map").get<std::string>() != kGMapId || j.at("h_map").get<std::string>() != kHMapId)
      fail(ErrorKind::parse, source + ": parameter maps do not match this library");
    ReducedModel rom;
    rom.full_dim = j.at("full_dim").get<Index>();
    rom.order = j.at("order").get<Index>();
    rom.segment_length = j.at("segment_length_m").get<double>();
    rom.reduction_point = {j.at("reduction_point").at("lambda_per_s").get<double>(),
                           j.at("reduction_point").at("D_m2_s").get<double>()};
    const auto& info = j.at("info");
    rom.info.converged = info.at("converged").get<bool>();
    rom.info.iterations = info.at("iterations").get<int>();
    rom.info.final_change = info.at("final_change").get<double>();
    rom.info.condition = info.at("condition").get<double>();
    rom.info.bilinear_scaling = info.at("bilinear_scaling").get<double>();
    rom.A_red = detail::matrix_from_json(j.at("A_red"), source + ": A_red");
    rom.Q_red = detail::matrix_from_json(j.at("Q_red"), source + ": Q_red");
    rom.B_red = detail::matrix_from_json(j.at("B_red"), source + ": B_red");
    rom.C_red = detail::matrix_from_json(j.at("C_red"), source + ": C_red");
    rom.V = detail::matrix_from_json(j.at("V"), source + ": V");
    const Index r = rom.order;
    if (r < 1 || rom.A_red.rows() != r || rom.A_red.cols() != 2 * r || rom.Q_red.rows() != r ||
        rom.Q_red.cols() != 4 * r || rom.B_red.rows() != r || rom.B_red.cols() != 12 || rom.C_red.cols() != r ||
        rom.V.rows() != rom.full_dim || rom.V.cols() != r || !(rom.segment_length > 0.0))
      fail(ErrorKind::parse, source + ": inconsistent ROM dimensions");
    return rom;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, source + ": " + e.what());
  }
}

inline ReducedModel load_rom(const std::filesystem::path& path) { return parse_rom(read_file(path), path.string()); }

}  // namespace thermonet::io
