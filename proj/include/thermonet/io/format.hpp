#pragma once

// File-boundary helpers: unit conversion, shortest round-trip number
// formatting, strict number parsing, CSV tables and atomic writes.

#include "thermonet/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

namespace thermonet::io {

inline constexpr double kPascalPerBar = 1e5;
inline constexpr double kLpmPerCubicMetrePerSecond = 60000.0;

namespace detail {

/// Returns y such that y * factor == x exactly when such a y lies within a few
/// ulps of x / factor; otherwise x / factor. This makes file -> internal ->
/// file -> internal conversions reproduce the internal value bit for bit.
inline double exact_preimage(double x, double factor) {
  const double y0 = x / factor;
  if (!std::isfinite(y0) || y0 * factor == x) return y0;
  double lo = y0, hi = y0;
  for (int k = 0; k < 4; ++k) {
    lo = std::nextafter(lo, -std::numeric_limits<double>::infinity());
    hi = std::nextafter(hi, std::numeric_limits<double>::infinity());
    if (lo * factor == x) return lo;
    if (hi * factor == x) return hi;
  }
  return y0;
}

}  // namespace detail

inline double bar_to_pa(double bar) { return bar * kPascalPerBar; }
inline double pa_to_bar(double pa) { return detail::exact_preimage(pa, kPascalPerBar); }
inline double lpm_to_m3s(double lpm) { return lpm / kLpmPerCubicMetrePerSecond; }
inline double m3s_to_lpm(double q) {
  // Inverse of the division above: find y with y / 60000 == q.
  const double y0 = q * kLpmPerCubicMetrePerSecond;
  if (!std::isfinite(y0) || y0 / kLpmPerCubicMetrePerSecond == q) return y0;
  double lo = y0, hi = y0;
  for (int k = 0; k < 4; ++k) {
    lo = std::nextafter(lo, -std::numeric_limits<double>::infinity());
    hi = std::nextafter(hi, std::numeric_limits<double>::infinity());
    if (lo / kLpmPerCubicMetrePerSecond == q) return lo;
    if (hi / kLpmPerCubicMetrePerSecond == q) return hi;
  }
  return y0;
}

/// Shortest decimal text that parses back to exactly x.
inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  if (res.ec != std::errc()) fail(ErrorKind::parse, "cannot format number");
  return std::string(buf, res.ptr);
}

/// Parses a full field as a double; `where` names the location for diagnostics.
inline double parse_number(std::string_view text, const std::string& where) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(value))
    fail(ErrorKind::parse, where + ": '" + std::string(text) + "' is not a finite number");
  return value;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::parse, path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a temporary sibling file and renames it over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::configuration, path.string() + ": cannot open for writing");
    out << content;
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      fail(ErrorKind::configuration, path.string() + ": write failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    fail(ErrorKind::configuration, path.string() + ": cannot replace file (" + ec.message() + ")");
  }
}

/// Numeric CSV table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;  // column-major

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  std::ptrdiff_t find(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }
};

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

/// Parses comma-separated text; blank lines and lines starting with '#' are skipped.
inline CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::size_t pos = 0;
  int line_no = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line(text.data() + pos, (end == std::string::npos ? text.size() : end) - pos);
    pos = end == std::string::npos ? text.size() + 1 : end + 1;
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto fields = split_csv_line(line);
    if (!have_header) {
      for (const auto& f : fields) {
        t.header.push_back(trim(f));
        if (t.header.back().empty()) fail(ErrorKind::parse, source + ":" + std::to_string(line_no) + ": empty column name");
        for (std::size_t i = 0; i + 1 < t.header.size(); ++i)
          if (t.header[i] == t.header.back())
            fail(ErrorKind::parse, source + ":" + std::to_string(line_no) + ": duplicate column '" + t.header.back() + "'");
      }
      t.columns.resize(t.header.size());
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      std::ostringstream msg;
      msg << source << ":" << line_no << ": expected " << t.header.size() << " fields, found " << fields.size();
      fail(ErrorKind::parse, msg.str());
    }
    for (std::size_t i = 0; i < fields.size(); ++i)
      t.columns[i].push_back(parse_number(fields[i], source + ":" + std::to_string(line_no) + ": column '" + t.header[i] + "'"));
  }
  if (!have_header) fail(ErrorKind::parse, source + ": missing header row");
  return t;
}

inline std::string format_csv(const CsvTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      if (i) out += ',';
      out += format_number(t.columns[i][r]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace thermonet::io
