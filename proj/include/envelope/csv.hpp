#pragma once

// CSV ingestion and export for the common sample schema. Header is
// `d,s,y,z,x` (z column optional, y blank when s=0); values are parsed and
// printed with charconv so round trips are locale-independent and exact.

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "envelope/data.hpp"

namespace envelope {
namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline double parse_double(std::string_view field, std::size_t row,
                           const char* name) {
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  require(ec == std::errc() && ptr == field.data() + field.size(),
          ErrorCode::config_error,
          "row " + std::to_string(row) + ": cannot parse " + name + " from '" +
              std::string(field) + "'");
  return value;
}

inline int parse_int(std::string_view field, std::size_t row, const char* name) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  require(ec == std::errc() && ptr == field.data() + field.size(),
          ErrorCode::config_error,
          "row " + std::to_string(row) + ": cannot parse " + name + " from '" +
              std::string(field) + "'");
  return value;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline std::vector<Observation> read_sample_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::config_error,
          "empty CSV input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool has_z = false;
  if (line == "d,s,y,z,x") {
    has_z = true;
  } else {
    require(line == "d,s,y,x", ErrorCode::config_error,
            "CSV header must be 'd,s,y,z,x' or 'd,s,y,x', got '" + line + "'");
  }
  std::vector<Observation> rows;
  std::size_t row_index = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_fields(line);
    const std::size_t expected = has_z ? 5 : 4;
    require(fields.size() == expected, ErrorCode::config_error,
            "row " + std::to_string(row_index) + ": expected " +
                std::to_string(expected) + " fields, got " +
                std::to_string(fields.size()));
    Observation w;
    w.d = detail::parse_int(fields[0], row_index, "d");
    w.s = detail::parse_int(fields[1], row_index, "s");
    w.y = fields[2].empty() ? kNaN : detail::parse_double(fields[2], row_index, "y");
    std::size_t next = 3;
    if (has_z) {
      if (!fields[3].empty()) w.z = detail::parse_int(fields[3], row_index, "z");
      next = 4;
    }
    w.x = detail::parse_int(fields[next], row_index, "x");
    rows.push_back(w);
    ++row_index;
  }
  return rows;
}

inline std::vector<Observation> read_sample_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io_error, "cannot open '" + path + "'");
  return read_sample_csv(in);
}

inline void write_sample_csv(std::ostream& out, const Sample& sample) {
  const bool has_z = sample.schema.has_instrument();
  out << (has_z ? "d,s,y,z,x\n" : "d,s,y,x\n");
  for (const auto& w : sample.rows) {
    out << w.d << ',' << w.s << ',';
    if (w.s == 1) out << detail::format_double(w.y);
    if (has_z) {
      out << ',';
      if (w.z.has_value()) out << *w.z;
    }
    out << ',' << w.x << '\n';
  }
}

inline void write_sample_csv(const std::string& path, const Sample& sample) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io_error, "cannot open '" + path + "' for writing");
  write_sample_csv(out, sample);
}

}  // namespace envelope
