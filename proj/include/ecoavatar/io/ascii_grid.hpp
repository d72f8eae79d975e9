#pragma once

// ESRI-style ASCII grid: six header lines (ncols, nrows, xllcorner,
// yllcorner, cellsize, NODATA_value; keys case-insensitive, in this order)
// followed by nrows lines of ncols values, northernmost row first.

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ecoavatar/dataset.hpp"
#include "ecoavatar/io/format.hpp"

namespace ecoavatar::io {

using avatar::ContextMap;
using avatar::NodataPolicy;

struct GridOptions {
  NodataPolicy nodata_policy = NodataPolicy::reject;
  double fill_value = 0.0;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace detail

/// Parses a grid without resolving NODATA cells.
inline ContextMap parse_ascii_grid_text(std::string_view text, std::string name = "map") {
  static constexpr std::array<std::string_view, 6> keys = {
      "ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value"};

  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    lines.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  require(lines.size() >= keys.size(), ErrorCode::parse_error, "grid header is incomplete");

  std::array<double, 6> header{};
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto tokens = detail::split_ws(lines[i]);
    require(tokens.size() == 2 && detail::iequals(tokens[0], keys[i]), ErrorCode::parse_error,
            "grid header line " + std::to_string(i + 1) + ": expected key '" +
                std::string(keys[i]) + "'");
    const auto v = parse_double(tokens[1]);
    require(v.has_value(), ErrorCode::parse_error,
            "grid header value for '" + std::string(keys[i]) + "' is not numeric");
    header[i] = *v;
  }
  auto as_count = [](double v, const char* key) {
    require(v >= 1.0 && v == std::floor(v), ErrorCode::parse_error,
            std::string(key) + " must be a positive integer");
    return static_cast<std::size_t>(v);
  };

  ContextMap map;
  map.name = std::move(name);
  map.n_cols = as_count(header[0], "ncols");
  map.n_rows = as_count(header[1], "nrows");
  map.x_ll = header[2];
  map.y_ll = header[3];
  map.cell_size = header[4];
  map.nodata = header[5];
  require(map.cell_size > 0.0, ErrorCode::parse_error, "cellsize must be positive");

  std::vector<std::string_view> rows;
  for (std::size_t i = keys.size(); i < lines.size(); ++i) {
    if (!trim(lines[i]).empty()) rows.push_back(lines[i]);
  }
  require(rows.size() == map.n_rows, ErrorCode::parse_error,
          "grid has " + std::to_string(rows.size()) + " data rows, header says " +
              std::to_string(map.n_rows));
  map.values.reserve(map.pixel_count());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto cells = detail::split_ws(rows[r]);
    require(cells.size() == map.n_cols, ErrorCode::parse_error,
            "grid row " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) +
                " cells, header says " + std::to_string(map.n_cols));
    for (const auto cell : cells) {
      const auto v = parse_double(cell);
      require(v.has_value(), ErrorCode::parse_error,
              "non-numeric grid cell '" + std::string(cell) + "' in row " + std::to_string(r + 1));
      map.values.push_back(*v);
    }
  }
  return map;
}

/// Reads a grid and applies the NODATA policy; the map is named after the
/// file stem.
inline ContextMap read_ascii_grid(const std::string& path, const GridOptions& opts = {}) {
  try {
    ContextMap map =
        parse_ascii_grid_text(read_file(path), std::filesystem::path(path).stem().string());
    return avatar::resolve_nodata(std::move(map), opts.nodata_policy, opts.fill_value);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

inline std::string format_ascii_grid(const ContextMap& map) {
  map.validate();
  std::string out;
  out += "ncols " + std::to_string(map.n_cols) + "\n";
  out += "nrows " + std::to_string(map.n_rows) + "\n";
  out += "xllcorner " + format_double(map.x_ll) + "\n";
  out += "yllcorner " + format_double(map.y_ll) + "\n";
  out += "cellsize " + format_double(map.cell_size) + "\n";
  out += "NODATA_value " + format_double(map.nodata) + "\n";
  for (std::size_t r = 0; r < map.n_rows; ++r) {
    for (std::size_t c = 0; c < map.n_cols; ++c) {
      if (c > 0) out += ' ';
      out += format_double(map.at(r, c));
    }
    out += '\n';
  }
  return out;
}

inline void write_ascii_grid(const std::string& path, const ContextMap& map) {
  write_file(path, format_ascii_grid(map));
}

}  // namespace ecoavatar::io
