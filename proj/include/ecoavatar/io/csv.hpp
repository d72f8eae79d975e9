#pragma once

// Time-series CSV: a header row ("t,name [unit],..."), then one row per
// time point. The first column is a real number or an ISO-8601 date.

#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ecoavatar/dataset.hpp"
#include "ecoavatar/ecolv.hpp"
#include "ecoavatar/io/format.hpp"

namespace ecoavatar::io {

using avatar::TimeFormat;
using avatar::TimeSeriesSet;

struct CsvOptions {
  /// Fill missing cells and absent time points by linear interpolation
  /// instead of rejecting the file.
  bool interpolate_gaps = false;
};

namespace detail {

inline std::vector<std::string_view> split_line(std::string_view line, char sep = ',') {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = pos + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

inline bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

// Linear interpolation over NaN runs of one row; runs must be bounded.
inline void fill_gaps(Matrix& values, const std::vector<double>& times, const std::string& name,
                      Eigen::Index row) {
  const Eigen::Index n = values.cols();
  Eigen::Index last = -1;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isnan(values(row, j))) continue;
    if (last >= 0 && j - last > 1) {
      const double t0 = times[static_cast<std::size_t>(last)];
      const double t1 = times[static_cast<std::size_t>(j)];
      for (Eigen::Index i = last + 1; i < j; ++i) {
        const double w = (times[static_cast<std::size_t>(i)] - t0) / (t1 - t0);
        values(row, i) = (1.0 - w) * values(row, last) + w * values(row, j);
      }
    } else if (last < 0 && j > 0) {
      fail(ErrorCode::parse_error, "series '" + name + "' starts with missing values");
    }
    last = j;
  }
  require(last == n - 1, ErrorCode::parse_error, "series '" + name + "' ends with missing values");
}

}  // namespace detail

inline TimeSeriesSet parse_timeseries_csv_text(std::string_view text, const CsvOptions& opts = {}) {
  const auto lines = detail::split_lines(text);
  require(!lines.empty(), ErrorCode::parse_error, "CSV is empty: a header row is required");

  TimeSeriesSet ts;
  const auto header = detail::split_line(lines[0]);
  require(header.size() >= 2, ErrorCode::parse_error,
          "CSV header needs a time column and at least one series");
  ts.time_label = std::string(header[0]);
  std::set<std::string> seen;
  for (std::size_t c = 1; c < header.size(); ++c) {
    std::string_view cell = header[c];
    std::string unit;
    if (const auto open = cell.find('['); open != std::string_view::npos && cell.back() == ']') {
      unit = std::string(trim(cell.substr(open + 1, cell.size() - open - 2)));
      cell = trim(cell.substr(0, open));
    }
    const std::string name(cell);
    require(!name.empty(), ErrorCode::parse_error, "empty series name in CSV header");
    require(seen.insert(name).second, ErrorCode::parse_error, "duplicate series name '" + name + "'");
    ts.names.push_back(name);
    ts.units.push_back(unit);
  }

  const std::size_t ncols = header.size();
  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;
  bool first = true;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto cells = detail::split_line(lines[li]);
    const std::string row_id = "row " + std::to_string(li + 1);
    require(cells.size() == ncols, ErrorCode::parse_error,
            "ragged CSV: " + row_id + " has " + std::to_string(cells.size()) + " cells, header has " +
                std::to_string(ncols));
    double t = 0.0;
    if (const auto num = parse_double(cells[0]); num && (first || ts.time_format == TimeFormat::numeric)) {
      t = *num;
      ts.time_format = TimeFormat::numeric;
    } else if (const auto iso = parse_iso_time(cells[0]);
               iso && (first || ts.time_format != TimeFormat::numeric)) {
      t = iso->days;
      const TimeFormat f = iso->has_clock ? TimeFormat::datetime : TimeFormat::date;
      require(first || f == ts.time_format, ErrorCode::parse_error,
              "mixed time formats at " + row_id);
      ts.time_format = f;
    } else {
      fail(ErrorCode::parse_error, "unreadable time value '" + std::string(cells[0]) + "' at " + row_id);
    }
    first = false;
    std::vector<double> values(ncols - 1);
    for (std::size_t c = 1; c < ncols; ++c) {
      if (detail::is_missing(cells[c])) {
        require(opts.interpolate_gaps, ErrorCode::parse_error,
                "missing value for '" + ts.names[c - 1] + "' at " + row_id);
        values[c - 1] = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const auto v = parse_double(cells[c]);
      require(v.has_value() && std::isfinite(*v), ErrorCode::parse_error,
              "non-numeric value '" + std::string(cells[c]) + "' at " + row_id);
      values[c - 1] = *v;
    }
    times.push_back(t);
    rows.push_back(std::move(values));
    line_numbers.push_back(li + 1);
  }

  // cadence
  if (times.size() >= 2) {
    const double dt = times[1] - times[0];
    double min_dt = dt;
    bool uniform = true;
    for (std::size_t i = 1; i < times.size(); ++i) {
      const double step = times[i] - times[i - 1];
      require(step > 0.0, ErrorCode::parse_error,
              "time axis not strictly increasing at row " + std::to_string(line_numbers[i]));
      min_dt = std::min(min_dt, step);
      if (uniform && std::abs(step - dt) > 1e-9 * std::abs(dt)) {
        require(opts.interpolate_gaps, ErrorCode::parse_error,
                "non-uniform cadence at row " + std::to_string(line_numbers[i]));
        uniform = false;
      }
    }
    if (!uniform) {
      // regrid onto multiples of the smallest step; absent rows become gaps
      std::vector<double> grid_times;
      std::vector<std::vector<double>> grid_rows;
      for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0) {
          const double ratio = (times[i] - times[i - 1]) / min_dt;
          const double k = std::round(ratio);
          require(std::abs(ratio - k) <= 1e-6 * k, ErrorCode::parse_error,
                  "time gap at row " + std::to_string(line_numbers[i]) +
                      " is not a multiple of the cadence");
          for (long j = 1; j < static_cast<long>(k); ++j) {
            grid_times.push_back(times[i - 1] + static_cast<double>(j) * min_dt);
            grid_rows.emplace_back(ncols - 1, std::numeric_limits<double>::quiet_NaN());
          }
        }
        grid_times.push_back(times[i]);
        grid_rows.push_back(rows[i]);
      }
      times = std::move(grid_times);
      rows = std::move(grid_rows);
    }
  }

  ts.times = std::move(times);
  ts.values.resize(static_cast<Eigen::Index>(ncols - 1), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t s = 0; s + 1 < ncols; ++s)
      ts.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)) = rows[j][s];
  if (opts.interpolate_gaps) {
    for (Eigen::Index s = 0; s < ts.values.rows(); ++s)
      detail::fill_gaps(ts.values, ts.times, ts.names[static_cast<std::size_t>(s)], s);
  }
  if (ts.times.size() >= 2) {
    // regridded axes are uniform by construction up to rounding
    const double dt = ts.cadence();
    for (std::size_t i = 1; i < ts.times.size(); ++i) {
      require(std::abs(ts.times[i] - ts.times[i - 1] - dt) <= 1e-9 * std::abs(dt),
              ErrorCode::parse_error, "non-uniform cadence after regridding");
    }
  }
  ts.validate();
  return ts;
}

inline TimeSeriesSet read_timeseries_csv(const std::string& path, const CsvOptions& opts = {}) {
  try {
    return parse_timeseries_csv_text(read_file(path), opts);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

inline std::string format_time(double t, TimeFormat f) {
  switch (f) {
    case TimeFormat::numeric: return format_double(t);
    case TimeFormat::date: return format_iso_time(t, false);
    case TimeFormat::datetime: return format_iso_time(t, true);
  }
  return format_double(t);
}

inline std::string format_timeseries_csv(const TimeSeriesSet& ts) {
  require(ts.units.size() == ts.names.size() &&
              static_cast<std::size_t>(ts.values.rows()) == ts.names.size() &&
              static_cast<std::size_t>(ts.values.cols()) == ts.times.size(),
          ErrorCode::dimension_mismatch, "time series set is inconsistent");
  std::string out = ts.time_label;
  for (std::size_t s = 0; s < ts.names.size(); ++s) {
    out += ',';
    out += ts.names[s];
    if (!ts.units[s].empty()) out += " [" + ts.units[s] + "]";
  }
  out += '\n';
  for (std::size_t j = 0; j < ts.times.size(); ++j) {
    out += format_time(ts.times[j], ts.time_format);
    for (Eigen::Index s = 0; s < ts.values.rows(); ++s) {
      out += ',';
      out += format_double(ts.values(s, static_cast<Eigen::Index>(j)));
    }
    out += '\n';
  }
  return out;
}

inline void write_timeseries_csv(const std::string& path, const TimeSeriesSet& ts) {
  write_file(path, format_timeseries_csv(ts));
}

/// Predator-prey trajectory as a two-series set ("prey", "predators").
inline TimeSeriesSet to_timeseries(const ecolv::PopulationTrajectory& traj) {
  TimeSeriesSet ts;
  ts.names = {"prey", "predators"};
  ts.units = {"", ""};
  ts.times = traj.times;
  ts.values.resize(2, static_cast<Eigen::Index>(traj.size()));
  for (std::size_t i = 0; i < traj.size(); ++i) {
    ts.values(0, static_cast<Eigen::Index>(i)) = traj.prey[i];
    ts.values(1, static_cast<Eigen::Index>(i)) = traj.predators[i];
  }
  return ts;
}

inline ecolv::PopulationTrajectory to_trajectory(const TimeSeriesSet& ts, std::size_t prey_row = 0,
                                                 std::size_t predator_row = 1) {
  require(prey_row < ts.series_count() && predator_row < ts.series_count(),
          ErrorCode::invalid_argument, "trajectory needs prey and predator series");
  ecolv::PopulationTrajectory traj;
  traj.times = ts.times;
  traj.dt = ts.cadence();
  const auto pr = static_cast<Eigen::Index>(prey_row);
  const auto fr = static_cast<Eigen::Index>(predator_row);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    traj.prey.push_back(ts.values(pr, static_cast<Eigen::Index>(i)));
    traj.predators.push_back(ts.values(fr, static_cast<Eigen::Index>(i)));
  }
  return traj;
}

}  // namespace ecoavatar::io
