#pragma once

// Avatar data model: regularly sampled multivariate time series, static
// context rasters, per-dataset adimensionalization and one-step training
// pairs U = (T(t_i), C), V = T(t_{i+1}).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ecoavatar/numlin.hpp"
#include "ecoavatar/schema.hpp"

namespace ecoavatar::avatar {

using stack::InputSchema;

// ---------------------------------------------------------------------------
// Time series

/// `date` and `datetime` axes hold days since 1970-01-01.
enum class TimeFormat { numeric, date, datetime };

struct TimeSeriesSet {
  std::string time_label = "t";
  TimeFormat time_format = TimeFormat::numeric;
  std::vector<std::string> names;
  std::vector<std::string> units;
  std::vector<double> times;
  Matrix values;  ///< series x time

  [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
  [[nodiscard]] std::size_t series_count() const noexcept { return names.size(); }
  [[nodiscard]] double cadence() const { return times.size() >= 2 ? times[1] - times[0] : 0.0; }

  [[nodiscard]] Vector state(std::size_t i) const {
    return values.col(static_cast<Eigen::Index>(i));
  }

  void validate() const {
    require(units.size() == names.size(), ErrorCode::dimension_mismatch,
            "time series: one unit string per series required");
    require(static_cast<std::size_t>(values.rows()) == names.size() &&
                static_cast<std::size_t>(values.cols()) == times.size(),
            ErrorCode::dimension_mismatch, "time series: value matrix does not match names/times");
    require(values.allFinite(), ErrorCode::non_finite, "time series contains missing values");
    if (times.size() < 2) return;
    const double dt = cadence();
    require(dt > 0.0, ErrorCode::invalid_argument, "time axis must be strictly increasing");
    for (std::size_t i = 1; i < times.size(); ++i) {
      const double step = times[i] - times[i - 1];
      require(std::abs(step - dt) <= 1e-9 * std::abs(dt), ErrorCode::invalid_argument,
              "non-uniform cadence at sample " + std::to_string(i));
    }
  }
};

/// Consecutive sub-range [first, first + count).
inline TimeSeriesSet slice(const TimeSeriesSet& ts, std::size_t first, std::size_t count) {
  require(first + count <= ts.size(), ErrorCode::invalid_argument, "time series slice out of range");
  TimeSeriesSet out = ts;
  out.times.assign(ts.times.begin() + static_cast<std::ptrdiff_t>(first),
                   ts.times.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.values = ts.values.middleCols(static_cast<Eigen::Index>(first),
                                    static_cast<Eigen::Index>(count));
  return out;
}

// ---------------------------------------------------------------------------
// Context maps

/// Static raster; row 0 is the northernmost row, pixels stored row-major.
struct ContextMap {
  std::string name;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  double cell_size = 1.0;
  double x_ll = 0.0;
  double y_ll = 0.0;
  double nodata = -9999.0;
  std::vector<double> values;

  [[nodiscard]] std::size_t pixel_count() const noexcept { return n_rows * n_cols; }
  [[nodiscard]] bool is_nodata(double v) const noexcept { return v == nodata; }
  [[nodiscard]] bool has_nodata() const noexcept {
    return std::any_of(values.begin(), values.end(), [this](double v) { return is_nodata(v); });
  }
  [[nodiscard]] double& at(std::size_t row, std::size_t col) { return values[row * n_cols + col]; }
  [[nodiscard]] double at(std::size_t row, std::size_t col) const {
    return values[row * n_cols + col];
  }
  [[nodiscard]] bool same_grid(const ContextMap& o) const noexcept {
    return n_rows == o.n_rows && n_cols == o.n_cols && cell_size == o.cell_size &&
           x_ll == o.x_ll && y_ll == o.y_ll;
  }

  void validate() const {
    require(values.size() == pixel_count(), ErrorCode::dimension_mismatch,
            "map '" + name + "': pixel count does not equal rows x cols");
  }
};

/// Single-shot measurement carried as a 1x1 context map.
inline ContextMap constant_context(std::string name, double value) {
  ContextMap m;
  m.name = std::move(name);
  m.n_rows = m.n_cols = 1;
  m.values = {value};
  return m;
}

enum class NodataPolicy { reject, mean_fill, constant_fill };

inline ContextMap resolve_nodata(ContextMap map, NodataPolicy policy, double fill_value = 0.0) {
  if (!map.has_nodata()) return map;
  switch (policy) {
    case NodataPolicy::reject:
      fail(ErrorCode::unresolved_nodata,
           "map '" + map.name + "' has NODATA cells and no fill policy was given");
    case NodataPolicy::mean_fill: {
      double sum = 0.0;
      std::size_t n = 0;
      for (double v : map.values) {
        if (!map.is_nodata(v)) {
          sum += v;
          ++n;
        }
      }
      require(n > 0, ErrorCode::unresolved_nodata, "map '" + map.name + "' is entirely NODATA");
      fill_value = sum / static_cast<double>(n);
      break;
    }
    case NodataPolicy::constant_fill:
      require(fill_value != map.nodata, ErrorCode::invalid_argument,
              "fill value equals the NODATA marker");
      break;
  }
  for (double& v : map.values) {
    if (map.is_nodata(v)) v = fill_value;
  }
  return map;
}

struct FlatContext {
  Vector values;
  std::vector<std::pair<std::size_t, std::size_t>> slices;  ///< [begin, end) per map
};

/// Row-major concatenation, one slice per map.
inline FlatContext flatten_context(const std::vector<ContextMap>& maps) {
  FlatContext out;
  std::size_t total = 0;
  for (const auto& m : maps) {
    m.validate();
    require(!m.has_nodata(), ErrorCode::unresolved_nodata,
            "map '" + m.name + "' has unresolved NODATA cells");
    out.slices.emplace_back(total, total + m.pixel_count());
    total += m.pixel_count();
  }
  out.values.resize(static_cast<Eigen::Index>(total));
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto& v = maps[i].values;
    std::copy(v.begin(), v.end(), out.values.data() + out.slices[i].first);
  }
  return out;
}

inline std::vector<double> extract_slice(const FlatContext& flat, std::size_t map_index) {
  require(map_index < flat.slices.size(), ErrorCode::invalid_argument, "no such context slice");
  const auto [b, e] = flat.slices[map_index];
  return {flat.values.data() + b, flat.values.data() + e};
}

/// Pointwise A = R * K * LS * C * P; a NODATA pixel in any factor yields
/// NODATA (R's marker) in the result.
inline ContextMap usle_soil_loss(const ContextMap& r, const ContextMap& k, const ContextMap& ls,
                                 const ContextMap& c, const ContextMap& p) {
  const ContextMap* factors[] = {&r, &k, &ls, &c, &p};
  for (const ContextMap* f : factors) {
    f->validate();
    require(f->same_grid(r), ErrorCode::grid_mismatch,
            "USLE factor '" + f->name + "' is on a different grid than '" + r.name + "'");
  }
  ContextMap a = r;
  a.name = "soil_loss";
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double prod = 1.0;
    bool missing = false;
    for (const ContextMap* f : factors) {
      const double v = f->values[i];
      if (f->is_nodata(v)) {
        missing = true;
        break;
      }
      prod *= v;
    }
    a.values[i] = missing ? r.nodata : prod;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Scaling

/// One (offset, ρ) per dataset: each series, then each map. `brick_rho`
/// optionally replicates kernel scale multipliers per brick and per kernel
/// ([brick][kernel][dataset]); empty means every multiplier is 1.
struct ScalingSet {
  std::vector<double> offset;
  std::vector<double> rho;
  std::vector<std::vector<std::vector<double>>> brick_rho;

  void validate(std::size_t datasets) const {
    require(offset.size() == datasets && rho.size() == datasets, ErrorCode::dimension_mismatch,
            "scaling set needs one offset and one rho per dataset");
    for (double r : rho) {
      require(std::isfinite(r) && r > 0.0, ErrorCode::invalid_argument,
              "scaling factors must be positive");
    }
    for (const auto& brick : brick_rho) {
      for (const auto& kernel : brick) {
        require(kernel.size() == datasets, ErrorCode::dimension_mismatch,
                "per-brick scaling needs one multiplier per dataset");
        for (double r : kernel) {
          require(!std::isnan(r) && r > 0.0, ErrorCode::invalid_argument,
                  "scaling multipliers must be positive");
        }
      }
    }
  }

  /// Multiplier for dataset `d` of kernel `kernel` in brick `brick` (0-based).
  [[nodiscard]] double multiplier(std::size_t brick, std::size_t kernel, std::size_t d) const {
    if (brick >= brick_rho.size() || kernel >= brick_rho[brick].size()) return 1.0;
    return brick_rho[brick][kernel][d];
  }

  friend bool operator==(const ScalingSet&, const ScalingSet&) = default;
};

inline ScalingSet identity_scaling(const InputSchema& schema) {
  const std::size_t n = schema.dataset_count();
  return ScalingSet{std::vector<double>(n, 0.0), std::vector<double>(n, 1.0), {}};
}

namespace detail {

// Per-entry (offset, rho) over the (series, context) layout.
inline std::pair<Vector, Vector> expand(const ScalingSet& s, const InputSchema& schema) {
  s.validate(schema.dataset_count());
  const auto n = static_cast<Eigen::Index>(schema.brick_input_length(1));
  Vector off(n);
  Vector rho(n);
  Eigen::Index pos = 0;
  for (std::size_t d = 0; d < schema.series_count(); ++d, ++pos) {
    off(pos) = s.offset[d];
    rho(pos) = s.rho[d];
  }
  for (std::size_t m = 0; m < schema.map_count(); ++m) {
    const std::size_t d = schema.series_count() + m;
    const auto len = static_cast<Eigen::Index>(schema.context[m].pixels);
    off.segment(pos, len).setConstant(s.offset[d]);
    rho.segment(pos, len).setConstant(s.rho[d]);
    pos += len;
  }
  return {off, rho};
}

inline std::pair<double, double> mean_and_scale(const double* data, std::size_t n) {
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += data[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += (data[i] - mean) * (data[i] - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  // a constant dataset carries no scale; leave it unscaled
  return {mean, sd > 0.0 && std::isfinite(sd) ? sd : 1.0};
}

}  // namespace detail

/// Per-dataset (x_d − offset_d) / ρ_d over a (series, context) vector.
inline Vector adimensionalize(const Vector& x, const ScalingSet& s, const InputSchema& schema) {
  require(static_cast<std::size_t>(x.size()) == schema.brick_input_length(1),
          ErrorCode::dimension_mismatch, "adimensionalize: vector does not match the schema");
  const auto [off, rho] = detail::expand(s, schema);
  return ((x - off).array() / rho.array()).matrix();
}

inline Vector dimensionalize(const Vector& x, const ScalingSet& s, const InputSchema& schema) {
  require(static_cast<std::size_t>(x.size()) == schema.brick_input_length(1),
          ErrorCode::dimension_mismatch, "dimensionalize: vector does not match the schema");
  const auto [off, rho] = detail::expand(s, schema);
  return (x.array() * rho.array() + off.array()).matrix();
}

// ---------------------------------------------------------------------------
// Training pairs

/// Column j pairs input (inputs.col(j), context) with target targets.col(j).
/// The context is stored once; it is identical for every column.
struct TrainingPairs {
  InputSchema schema;
  Matrix inputs;   ///< series x pairs, T(t_i)
  Matrix targets;  ///< series x pairs, T(t_{i+1})
  Vector context;

  [[nodiscard]] std::size_t size() const noexcept {
    return static_cast<std::size_t>(inputs.cols());
  }

  /// First-brick input columns (series, context).
  [[nodiscard]] Matrix assembled_inputs() const {
    Matrix u(static_cast<Eigen::Index>(schema.brick_input_length(1)), inputs.cols());
    u.topRows(inputs.rows()) = inputs;
    u.bottomRows(context.size()) = context.replicate(1, inputs.cols());
    return u;
  }
};

inline TrainingPairs build_training_pairs(const TimeSeriesSet& ts,
                                          const std::vector<ContextMap>& maps) {
  ts.validate();
  require(ts.size() >= 2, ErrorCode::invalid_argument, "training pairs need at least 2 time points");
  FlatContext flat = flatten_context(maps);
  TrainingPairs pairs;
  pairs.schema.series_names = ts.names;
  for (const auto& m : maps) pairs.schema.context.push_back({m.name, m.pixel_count()});
  const auto n = static_cast<Eigen::Index>(ts.size());
  pairs.inputs = ts.values.leftCols(n - 1);
  pairs.targets = ts.values.rightCols(n - 1);
  pairs.context = std::move(flat.values);
  return pairs;
}

/// Consecutive split: the first floor(fraction * size) pairs, then the rest.
inline std::pair<TrainingPairs, TrainingPairs> split_pairs(const TrainingPairs& pairs,
                                                           double fraction) {
  require(fraction > 0.0 && fraction < 1.0, ErrorCode::invalid_argument,
          "split fraction must lie in (0, 1)");
  const auto n = static_cast<Eigen::Index>(pairs.size());
  const auto head = static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  require(head >= 1 && head < n, ErrorCode::invalid_argument,
          "split fraction leaves an empty part");
  TrainingPairs a = pairs;
  TrainingPairs b = pairs;
  a.inputs = pairs.inputs.leftCols(head);
  a.targets = pairs.targets.leftCols(head);
  b.inputs = pairs.inputs.rightCols(n - head);
  b.targets = pairs.targets.rightCols(n - head);
  return {std::move(a), std::move(b)};
}

/// Offsets at the training mean and ρ at the training standard deviation,
/// per dataset (series over every sampled value, maps over their pixels).
inline ScalingSet default_scaling(const TrainingPairs& pairs) {
  const InputSchema& schema = pairs.schema;
  ScalingSet s = identity_scaling(schema);
  const Eigen::Index p = pairs.inputs.cols();
  for (std::size_t d = 0; d < schema.series_count(); ++d) {
    const auto row = static_cast<Eigen::Index>(d);
    std::vector<double> samples(static_cast<std::size_t>(p) + 1);
    for (Eigen::Index j = 0; j < p; ++j) samples[static_cast<std::size_t>(j)] = pairs.inputs(row, j);
    samples.back() = pairs.targets(row, p - 1);
    std::tie(s.offset[d], s.rho[d]) = detail::mean_and_scale(samples.data(), samples.size());
  }
  std::size_t pos = 0;
  for (std::size_t m = 0; m < schema.map_count(); ++m) {
    const std::size_t len = schema.context[m].pixels;
    const std::size_t d = schema.series_count() + m;
    std::tie(s.offset[d], s.rho[d]) = detail::mean_and_scale(pairs.context.data() + pos, len);
    pos += len;
  }
  return s;
}

}  // namespace ecoavatar::avatar
