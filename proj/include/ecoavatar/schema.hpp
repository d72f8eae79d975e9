#pragma once

// Input layout of a stacked predictor: which entries of a brick input
// hold the current series values, the static context and the previous
// brick's output.

#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ecoavatar/numlin.hpp"

namespace ecoavatar::stack {

struct ContextLayout {
  std::string name;
  std::size_t pixels = 0;

  friend bool operator==(const ContextLayout&, const ContextLayout&) = default;
};

/// Brick k = 1 sees (series, context); brick k >= 2 sees
/// (series, context, previous brick output).
struct InputSchema {
  std::vector<std::string> series_names;
  std::vector<ContextLayout> context;

  [[nodiscard]] std::size_t series_count() const noexcept { return series_names.size(); }
  [[nodiscard]] std::size_t map_count() const noexcept { return context.size(); }
  /// One dataset per series plus one per map.
  [[nodiscard]] std::size_t dataset_count() const noexcept {
    return series_count() + map_count();
  }
  [[nodiscard]] std::size_t context_length() const noexcept {
    return std::accumulate(context.begin(), context.end(), std::size_t{0},
                           [](std::size_t acc, const ContextLayout& c) { return acc + c.pixels; });
  }
  /// `k` is 1-based.
  [[nodiscard]] std::size_t brick_input_length(std::size_t k) const noexcept {
    const std::size_t base = series_count() + context_length();
    return k <= 1 ? base : base + series_count();
  }

  friend bool operator==(const InputSchema&, const InputSchema&) = default;
};

/// x_k = (T(t_i), C, y_{k−1}); `previous` must be absent exactly when k = 1.
inline Vector assemble_brick_input(const InputSchema& schema, std::size_t k, const Vector& series,
                                   const Vector& context, const Vector* previous = nullptr) {
  require(k >= 1, ErrorCode::invalid_argument, "brick index is 1-based");
  require(static_cast<std::size_t>(series.size()) == schema.series_count(),
          ErrorCode::dimension_mismatch,
          "series segment has " + std::to_string(series.size()) + " entries, schema expects " +
              std::to_string(schema.series_count()));
  require(static_cast<std::size_t>(context.size()) == schema.context_length(),
          ErrorCode::dimension_mismatch,
          "context segment has " + std::to_string(context.size()) + " entries, schema expects " +
              std::to_string(schema.context_length()));
  if (k == 1) {
    require(previous == nullptr, ErrorCode::invalid_argument,
            "the first brick takes no previous output");
  } else {
    require(previous != nullptr, ErrorCode::invalid_argument,
            "brick " + std::to_string(k) + " needs the previous brick output");
    require(static_cast<std::size_t>(previous->size()) == schema.series_count(),
            ErrorCode::dimension_mismatch, "previous output segment has the wrong length");
  }

  Vector x(static_cast<Eigen::Index>(schema.brick_input_length(k)));
  x.head(series.size()) = series;
  x.segment(series.size(), context.size()) = context;
  if (previous != nullptr) x.tail(previous->size()) = *previous;
  return x;
}

}  // namespace ecoavatar::stack
