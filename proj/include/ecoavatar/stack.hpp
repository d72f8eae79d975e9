#pragma once

// Stacked one-step predictor. Every brick sees the (adimensional) current
// series values and the context; bricks above the first also see the
// previous brick's output, so the lower brick's outputs are a subset of
// the higher brick's inputs.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ecoavatar/bricks.hpp"
#include "ecoavatar/dataset.hpp"
#include "ecoavatar/schema.hpp"

namespace ecoavatar::stack {

using avatar::ScalingSet;
using avatar::TrainingPairs;
using bricks::BrickKind;

struct BrickConfig {
  BrickKind kind = BrickKind::kernel;
  /// Regularization of the output solve; for kernel bricks only the ridge
  /// λ (tikhonov mode) is used.
  numlin::InverseConfig inverse = numlin::InverseConfig::tikhonov(1e-6);
  bricks::Activation activation{bricks::ActivationKind::sigmoid};
  bricks::DsnMode dsn_mode = bricks::DsnMode::fixed_random;
  std::size_t hidden_size = 32;  ///< dsn; h1 for tensor bricks
  std::size_t hidden_size2 = 8;  ///< h2 for tensor bricks
  double kernel_width = 1.0;     ///< global multiplier on every kernel ρ
  double kernel_width2 = 2.0;    ///< second kernel of a kernel-tensor brick

  [[nodiscard]] double ridge() const noexcept { return inverse.ridge(); }
  [[nodiscard]] std::size_t kernel_count() const noexcept {
    return kind == BrickKind::kernel ? 1 : kind == BrickKind::kernel_tensor ? 2 : 0;
  }
};

struct StackConfig {
  std::size_t n_bricks = 1;
  /// One entry shared by every brick, or exactly n_bricks entries.
  std::vector<BrickConfig> bricks{BrickConfig{}};
  std::uint64_t seed = 0;

  [[nodiscard]] const BrickConfig& brick(std::size_t k) const {
    return bricks.size() == 1 ? bricks.front() : bricks.at(k);
  }

  void validate() const {
    require(n_bricks >= 1, ErrorCode::invalid_argument, "a stack needs at least one brick");
    require(bricks.size() == 1 || bricks.size() == n_bricks, ErrorCode::invalid_argument,
            "give one brick config or one per brick");
  }
};

struct StackedModel {
  InputSchema schema;
  ScalingSet scaling;
  std::vector<BrickConfig> configs;  ///< one per brick
  std::vector<bricks::Brick> bricks;
  Vector context;                    ///< raw context the model was trained with
  double training_max_abs = 0.0;     ///< largest |series value| seen in training
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t size() const noexcept { return bricks.size(); }
};

/// Kernel spec for brick `brick` (0-based) and kernel `kernel`: each series
/// and each map is a slice, and the previous-output entry of series s shares
/// series s's scale.
inline bricks::KernelSpec brick_kernel_spec(const InputSchema& schema, const ScalingSet& scaling,
                                            std::size_t brick, std::size_t kernel, double width) {
  bricks::KernelSpec spec;
  const std::size_t ns = schema.series_count();
  std::size_t pos = 0;
  for (std::size_t s = 0; s < ns; ++s, ++pos) {
    spec.slices.push_back({pos, pos + 1, width * scaling.multiplier(brick, kernel, s)});
  }
  for (std::size_t m = 0; m < schema.map_count(); ++m) {
    const std::size_t len = schema.context[m].pixels;
    if (len == 0) continue;
    spec.slices.push_back({pos, pos + len, width * scaling.multiplier(brick, kernel, ns + m)});
    pos += len;
  }
  if (brick > 0) {
    for (std::size_t s = 0; s < ns; ++s, ++pos) {
      spec.slices.push_back({pos, pos + 1, width * scaling.multiplier(brick, kernel, s)});
    }
  }
  return spec;
}

namespace detail {

inline bricks::Brick train_brick(const Matrix& u, const Matrix& v, const BrickConfig& cfg,
                                 const InputSchema& schema, const ScalingSet& scaling,
                                 std::size_t index, std::uint64_t seed) {
  switch (cfg.kind) {
    case BrickKind::linear:
      return bricks::train_linear_brick(u, v, cfg.inverse);
    case BrickKind::dsn: {
      bricks::DsnOptions opts;
      opts.hidden_size = cfg.hidden_size;
      opts.activation = cfg.activation;
      opts.mode = cfg.dsn_mode;
      opts.inverse = cfg.inverse;
      opts.seed = seed;
      return bricks::train_dsn_brick(u, v, opts);
    }
    case BrickKind::kernel:
      return bricks::train_kernel_brick(
          u, v, brick_kernel_spec(schema, scaling, index, 0, cfg.kernel_width), cfg.ridge());
    case BrickKind::tensor: {
      bricks::TensorOptions opts;
      opts.h1 = cfg.hidden_size;
      opts.h2 = cfg.hidden_size2;
      opts.activation = cfg.activation;
      opts.inverse = cfg.inverse;
      opts.seed = seed;
      return bricks::train_tensor_brick(u, v, opts);
    }
    case BrickKind::kernel_tensor:
      return bricks::train_kt_brick(
          u, v, brick_kernel_spec(schema, scaling, index, 0, cfg.kernel_width),
          brick_kernel_spec(schema, scaling, index, 1, cfg.kernel_width2), cfg.ridge());
  }
  fail(ErrorCode::invalid_argument, "unknown brick kind");
}

inline Matrix stack_inputs(const Matrix& series, const Vector& context, const Matrix* previous) {
  const Eigen::Index rows =
      series.rows() + context.size() + (previous != nullptr ? previous->rows() : 0);
  Matrix u(rows, series.cols());
  u.topRows(series.rows()) = series;
  u.middleRows(series.rows(), context.size()) = context.replicate(1, series.cols());
  if (previous != nullptr) u.bottomRows(previous->rows()) = *previous;
  return u;
}

// Series rows scaled with the series (offset, ρ).
inline Matrix scale_series(const Matrix& x, const ScalingSet& s) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto d = static_cast<std::size_t>(r);
    out.row(r) = (x.row(r).array() - s.offset[d]) / s.rho[d];
  }
  return out;
}

inline Matrix unscale_series(const Matrix& x, const ScalingSet& s) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto d = static_cast<std::size_t>(r);
    out.row(r) = x.row(r).array() * s.rho[d] + s.offset[d];
  }
  return out;
}

inline Vector scale_context(const Vector& c, const ScalingSet& s, const InputSchema& schema) {
  Vector out(c.size());
  Eigen::Index pos = 0;
  for (std::size_t m = 0; m < schema.map_count(); ++m) {
    const std::size_t d = schema.series_count() + m;
    const auto len = static_cast<Eigen::Index>(schema.context[m].pixels);
    out.segment(pos, len) = (c.segment(pos, len).array() - s.offset[d]) / s.rho[d];
    pos += len;
  }
  return out;
}

inline void check_state(const StackedModel& m, Eigen::Index series_rows, const Vector& context) {
  require(static_cast<std::size_t>(series_rows) == m.schema.series_count(),
          ErrorCode::dimension_mismatch, "series state does not match the model schema");
  require(static_cast<std::size_t>(context.size()) == m.schema.context_length(),
          ErrorCode::dimension_mismatch, "context vector does not match the model schema");
}

}  // namespace detail

/// Trains bricks bottom-up. Brick k's inputs are the scaled raw inputs plus
/// brick k−1's predictions on the training set (no teacher forcing).
/// Without an explicit scaling set the training-data default is used.
inline StackedModel train_stack(const TrainingPairs& pairs, const StackConfig& config,
                                const ScalingSet* scaling = nullptr) {
  config.validate();
  require(pairs.size() >= 1, ErrorCode::invalid_argument, "no training pairs");
  require(static_cast<std::size_t>(pairs.inputs.rows()) == pairs.schema.series_count() &&
              pairs.targets.rows() == pairs.inputs.rows() &&
              pairs.targets.cols() == pairs.inputs.cols() &&
              static_cast<std::size_t>(pairs.context.size()) == pairs.schema.context_length(),
          ErrorCode::dimension_mismatch, "training pairs do not match their schema");

  StackedModel model;
  model.schema = pairs.schema;
  model.scaling = scaling != nullptr ? *scaling : avatar::default_scaling(pairs);
  model.scaling.validate(pairs.schema.dataset_count());
  model.context = pairs.context;
  model.seed = config.seed;
  model.training_max_abs =
      std::max(pairs.inputs.cwiseAbs().maxCoeff(), pairs.targets.cwiseAbs().maxCoeff());

  const Matrix xs = detail::scale_series(pairs.inputs, model.scaling);
  const Matrix ys = detail::scale_series(pairs.targets, model.scaling);
  const Vector cs = detail::scale_context(pairs.context, model.scaling, model.schema);

  Matrix previous;
  for (std::size_t k = 0; k < config.n_bricks; ++k) {
    const BrickConfig& cfg = config.brick(k);
    const Matrix u = detail::stack_inputs(xs, cs, k == 0 ? nullptr : &previous);
    try {
      model.bricks.push_back(detail::train_brick(u, ys, cfg, model.schema, model.scaling, k,
                                                 config.seed + k));
    } catch (const Error& e) {
      throw Error(e.code(), "brick " + std::to_string(k + 1) + ": " + e.what());
    }
    model.configs.push_back(cfg);
    previous = bricks::apply_columns(model.bricks.back(), u);
  }
  return model;
}

/// Batched forward pass: column j of `series` is one current state.
inline Matrix predict_columns(const StackedModel& m, const Matrix& series, const Vector& context) {
  detail::check_state(m, series.rows(), context);
  const Matrix xs = detail::scale_series(series, m.scaling);
  const Vector cs = detail::scale_context(context, m.scaling, m.schema);
  Matrix previous;
  for (std::size_t k = 0; k < m.bricks.size(); ++k) {
    const Matrix u = detail::stack_inputs(xs, cs, k == 0 ? nullptr : &previous);
    previous = bricks::apply_columns(m.bricks[k], u);
  }
  return detail::unscale_series(previous, m.scaling);
}

/// Prediction of T(t_{i+1}) from T(t_i) and the context.
inline Vector predict_one_step(const StackedModel& m, const Vector& series, const Vector& context) {
  return predict_columns(m, Matrix(series), context).col(0);
}

inline double rmse(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols() && a.size() > 0,
          ErrorCode::dimension_mismatch, "rmse: shapes differ");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

/// One-step RMSE of the model over a set of pairs, in raw units.
inline double pairs_rmse(const StackedModel& m, const TrainingPairs& pairs) {
  return rmse(predict_columns(m, pairs.inputs, pairs.context), pairs.targets);
}

struct ParameterCounts {
  std::size_t datasets = 0;
  std::size_t kernels_per_brick = 0;
  std::size_t scaling_factors = 0;
  std::size_t ridge_coefficients = 0;
  std::size_t total_unknowns = 0;
  std::size_t series_data_points = 0;
  std::size_t context_data_points = 0;
  std::size_t total_data_points = 0;
};

/// Unknowns of a kernel stack (scale factors + one ridge λ per brick) and
/// the data available to determine them. Each kernel carries a full set of
/// per-dataset scales; per-brick scaling replicates that set for every
/// brick. Non-kernel kinds only carry the input scaling.
inline ParameterCounts count_free_parameters(const InputSchema& schema, std::size_t n_bricks,
                                             BrickKind kind, bool per_brick_scaling,
                                             std::size_t series_length) {
  ParameterCounts c;
  c.datasets = schema.dataset_count();
  c.kernels_per_brick = kind == BrickKind::kernel ? 1 : kind == BrickKind::kernel_tensor ? 2 : 0;
  const std::size_t sets = std::max<std::size_t>(c.kernels_per_brick, 1);
  c.scaling_factors = c.datasets * sets * (per_brick_scaling && c.kernels_per_brick > 0 ? n_bricks : 1);
  c.ridge_coefficients = n_bricks;
  c.total_unknowns = c.scaling_factors + c.ridge_coefficients;
  c.series_data_points = schema.series_count() * series_length;
  c.context_data_points = schema.context_length();
  c.total_data_points = c.series_data_points + c.context_data_points;
  return c;
}

}  // namespace ecoavatar::stack
