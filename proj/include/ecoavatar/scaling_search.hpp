#pragma once

// Derivative-free tuning of the per-dataset scaling factors ρ_d and the
// per-brick ridge coefficients λ_k against one-step validation error.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "ecoavatar/stack.hpp"

namespace ecoavatar::avatar {

struct ScalingSearchOptions {
  /// Multiplicative candidates tried around the current value of each coordinate.
  std::vector<double> grid{0.25, 0.5, 2.0, 4.0};
  std::size_t max_passes = 20;
  bool tune_lambda = true;
  /// Also tune per-brick, per-kernel multipliers (replicated scaling).
  bool per_brick = false;
};

struct ScalingSearchResult {
  ScalingSet scaling;
  std::vector<double> lambdas;     ///< final λ_k, one per brick
  stack::StackConfig config;       ///< input config with the tuned λ_k
  std::vector<double> loss_trace;  ///< initial loss, then each accepted improvement
  std::size_t evaluations = 0;
  std::size_t passes = 0;

  [[nodiscard]] double initial_loss() const { return loss_trace.front(); }
  [[nodiscard]] double best_loss() const { return loss_trace.back(); }
};

/// Stack config with one explicit entry per brick.
inline stack::StackConfig expand_brick_configs(const stack::StackConfig& config) {
  stack::StackConfig out = config;
  out.bricks.clear();
  for (std::size_t k = 0; k < config.n_bricks; ++k) out.bricks.push_back(config.brick(k));
  return out;
}

/// Coordinate descent: each coordinate in turn is swept over value * g for
/// g in the grid and moved to the best candidate if that strictly lowers the
/// validation RMSE of the retrained stack. Stops after a full pass with no
/// accepted move.
inline ScalingSearchResult optimize_scaling(const TrainingPairs& train,
                                            const TrainingPairs& validation,
                                            const stack::StackConfig& config,
                                            const ScalingSet& initial,
                                            const ScalingSearchOptions& opts = {}) {
  require(!opts.grid.empty(), ErrorCode::invalid_argument, "scaling search grid is empty");
  for (double g : opts.grid) {
    require(std::isfinite(g) && g > 0.0, ErrorCode::invalid_argument,
            "scaling grid multipliers must be positive");
  }
  require(validation.size() >= 1, ErrorCode::invalid_argument, "validation split is empty");
  config.validate();
  initial.validate(train.schema.dataset_count());

  stack::StackConfig cfg = expand_brick_configs(config);
  ScalingSet scaling = initial;
  const std::size_t datasets = train.schema.dataset_count();

  if (opts.per_brick && scaling.brick_rho.empty()) {
    scaling.brick_rho.resize(cfg.n_bricks);
    for (std::size_t k = 0; k < cfg.n_bricks; ++k) {
      scaling.brick_rho[k].assign(cfg.brick(k).kernel_count(), std::vector<double>(datasets, 1.0));
    }
  }

  ScalingSearchResult result;
  auto evaluate = [&]() {
    ++result.evaluations;
    try {
      const auto model = stack::train_stack(train, cfg, &scaling);
      const double loss = stack::pairs_rmse(model, validation);
      return std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // Every tunable coordinate as a reference into the working state.
  std::vector<std::reference_wrapper<double>> coords;
  for (double& r : scaling.rho) coords.emplace_back(r);
  for (auto& brick : scaling.brick_rho)
    for (auto& kernel : brick)
      for (double& r : kernel) coords.emplace_back(r);
  if (opts.tune_lambda) {
    for (auto& b : cfg.bricks) {
      if (b.inverse.mode == numlin::InverseMode::tikhonov && b.inverse.lambda > 0.0)
        coords.emplace_back(b.inverse.lambda);
    }
  }

  double best = evaluate();
  result.loss_trace.push_back(best);

  for (std::size_t pass = 0; pass < opts.max_passes; ++pass) {
    ++result.passes;
    bool improved = false;
    for (double& value : coords) {
      const double current = value;
      double best_value = current;
      for (double g : opts.grid) {
        if (g == 1.0) continue;
        value = current * g;
        const double loss = evaluate();
        if (loss < best) {
          best = loss;
          best_value = value;
        }
      }
      value = best_value;
      if (best_value != current) {
        improved = true;
        result.loss_trace.push_back(best);
      }
    }
    if (!improved) break;
  }

  result.scaling = scaling;
  result.config = cfg;
  for (const auto& b : cfg.bricks) result.lambdas.push_back(b.ridge());
  return result;
}

}  // namespace ecoavatar::avatar
