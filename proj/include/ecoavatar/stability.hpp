#pragma once

// Iterated rollout T → M(T) → M(M(T)) … of a one-step predictor and the
// empirical reliability horizon on a held-out consecutive segment.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "ecoavatar/dataset.hpp"
#include "ecoavatar/numlin.hpp"
#include "ecoavatar/stack.hpp"

namespace ecoavatar::stability {

using avatar::TimeSeriesSet;
using stack::StackedModel;

/// Any callable advancing a series state by one step.
template <class F>
concept StepPredictor = std::invocable<const F&, const Vector&> &&
                        std::convertible_to<std::invoke_result_t<const F&, const Vector&>, Vector>;

struct RolloutOptions {
  /// A prediction whose norm exceeds this (or is non-finite) flags divergence.
  double divergence_bound = std::numeric_limits<double>::infinity();
};

struct RolloutResult {
  Matrix predicted;            ///< series x completed steps
  std::vector<double> errors;  ///< per-step RMSE across series vs the reference
  bool diverged = false;
  std::optional<std::size_t> divergence_step;  ///< 1-based step that tripped the flag

  [[nodiscard]] std::size_t steps() const noexcept {
    return static_cast<std::size_t>(predicted.cols());
  }
};

/// Feeds each prediction back as the next input. `reference`, when given,
/// holds the true states for steps 1, 2, … as columns. Stops at the first
/// divergent prediction, which is not stored.
template <StepPredictor F>
RolloutResult rollout(const F& step, const Vector& start, std::size_t steps,
                      const Matrix* reference = nullptr, const RolloutOptions& opts = {}) {
  require(steps >= 1, ErrorCode::invalid_argument, "rollout needs at least one step");
  if (reference != nullptr) {
    require(reference->rows() == start.size(), ErrorCode::dimension_mismatch,
            "rollout reference does not match the state dimension");
  }
  RolloutResult out;
  out.predicted.resize(start.size(), static_cast<Eigen::Index>(steps));
  Vector state = start;
  std::size_t done = 0;
  for (std::size_t k = 1; k <= steps; ++k) {
    Vector next = step(state);
    require(next.size() == start.size(), ErrorCode::dimension_mismatch,
            "predictor changed the state dimension");
    if (!next.allFinite() || next.norm() > opts.divergence_bound) {
      out.diverged = true;
      out.divergence_step = k;
      break;
    }
    out.predicted.col(static_cast<Eigen::Index>(k - 1)) = next;
    if (reference != nullptr && static_cast<Eigen::Index>(k) <= reference->cols()) {
      const Vector diff = next - reference->col(static_cast<Eigen::Index>(k - 1));
      out.errors.push_back(std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size())));
    }
    state = std::move(next);
    ++done;
  }
  out.predicted.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(done));
  return out;
}

/// Default blow-up bound: 1e6 times the largest absolute training value.
inline RolloutOptions default_rollout_options(const StackedModel& m) {
  return {1e6 * std::max(m.training_max_abs, 1.0)};
}

inline RolloutResult rollout(const StackedModel& m, const Vector& start, const Vector& context,
                             std::size_t steps, const Matrix* reference = nullptr) {
  return rollout([&](const Vector& x) { return stack::predict_one_step(m, x, context); }, start,
                 steps, reference, default_rollout_options(m));
}

/// Consecutive split: train holds the first floor(fraction * N) points.
inline std::pair<TimeSeriesSet, TimeSeriesSet> split_train_validate(const TimeSeriesSet& ts,
                                                                    double fraction) {
  require(fraction > 0.0 && fraction < 1.0, ErrorCode::invalid_argument,
          "split fraction must lie in (0, 1)");
  const std::size_t n = ts.size();
  const auto head = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  require(head >= 2 && n - head >= 2, ErrorCode::invalid_argument,
          "split leaves a part with fewer than 2 points");
  return {avatar::slice(ts, 0, head), avatar::slice(ts, head, n - head)};
}

struct StabilityReport {
  std::size_t horizon = 0;
  std::size_t validation_length = 0;
  std::vector<double> error_curve;  ///< normalized cumulative RMSE per step
  double epsilon = 0.2;
  bool diverged = false;
  std::optional<double> spectral_radius;
};

inline constexpr double default_epsilon = 0.2;

/// Normalized error after each step k: for each series the RMSE over steps
/// 1..k divided by that series' standard deviation over the validation
/// window, averaged over series. Steps after a divergence count as +inf.
inline std::vector<double> normalized_error_curve(const Matrix& predicted, const Matrix& truth) {
  require(predicted.rows() == truth.rows(), ErrorCode::dimension_mismatch,
          "error curve: series counts differ");
  const Eigen::Index ns = truth.rows();
  const Eigen::Index n = truth.cols();
  Vector scale(ns);
  for (Eigen::Index s = 0; s < ns; ++s) {
    const double mean = truth.row(s).mean();
    const double sd = std::sqrt((truth.row(s).array() - mean).square().mean());
    scale(s) = sd > 0.0 ? sd : 1.0;
  }
  std::vector<double> curve(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Vector sq = Vector::Zero(ns);
  for (Eigen::Index k = 0; k < std::min(n, predicted.cols()); ++k) {
    sq += (predicted.col(k) - truth.col(k)).cwiseAbs2();
    const Vector per_series =
        (sq.array() / static_cast<double>(k + 1)).sqrt() / scale.array();
    curve[static_cast<std::size_t>(k)] = per_series.mean();
  }
  return curve;
}

/// First 1-based step whose error exceeds ε, or the curve length if none.
inline std::size_t horizon_from_curve(const std::vector<double>& curve, double epsilon) {
  for (std::size_t k = 0; k < curve.size(); ++k) {
    if (curve[k] > epsilon) return k + 1;
  }
  return curve.size();
}

/// Rolls out from `start` (the last training state) across the validation
/// window. Only `start` feeds the predictor; validation values are used
/// solely for scoring.
template <StepPredictor F>
StabilityReport estimate_horizon(const F& step, const Vector& start, const Matrix& validation,
                                 double epsilon = default_epsilon,
                                 const RolloutOptions& opts = {}) {
  require(!std::isnan(epsilon) && epsilon > 0.0, ErrorCode::invalid_argument,
          "unreliability threshold must be positive");
  require(validation.cols() >= 2, ErrorCode::invalid_argument,
          "validation window needs at least 2 points");
  const auto steps = static_cast<std::size_t>(validation.cols());
  const RolloutResult run = rollout(step, start, steps, nullptr, opts);
  StabilityReport report;
  report.epsilon = epsilon;
  report.validation_length = steps;
  report.diverged = run.diverged;
  report.error_curve = normalized_error_curve(run.predicted, validation);
  report.horizon = horizon_from_curve(report.error_curve, epsilon);
  return report;
}

/// Spectral radius of the series-to-series block of a single linear brick
/// (context columns excluded); empty for any other model.
inline std::optional<numlin::SpectralEstimate> linear_stability(const StackedModel& m) {
  if (m.bricks.size() != 1) return std::nullopt;
  const auto* lin = std::get_if<bricks::LinearBrick>(&m.bricks.front());
  if (lin == nullptr) return std::nullopt;
  const auto ns = static_cast<Eigen::Index>(m.schema.series_count());
  return numlin::spectral_radius(lin->map.topLeftCorner(ns, ns), 1e-12, 100000);
}

inline StabilityReport estimate_horizon(const StackedModel& m, const Vector& start,
                                        const TimeSeriesSet& validation, const Vector& context,
                                        double epsilon = default_epsilon) {
  auto report = estimate_horizon(
      [&](const Vector& x) { return stack::predict_one_step(m, x, context); }, start,
      validation.values, epsilon, default_rollout_options(m));
  if (const auto est = linear_stability(m)) report.spectral_radius = est->radius;
  return report;
}

}  // namespace ecoavatar::stability
