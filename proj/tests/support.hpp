#pragma once

#include <random>

#include "ecoavatar/ecoavatar.hpp"

namespace testing_support {

using ecoavatar::Matrix;
using ecoavatar::Vector;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline Matrix random_rank(Eigen::Index rows, Eigen::Index cols, Eigen::Index rank,
                          std::mt19937_64& rng) {
  return random_matrix(rows, rank, rng) * random_matrix(rank, cols, rng);
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

/// Reference predator-prey trajectory as a time-series set.
inline ecoavatar::avatar::TimeSeriesSet lv_series(double duration, double dt, std::size_t stride) {
  const ecoavatar::ecolv::LVParams p{1.1, 0.4, 0.4, 0.1, false};
  const auto steps = static_cast<std::size_t>(std::llround(duration / dt));
  auto traj = ecoavatar::ecolv::subsample(ecoavatar::ecolv::simulate_lv(p, 10.0, 5.0, dt, steps),
                                          stride);
  return ecoavatar::io::to_timeseries(traj);
}

/// Single-brick linear model with identity scaling and no context.
inline ecoavatar::stack::StackedModel linear_model(const Matrix& m) {
  ecoavatar::stack::StackedModel model;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    model.schema.series_names.push_back("s" + std::to_string(i));
  model.scaling = ecoavatar::avatar::identity_scaling(model.schema);
  ecoavatar::stack::BrickConfig cfg;
  cfg.kind = ecoavatar::bricks::BrickKind::linear;
  model.configs = {cfg};
  model.bricks = {ecoavatar::bricks::LinearBrick{m}};
  model.context = Vector(0);
  model.training_max_abs = 1.0;
  return model;
}

}  // namespace testing_support
