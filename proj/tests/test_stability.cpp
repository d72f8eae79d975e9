#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace ecoavatar;
using namespace ecoavatar::stability;
using testing_support::linear_model;
using testing_support::random_matrix;

namespace {

// Q diag(values) Qᵀ with a random orthogonal Q.
Matrix symmetric_with_spectrum(const std::vector<double>& values, std::mt19937_64& rng, Matrix* q_out = nullptr) {
  const auto n = static_cast<Eigen::Index>(values.size());
  const Matrix q = Eigen::HouseholderQR<Matrix>(random_matrix(n, n, rng)).householderQ();
  Vector d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = values[static_cast<std::size_t>(i)];
  if (q_out != nullptr) *q_out = q;
  return q * d.asDiagonal() * q.transpose();
}

stack::StackedModel kernel_lv_model(const avatar::TimeSeriesSet& train) {
  const auto pairs = avatar::build_training_pairs(train, {});
  stack::StackConfig cfg;
  cfg.n_bricks = 3;
  cfg.bricks[0].kind = bricks::BrickKind::kernel;
  cfg.bricks[0].inverse = numlin::InverseConfig::tikhonov(1e-6);
  return stack::train_stack(pairs, cfg);
}

}  // namespace

// ---------------------------------------------------------------------------
// Rollout

TEST(Rollout, GeometricDecayIsExact) {
  const auto m = linear_model(0.5 * Matrix::Identity(2, 2));
  Vector x0(2);
  x0 << 3.0, -1.5;
  const auto r = rollout(m, x0, Vector(0), 40);
  ASSERT_EQ(r.steps(), 40u);
  EXPECT_FALSE(r.diverged);
  for (std::size_t k = 1; k <= 40; ++k) {
    const Vector expected = std::ldexp(1.0, -static_cast<int>(k)) * x0;
    EXPECT_EQ(r.predicted.col(static_cast<Eigen::Index>(k - 1)), expected) << "step " << k;
  }
}

TEST(Rollout, GeometricGrowthTripsFlag) {
  const auto m = linear_model(2.0 * Matrix::Identity(2, 2));
  Vector x0(2);
  x0 << 0.6, 0.8;  // unit norm
  const double bound = default_rollout_options(m).divergence_bound;
  const auto limit = static_cast<std::size_t>(std::ceil(std::log2(bound / x0.norm())));
  const auto r = rollout(m, x0, Vector(0), 1000);
  ASSERT_TRUE(r.diverged);
  ASSERT_TRUE(r.divergence_step.has_value());
  EXPECT_LE(*r.divergence_step, limit);
  EXPECT_EQ(r.steps(), *r.divergence_step - 1);
}

TEST(Rollout, NonFinitePredictionTruncates) {
  int calls = 0;
  auto step = [&](const Vector& x) -> Vector {
    return ++calls == 3 ? Vector::Constant(x.size(), std::nan("")) : x;
  };
  const auto r = rollout(step, Vector::Ones(2), 10);
  EXPECT_TRUE(r.diverged);
  EXPECT_EQ(r.divergence_step, std::optional<std::size_t>(3));
  EXPECT_EQ(r.steps(), 2u);
}

TEST(Rollout, ErrorsAgainstShortReference) {
  const auto m = linear_model(0.9 * Matrix::Identity(2, 2));
  const Matrix reference = Matrix::Zero(2, 5);
  const auto r = rollout(m, Vector::Ones(2), Vector(0), 8, &reference);
  EXPECT_EQ(r.errors.size(), 5u);
  const auto longer = rollout(m, Vector::Ones(2), Vector(0), 3, &reference);
  ASSERT_EQ(longer.errors.size(), 3u);
  EXPECT_DOUBLE_EQ(longer.errors[0], 0.9);
  EXPECT_THROW(rollout(m, Vector::Ones(2), Vector(0), 0), Error);
  const Matrix bad = Matrix::Zero(3, 5);
  EXPECT_THROW(rollout(m, Vector::Ones(2), Vector(0), 2, &bad), Error);
}

TEST(Rollout, KernelStackCurveIsReproducible) {
  const auto ts = testing_support::lv_series(30.0, 1e-3, 100);
  const auto [train, validation] = split_train_validate(ts, 0.8);
  const Vector start = train.values.rightCols(1);
  const auto m1 = kernel_lv_model(train);
  const auto m2 = kernel_lv_model(train);
  const auto a = rollout(m1, start, Vector(0), validation.size(), &validation.values);
  const auto b = rollout(m1, start, Vector(0), validation.size(), &validation.values);
  const auto c = rollout(m2, start, Vector(0), validation.size(), &validation.values);
  ASSERT_EQ(a.errors.size(), validation.size());
  EXPECT_EQ(a.errors, b.errors);
  EXPECT_EQ(a.errors, c.errors);
  EXPECT_EQ(a.predicted, c.predicted);
}

// ---------------------------------------------------------------------------
// Linear boundedness

TEST(LinearRollout, ContractiveRunsTenThousandSteps) {
  std::mt19937_64 rng(21);
  const Matrix m = symmetric_with_spectrum({0.9, 0.5, -0.7, 0.1}, rng);
  const auto model = linear_model(m);
  ASSERT_NEAR(linear_stability(model)->radius, 0.9, 1e-10);
  const Vector x0 = random_matrix(4, 1, rng, 10.0).col(0);
  const auto r = rollout(model, x0, Vector(0), 10000);
  EXPECT_FALSE(r.diverged);
  ASSERT_EQ(r.steps(), 10000u);
  double previous = x0.norm();
  for (Eigen::Index k = 0; k < r.predicted.cols(); ++k) {
    const double n = r.predicted.col(k).norm();
    EXPECT_LE(n, previous);
    previous = n;
  }
}

TEST(LinearRollout, ExpansiveTripsFlag) {
  std::mt19937_64 rng(22);
  Matrix q;
  const Matrix m = symmetric_with_spectrum({1.1, 0.5, -0.7, 0.1}, rng, &q);
  const auto model = linear_model(m);
  ASSERT_NEAR(linear_stability(model)->radius, 1.1, 1e-10);
  const auto r = rollout(model, Vector(q.col(0)), Vector(0), 10000);
  EXPECT_TRUE(r.diverged);
  const auto limit = static_cast<std::size_t>(std::ceil(std::log(1e6) / std::log(1.1)));
  EXPECT_LE(*r.divergence_step, limit + 1);
}

// ---------------------------------------------------------------------------
// Split

TEST(SplitTrainValidate, ConsecutiveParts) {
  std::mt19937_64 rng(23);
  avatar::TimeSeriesSet ts;
  ts.names = {"a", "b"};
  ts.units = {"", ""};
  for (int i = 0; i < 100; ++i) ts.times.push_back(0.5 * i);
  ts.values = random_matrix(2, 100, rng);
  const auto [train, validation] = split_train_validate(ts, 0.8);
  EXPECT_EQ(train.size(), 80u);
  EXPECT_EQ(validation.size(), 20u);
  EXPECT_LT(train.times.back(), validation.times.front());
  Matrix joined(2, 100);
  joined << train.values, validation.values;
  EXPECT_EQ(joined, ts.values);
  std::vector<double> times = train.times;
  times.insert(times.end(), validation.times.begin(), validation.times.end());
  EXPECT_EQ(times, ts.times);
  EXPECT_EQ(train.names, ts.names);
  EXPECT_THROW(split_train_validate(ts, 0.99), Error);
  EXPECT_THROW(split_train_validate(ts, 0.01), Error);
  EXPECT_THROW(split_train_validate(ts, 1.0), Error);
}

// ---------------------------------------------------------------------------
// Horizon

TEST(Horizon, ReplayOracleReachesFullLength) {
  const auto ts = testing_support::lv_series(30.0, 1e-3, 100);
  const auto [train, validation] = split_train_validate(ts, 0.8);
  const Matrix& v = validation.values;
  Eigen::Index next = 0;
  auto replay = [&](const Vector&) -> Vector { return v.col(next++); };
  const auto report = estimate_horizon(replay, train.values.rightCols(1), v, 0.2);
  EXPECT_EQ(report.horizon, validation.size());
  EXPECT_EQ(report.validation_length, validation.size());
  for (double e : report.error_curve) EXPECT_EQ(e, 0.0);
}

TEST(Horizon, InfiniteEpsilonNeverTriggers) {
  const auto ts = testing_support::lv_series(30.0, 1e-3, 100);
  const auto [train, validation] = split_train_validate(ts, 0.8);
  auto wild = [](const Vector& x) -> Vector { return -3.0 * x; };
  const auto report = estimate_horizon(wild, train.values.rightCols(1), validation.values,
                                       std::numeric_limits<double>::infinity());
  EXPECT_EQ(report.horizon, validation.size());
}

TEST(Horizon, PersistenceMatchesDirectScan) {
  const auto ts = testing_support::lv_series(40.0, 1e-3, 100);
  const auto [train, validation] = split_train_validate(ts, 0.5);
  const Vector start = train.values.rightCols(1);
  auto persist = [](const Vector& x) -> Vector { return x; };
  const auto report = estimate_horizon(persist, start, validation.values, 0.2);

  // scan: cumulative RMSE of the frozen state against the truth, per series
  const Matrix& v = validation.values;
  std::vector<double> sd(2), sq(2, 0.0);
  for (int s = 0; s < 2; ++s) {
    double mean = 0.0;
    for (Eigen::Index j = 0; j < v.cols(); ++j) mean += v(s, j);
    mean /= static_cast<double>(v.cols());
    double var = 0.0;
    for (Eigen::Index j = 0; j < v.cols(); ++j) var += (v(s, j) - mean) * (v(s, j) - mean);
    sd[static_cast<std::size_t>(s)] = std::sqrt(var / static_cast<double>(v.cols()));
  }
  std::size_t expected = static_cast<std::size_t>(v.cols());
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    double err = 0.0;
    for (int s = 0; s < 2; ++s) {
      const double d = start(s) - v(s, j);
      sq[static_cast<std::size_t>(s)] += d * d;
      err += std::sqrt(sq[static_cast<std::size_t>(s)] / static_cast<double>(j + 1)) /
             sd[static_cast<std::size_t>(s)];
    }
    err /= 2.0;
    EXPECT_NEAR(report.error_curve[static_cast<std::size_t>(j)], err, 1e-12 * (1.0 + err));
    if (err > 0.2) {
      expected = static_cast<std::size_t>(j + 1);
      break;
    }
  }
  EXPECT_EQ(report.horizon, expected);
  EXPECT_GT(report.horizon, 1u);
  EXPECT_LT(report.horizon, validation.size());
}

TEST(Horizon, MonotoneInEpsilon) {
  const auto ts = testing_support::lv_series(30.0, 1e-3, 100);
  const auto [train, validation] = split_train_validate(ts, 0.8);
  const auto m = kernel_lv_model(train);
  std::size_t previous = 0;
  for (double eps : {0.05, 0.1, 0.2, 0.5}) {
    const auto r = estimate_horizon(m, train.values.rightCols(1), validation, Vector(0), eps);
    EXPECT_GE(r.horizon, previous) << "epsilon " << eps;
    EXPECT_GE(r.horizon, 1u);
    EXPECT_LE(r.horizon, validation.size());
    EXPECT_FALSE(r.spectral_radius.has_value());
    previous = r.horizon;
  }
  auto persist = [](const Vector& x) -> Vector { return x; };
  std::vector<std::size_t> drift;
  for (double eps : {0.05, 0.1, 0.2, 0.5})
    drift.push_back(estimate_horizon(persist, train.values.rightCols(1), validation.values, eps).horizon);
  EXPECT_TRUE(std::is_sorted(drift.begin(), drift.end()));
  EXPECT_LT(drift.front(), drift.back());
}

TEST(Horizon, ValidationValuesNeverReachThePredictor) {
  const auto ts = testing_support::lv_series(30.0, 1e-3, 100);
  const auto [train, validation] = split_train_validate(ts, 0.8);
  const Vector start = train.values.rightCols(1);
  std::vector<Vector> seen_a, seen_b;
  auto step_a = [&](const Vector& x) -> Vector {
    seen_a.push_back(x);
    return 0.99 * x;
  };
  auto step_b = [&](const Vector& x) -> Vector {
    seen_b.push_back(x);
    return 0.99 * x;
  };
  Matrix perturbed = validation.values;
  perturbed.array() += 1000.0;
  estimate_horizon(step_a, start, validation.values, 0.2);
  estimate_horizon(step_b, start, perturbed, 0.2);
  ASSERT_EQ(seen_a.size(), seen_b.size());
  for (std::size_t i = 0; i < seen_a.size(); ++i) EXPECT_EQ(seen_a[i], seen_b[i]);
}

TEST(Horizon, Errors) {
  auto persist = [](const Vector& x) -> Vector { return x; };
  const Matrix v = Matrix::Ones(2, 5);
  EXPECT_THROW(estimate_horizon(persist, Vector::Ones(2), v, 0.0), Error);
  EXPECT_THROW(estimate_horizon(persist, Vector::Ones(2), v, -0.1), Error);
  EXPECT_THROW(estimate_horizon(persist, Vector::Ones(2), v, std::nan("")), Error);
  EXPECT_THROW(estimate_horizon(persist, Vector::Ones(2), Matrix::Ones(2, 1), 0.2), Error);
}

TEST(HorizonFromCurve, FirstExceedanceIsOneBased) {
  EXPECT_EQ(horizon_from_curve({0.1, 0.3, 0.1}, 0.2), 2u);
  EXPECT_EQ(horizon_from_curve({0.1, 0.2, 0.1}, 0.2), 3u);
  EXPECT_EQ(horizon_from_curve({0.5}, 0.2), 1u);
}

// ---------------------------------------------------------------------------
// Spectral diagnostics

TEST(LinearStability, Examples) {
  EXPECT_NEAR(linear_stability(linear_model(0.9 * Matrix::Identity(3, 3)))->radius, 0.9, 1e-12);
  const auto ts = testing_support::lv_series(10.0, 1e-3, 100);
  EXPECT_FALSE(linear_stability(kernel_lv_model(ts)).has_value());
}

TEST(LinearStability, ContextColumnsExcluded) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 10; ++trial) {
    auto model = linear_model(Matrix::Identity(4, 4));
    model.schema.context = {{"map", 3}};
    model.scaling = avatar::identity_scaling(model.schema);
    model.context = Vector::Ones(3);
    const Matrix map = random_matrix(4, 7, rng);
    model.bricks = {bricks::LinearBrick{map}};
    const double oracle =
        Eigen::EigenSolver<Matrix>(map.leftCols(4)).eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_NEAR(linear_stability(model)->radius, oracle, 1e-6);
  }
}

TEST(LinearStability, ReportedByModelHorizon) {
  const auto model = linear_model(0.9 * Matrix::Identity(2, 2));
  avatar::TimeSeriesSet v;
  v.names = {"s0", "s1"};
  v.units = {"", ""};
  v.times = {0.0, 1.0, 2.0};
  v.values = Matrix::Ones(2, 3);
  const auto r = estimate_horizon(model, Vector::Ones(2), v, Vector(0), 0.2);
  ASSERT_TRUE(r.spectral_radius.has_value());
  EXPECT_NEAR(*r.spectral_radius, 0.9, 1e-12);
}
