#include <gtest/gtest.h>

#include "support.hpp"

using namespace ecoavatar;
using namespace ecoavatar::stack;
using bricks::BrickKind;
using testing_support::random_matrix;

namespace {

InputSchema make_schema(std::size_t series, std::vector<std::size_t> pixels) {
  InputSchema s;
  for (std::size_t i = 0; i < series; ++i) s.series_names.push_back("s" + std::to_string(i));
  for (std::size_t m = 0; m < pixels.size(); ++m) s.context.push_back({"m" + std::to_string(m), pixels[m]});
  return s;
}

avatar::TrainingPairs lv_pairs(std::size_t points_stride = 100) {
  auto ts = testing_support::lv_series(30.0, 1e-3, points_stride);
  avatar::ContextMap map;
  map.name = "dtm";
  map.n_rows = map.n_cols = 10;
  map.values.assign(100, 3.0);
  return avatar::build_training_pairs(ts, {map});
}

StackConfig kernel_stack(std::size_t n, double lambda) {
  StackConfig cfg;
  cfg.n_bricks = n;
  cfg.bricks[0].kind = BrickKind::kernel;
  cfg.bricks[0].inverse = numlin::InverseConfig::tikhonov(lambda);
  return cfg;
}

}  // namespace

TEST(AssembleBrickInput, PaperLengths) {
  const auto schema = make_schema(40, {10000});
  const Vector series = Vector::Zero(40);
  const Vector context = Vector::Zero(10000);
  const Vector prev = Vector::Zero(40);
  EXPECT_EQ(assemble_brick_input(schema, 2, series, context, &prev).size(), 10080);
  EXPECT_EQ(assemble_brick_input(schema, 1, series, context).size(), 10040);
  EXPECT_EQ(schema.brick_input_length(2), 10080u);
}

TEST(AssembleBrickInput, NoContext) {
  const auto schema = make_schema(3, {});
  const Vector prev = Vector::Ones(3);
  EXPECT_EQ(assemble_brick_input(schema, 3, Vector::Zero(3), Vector(0), &prev).size(), 6);
}

TEST(AssembleBrickInput, Errors) {
  const auto schema = make_schema(2, {4});
  const Vector s = Vector::Zero(2), c = Vector::Zero(4), p = Vector::Zero(2);
  EXPECT_THROW(assemble_brick_input(schema, 1, s, c, &p), Error);
  EXPECT_THROW(assemble_brick_input(schema, 2, s, c), Error);
  EXPECT_THROW(assemble_brick_input(schema, 0, s, c), Error);
  EXPECT_THROW(assemble_brick_input(schema, 1, Vector::Zero(3), c), Error);
  EXPECT_THROW(assemble_brick_input(schema, 1, s, Vector::Zero(5)), Error);
  const Vector bad = Vector::Zero(3);
  EXPECT_THROW(assemble_brick_input(schema, 2, s, c, &bad), Error);
}

TEST(AssembleBrickInput, RandomSchemasLayoutAndSubset) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> count(0, 5), pix(1, 30);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t ns = count(rng) + 1;
    std::vector<std::size_t> pixels(count(rng));
    for (auto& p : pixels) p = pix(rng);
    const auto schema = make_schema(ns, pixels);
    std::size_t total = 0;
    for (auto p : pixels) total += p;
    const Vector s = random_matrix(static_cast<Eigen::Index>(ns), 1, rng).col(0);
    const Vector c = random_matrix(static_cast<Eigen::Index>(total), 1, rng).col(0);
    const Vector prev = random_matrix(static_cast<Eigen::Index>(ns), 1, rng).col(0);
    const Vector x1 = assemble_brick_input(schema, 1, s, c);
    const Vector x2 = assemble_brick_input(schema, 2, s, c, &prev);
    ASSERT_EQ(static_cast<std::size_t>(x1.size()), ns + total);
    ASSERT_EQ(static_cast<std::size_t>(x2.size()), ns + total + ns);
    EXPECT_EQ(x2.tail(static_cast<Eigen::Index>(ns)), prev);
    EXPECT_EQ(x2.head(x1.size()), x1);
  }
}

TEST(BrickKernelSpec, PreviousOutputSharesSeriesScale) {
  const auto schema = make_schema(2, {3});
  auto scaling = avatar::identity_scaling(schema);
  scaling.brick_rho = {{{1.0, 1.0, 1.0}}, {{2.0, 3.0, 5.0}}};
  const auto spec = brick_kernel_spec(schema, scaling, 1, 0, 0.5);
  ASSERT_EQ(spec.slices.size(), 5u);
  EXPECT_EQ(spec.dimension(), 7u);
  EXPECT_EQ(spec.slices[0].rho, 1.0);
  EXPECT_EQ(spec.slices[1].rho, 1.5);
  EXPECT_EQ(spec.slices[2].rho, 2.5);
  EXPECT_EQ(spec.slices[3].rho, 1.0);
  EXPECT_EQ(spec.slices[4].rho, 1.5);
  EXPECT_EQ(brick_kernel_spec(schema, scaling, 0, 0, 1.0).dimension(), 5u);
}

TEST(TrainStack, SingleLinearBrickMatchesBareBrick) {
  const auto pairs = lv_pairs();
  StackConfig cfg;
  cfg.bricks[0].kind = BrickKind::linear;
  cfg.bricks[0].inverse = numlin::InverseConfig::exact();
  const auto ident = avatar::identity_scaling(pairs.schema);
  const auto model = train_stack(pairs, cfg, &ident);
  const auto bare = bricks::train_linear_brick(pairs.assembled_inputs(), pairs.targets);
  const Matrix a = predict_columns(model, pairs.inputs, pairs.context);
  const Matrix b = bare.map * pairs.assembled_inputs();
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12 * b.cwiseAbs().maxCoeff());
}

TEST(TrainStack, SingleKernelBrickMatchesBareBrick) {
  const auto pairs = lv_pairs();
  const auto ident = avatar::identity_scaling(pairs.schema);
  const auto model = train_stack(pairs, kernel_stack(1, 1e-3), &ident);
  const auto u = pairs.assembled_inputs();
  const auto bare = bricks::train_kernel_brick(u, pairs.targets,
                                               bricks::KernelSpec::uniform(u.rows(), 1.0), 1e-3);
  const Matrix a = predict_columns(model, pairs.inputs, pairs.context);
  const Matrix b = bricks::apply_columns(bare, u);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(TrainStack, DeterministicForSeed) {
  const auto pairs = lv_pairs();
  for (auto kind : {BrickKind::dsn, BrickKind::tensor, BrickKind::kernel}) {
    StackConfig cfg;
    cfg.n_bricks = 2;
    cfg.bricks[0].kind = kind;
    cfg.bricks[0].hidden_size = 6;
    cfg.bricks[0].hidden_size2 = 3;
    cfg.seed = 42;
    const auto a = train_stack(pairs, cfg);
    const auto b = train_stack(pairs, cfg);
    EXPECT_EQ(io::format_model(a), io::format_model(b)) << bricks::to_string(kind);
  }
}

TEST(TrainStack, KernelStackBeatsLinearBaseline) {
  const auto pairs = lv_pairs();
  StackConfig lin;
  lin.bricks[0].kind = BrickKind::linear;
  lin.bricks[0].inverse = numlin::InverseConfig::exact();
  const double baseline = pairs_rmse(train_stack(pairs, lin), pairs);
  const double stacked = pairs_rmse(train_stack(pairs, kernel_stack(3, 1e-6)), pairs);
  EXPECT_LE(stacked, baseline);
}

TEST(TrainStack, LaterBricksSeePreviousOutputs) {
  const auto pairs = lv_pairs();
  const auto model = train_stack(pairs, kernel_stack(3, 1e-4));
  ASSERT_EQ(model.size(), 3u);
  EXPECT_EQ(static_cast<std::size_t>(bricks::input_dim(model.bricks[0])), pairs.schema.brick_input_length(1));
  for (std::size_t k = 1; k < 3; ++k) {
    EXPECT_EQ(static_cast<std::size_t>(bricks::input_dim(model.bricks[k])),
              pairs.schema.brick_input_length(k + 1));
    EXPECT_EQ(bricks::output_dim(model.bricks[k]), 2);
  }
  // brick 2's retained inputs end with brick 1's training predictions
  const auto& k1 = std::get<bricks::KernelBrick>(model.bricks[0]);
  const auto& k2 = std::get<bricks::KernelBrick>(model.bricks[1]);
  const Matrix y1 = bricks::apply_columns(model.bricks[0], k1.inputs);
  EXPECT_EQ(k2.inputs.bottomRows(2), y1);
  EXPECT_EQ(k2.inputs.topRows(k1.inputs.rows()), k1.inputs);
}

TEST(TrainStack, InterpolatingKernelStackReproducesTargets) {
  const auto pairs = lv_pairs(1000);  // 30 well separated pairs
  const auto model = train_stack(pairs, kernel_stack(1, 0.0));
  const Matrix pred = predict_columns(model, pairs.inputs, pairs.context);
  EXPECT_LT((pred - pairs.targets).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(TrainStack, BrickFailureNamesBrick) {
  const auto pairs = lv_pairs();
  StackConfig cfg;
  cfg.n_bricks = 2;
  BrickConfig ok;
  ok.kind = BrickKind::linear;
  BrickConfig bad;
  bad.kind = BrickKind::dsn;
  bad.hidden_size = 0;
  cfg.bricks = {ok, bad};
  try {
    train_stack(pairs, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("brick 2:", 0), 0u) << e.what();
    EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
  }
}

TEST(TrainStack, ConfigErrors) {
  const auto pairs = lv_pairs();
  StackConfig cfg;
  cfg.n_bricks = 0;
  EXPECT_THROW(train_stack(pairs, cfg), Error);
  cfg.n_bricks = 3;
  cfg.bricks = {BrickConfig{}, BrickConfig{}};
  EXPECT_THROW(train_stack(pairs, cfg), Error);
}

TEST(PredictOneStep, IdentitySeriesMapIgnoresContext) {
  StackedModel m = testing_support::linear_model(Matrix::Identity(2, 2));
  m.schema.context = {{"map", 3}};
  m.scaling = avatar::identity_scaling(m.schema);
  Matrix map = Matrix::Zero(2, 5);
  map.leftCols(2) = Matrix::Identity(2, 2);
  m.bricks = {bricks::LinearBrick{map}};
  m.context = Vector::Constant(3, 7.0);
  Vector t(2);
  t << 3.25, -1.5;
  EXPECT_EQ(predict_one_step(m, t, m.context), t);
  EXPECT_EQ(predict_one_step(m, t, m.context), predict_one_step(m, t, m.context));
  EXPECT_THROW(predict_one_step(m, Vector::Zero(3), m.context), Error);
  EXPECT_THROW(predict_one_step(m, t, Vector::Zero(2)), Error);
}

TEST(CountFreeParameters, PaperScenario) {
  const auto schema = make_schema(40, {10000});
  const auto shared = count_free_parameters(schema, 4, BrickKind::kernel, false, 3650);
  EXPECT_EQ(shared.scaling_factors, 41u);
  EXPECT_EQ(shared.ridge_coefficients, 4u);
  const auto dual = count_free_parameters(schema, 4, BrickKind::kernel_tensor, true, 3650);
  EXPECT_EQ(dual.scaling_factors, 328u);
  EXPECT_EQ(dual.total_unknowns, 332u);
  EXPECT_EQ(dual.series_data_points, 146000u);
  EXPECT_EQ(dual.total_data_points, 156000u);
  const auto single = count_free_parameters(schema, 4, BrickKind::kernel, true, 3650);
  EXPECT_EQ(single.scaling_factors, 164u);
  const auto linear = count_free_parameters(schema, 4, BrickKind::linear, true, 3650);
  EXPECT_EQ(linear.scaling_factors, 41u);
}
