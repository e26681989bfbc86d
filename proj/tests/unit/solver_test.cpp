#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "itals/error.hpp"
#include "itals/solver.hpp"
#include "support/oracle.hpp"

namespace itals {
namespace {

using testing::brute_force_gram_product;
using testing::brute_force_objective;
using testing::dense_normal_solve;
using testing::random_instance;

Model model_with_columns(const TensorShape& shape, std::vector<Eigen::MatrixXd> factors) {
  Model m;
  m.shape = shape;
  m.factors = std::move(factors);
  m.config.features = static_cast<int>(m.factors.front().rows());
  m.id_maps.resize(shape.order());
  m.refresh_grams();
  return m;
}

double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

TEST(PredictCell, ProductOfColumns) {
  auto shape = TensorShape::with_context(1, 1, 1);
  Eigen::MatrixXd a(1, 1), b(1, 1), c(1, 1);
  a << 2;
  b << 3;
  c << 0.5;
  auto m = model_with_columns(shape, {a, b, c});
  EXPECT_DOUBLE_EQ(predict_cell(m, std::vector<EntityId>{0, 0, 0}), 3.0);
}

TEST(PredictCell, DotProductForMatrices) {
  Eigen::MatrixXd u(2, 1), i(2, 1);
  u << 1, 2;
  i << 3, 4;
  auto m = model_with_columns(TensorShape::matrix(1, 1), {u, i});
  EXPECT_DOUBLE_EQ(predict_cell(m, std::vector<EntityId>{0, 0}), 11.0);
}

TEST(PredictCell, ZeroColumnAnnihilates) {
  Eigen::MatrixXd u = Eigen::MatrixXd::Random(3, 2);
  Eigen::MatrixXd i = Eigen::MatrixXd::Random(3, 2);
  i.col(1).setZero();
  auto m = model_with_columns(TensorShape::matrix(2, 2), {u, i});
  EXPECT_EQ(predict_cell(m, std::vector<EntityId>{0, 1}), 0.0);
  EXPECT_EQ(predict_cell(m, std::vector<EntityId>{1, 1}), 0.0);
}

TEST(PredictCell, RejectsOutOfBounds) {
  auto m = model_with_columns(TensorShape::matrix(1, 1), {Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1)});
  EXPECT_THROW(predict_cell(m, std::vector<EntityId>{0, 1}), ShapeError);
  EXPECT_THROW(predict_cell(m, std::vector<EntityId>{0}), ShapeError);
}

TEST(DenseLoss, ZeroFactorsGiveSumOfStoredWeights) {
  auto obs = ObservationTensor::from_cells(TensorShape::matrix(3, 2), {0, 1, 2, 0}, {4.0, 7.5});
  auto m = model_with_columns(obs.shape(), {Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 2)});
  EXPECT_DOUBLE_EQ(dense_loss(m, obs), 11.5);
}

TEST(DenseLoss, PerfectSingleCell) {
  auto obs = ObservationTensor::from_cells(TensorShape::matrix(1, 1), {0, 0}, {5.0});
  auto m = model_with_columns(obs.shape(), {Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1)});
  EXPECT_EQ(dense_loss(m, obs), 0.0);
}

TEST(DenseLoss, HalfPredictionsOnTwoByTwo) {
  // Stored cell: 3 * 0.25; three zero cells: 3 * 1 * 0.25.
  auto obs = ObservationTensor::from_cells(TensorShape::matrix(2, 2), {0, 0}, {3.0});
  auto m = model_with_columns(obs.shape(), {Eigen::MatrixXd::Ones(1, 2), Eigen::MatrixXd::Constant(1, 2, 0.5)});
  EXPECT_DOUBLE_EQ(dense_loss(m, obs), 1.5);
}

TEST(DenseLoss, RefusesLargeShapes) {
  auto obs = ObservationTensor::from_cells(TensorShape::matrix(2000, 1000), {0, 0}, {2.0});
  auto m = init_model(obs.shape(), TrainConfig{});
  EXPECT_THROW(dense_loss(m, obs), OracleLimitError);
  EXPECT_NO_THROW(dense_loss(m, obs, 2'000'000));
}

TEST(EffectiveLambda, Modes) {
  std::vector<EntityId> coords;
  std::vector<double> weights;
  for (EntityId i = 0; i < 250; ++i) {
    coords.insert(coords.end(), {0, i});
    weights.push_back(2.0);
  }
  auto obs = ObservationTensor::from_cells(TensorShape::matrix(2, 250), coords, weights);
  TrainConfig c;
  c.reg_mode = RegMode::constant;
  c.lambda = 0.1;
  EXPECT_DOUBLE_EQ(effective_lambda(c, obs, 0, 0), 0.1);
  EXPECT_DOUBLE_EQ(effective_lambda(c, obs, 1, 17), 0.1);
  c.reg_mode = RegMode::support;
  c.lambda = 0.01;
  EXPECT_DOUBLE_EQ(effective_lambda(c, obs, 0, 0), 2.5);
  EXPECT_DOUBLE_EQ(effective_lambda(c, obs, 0, 1), 0.01);  // zero support floors at 1
}

TEST(SolveAxis, ScalarWeightedLeastSquares) {
  // min 2 (1 - m)^2 + (0 - m)^2  ->  m = 2/3
  auto obs = ObservationTensor::from_cells(TensorShape::matrix(1, 2), {0, 0}, {2.0});
  auto m = model_with_columns(obs.shape(), {Eigen::MatrixXd::Constant(1, 1, 0.3), Eigen::MatrixXd::Ones(1, 2)});
  const std::vector<double> lambdas{0.0};
  solve_axis(m, obs, 0, lambdas);
  EXPECT_NEAR(m.factors[0](0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.grams[0](0, 0), 4.0 / 9.0, 1e-15);
}

TEST(SolveAxis, EmptyColumnSolvesToZero) {
  auto obs = ObservationTensor::from_cells(TensorShape::matrix(2, 3), {0, 1}, {5.0});
  Eigen::MatrixXd items(2, 3);
  items << 1, 0, 2, 0, 1, 1;
  auto m = model_with_columns(obs.shape(), {Eigen::MatrixXd::Ones(2, 2), items});
  const std::vector<double> lambdas{0.0, 0.0};
  solve_axis(m, obs, 0, lambdas);
  EXPECT_EQ(m.factors[0].col(1), Eigen::VectorXd::Zero(2));
}

TEST(SolveAxis, SingularWithoutRegularisationThrows) {
  // Rank-one item factors make the 2x2 system singular.
  auto obs = ObservationTensor::from_cells(TensorShape::matrix(1, 2), {0, 0}, {3.0});
  Eigen::MatrixXd items(2, 2);
  items << 1, 1, 1, 1;
  auto m = model_with_columns(obs.shape(), {Eigen::MatrixXd::Ones(2, 1), items});
  const std::vector<double> lambdas{0.0};
  try {
    solve_axis(m, obs, 0, lambdas);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda > 0"), std::string::npos);
  }
  const std::vector<double> regularised{0.1};
  EXPECT_NO_THROW(solve_axis(m, obs, 0, regularised));
}

TEST(SolveAxis, MatchesDenseNormalEquations) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 30; ++trial) {
    auto inst = random_instance(gen, 3, 4, 3);
    TrainConfig cfg;
    cfg.features = inst.features;
    cfg.lambda = 0.05;
    cfg.seed = 100 + trial;
    auto m = init_model(inst.obs.shape(), cfg);
    for (std::size_t axis = 0; axis < 3; ++axis) {
      const Model before = m;
      solve_axis(m, inst.obs, axis);
      for (std::size_t j = 0; j < inst.obs.shape().dims[axis]; ++j) {
        const auto expected = dense_normal_solve(before, inst.obs, axis, j,
                                                 effective_lambda(cfg, inst.obs, axis, j));
        const Eigen::VectorXd got = m.factors[axis].col(static_cast<Eigen::Index>(j));
        EXPECT_LE(max_rel_diff(got, expected), 1e-8) << "trial " << trial << " axis " << axis;
      }
    }
  }
}

TEST(GramHadamard, MatchesBruteForceSum) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = random_instance(gen, 2 + trial % 3, 5, 3);
    TrainConfig cfg;
    cfg.features = inst.features;
    cfg.seed = static_cast<std::uint64_t>(trial);
    auto m = init_model(inst.obs.shape(), cfg);
    for (std::size_t axis = 0; axis < m.order(); ++axis) {
      EXPECT_LE(max_rel_diff(gram_hadamard_excluding(m, axis), brute_force_gram_product(m, axis)), 1e-10);
    }
  }
}

TEST(Gram, SymmetricAndMatchesColumnOuterProducts) {
  auto m = init_model(TensorShape::matrix(6, 4), TrainConfig{.features = 3});
  for (std::size_t a = 0; a < 2; ++a) {
    EXPECT_EQ(m.grams[a], m.grams[a].transpose());
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3);
    for (Eigen::Index j = 0; j < m.factors[a].cols(); ++j) sum += m.factors[a].col(j) * m.factors[a].col(j).transpose();
    EXPECT_LE(max_rel_diff(m.grams[a], sum), 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.grams[a]);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(Fit, ObjectiveNonIncreasingPerAxisUpdate) {
  // 4 x 5 x 3 with support-proportional lambda.
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<EntityId> coords;
  std::vector<double> weights;
  testing::for_each_coord({4, 5, 3}, [&](const std::vector<EntityId>& c) {
    if (unit(gen) < 0.25) {
      coords.insert(coords.end(), c.begin(), c.end());
      weights.push_back(1.0 + 20.0 * unit(gen) + 1e-3);
    }
  });
  auto obs = ObservationTensor::from_cells(TensorShape::with_context(4, 5, 3), coords, weights);
  TrainConfig cfg;
  cfg.features = 3;
  cfg.lambda = 0.02;
  auto m = init_model(obs.shape(), cfg);
  std::vector<std::vector<double>> lambdas(3);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t j = 0; j < obs.shape().dims[a]; ++j) lambdas[a].push_back(effective_lambda(cfg, obs, a, j));
  }
  double previous = brute_force_objective(m, obs, lambdas);
  EXPECT_NEAR(previous, dense_loss(m, obs) + regularization_penalty(m, obs), 1e-9 * previous);
  for (int epoch = 0; epoch < 5; ++epoch) {
    for (std::size_t a = 0; a < 3; ++a) {
      solve_axis(m, obs, a);
      const double current = brute_force_objective(m, obs, lambdas);
      EXPECT_LE(current, previous * (1.0 + 1e-9));
      previous = current;
    }
  }
}

TEST(Fit, DeterministicForSeed) {
  std::mt19937_64 gen(5);
  auto inst = random_instance(gen, 3, 6, 3, 0.4);
  TrainConfig cfg;
  cfg.features = 3;
  cfg.epochs = 3;
  cfg.seed = 99;
  auto a = fit(inst.obs, cfg);
  auto b = fit(inst.obs, cfg);
  for (std::size_t i = 0; i < a.order(); ++i) EXPECT_EQ(a.factors[i], b.factors[i]);
  cfg.seed = 100;
  auto c = fit(inst.obs, cfg);
  EXPECT_NE(a.factors[0], c.factors[0]);
}

TEST(Fit, OneEpochUpdatesEachAxisOnce) {
  auto obs = ObservationTensor::from_cells(TensorShape::matrix(3, 3), {0, 0, 1, 1, 2, 2}, {2.0, 3.0, 4.0});
  TrainConfig cfg;
  cfg.features = 2;
  cfg.epochs = 1;
  int epochs_seen = 0;
  auto m = fit(obs, cfg, [&](const EpochReport& r) {
    ++epochs_seen;
    EXPECT_EQ(r.axis_seconds.size(), 2u);
  });
  EXPECT_EQ(epochs_seen, 1);

  auto manual = init_model(obs.shape(), cfg);
  solve_axis(manual, obs, 0);
  solve_axis(manual, obs, 1);
  EXPECT_EQ(manual.factors[0], m.factors[0]);
  EXPECT_EQ(manual.factors[1], m.factors[1]);
}

TEST(Fit, RejectsBadConfig) {
  auto obs = ObservationTensor::from_cells(TensorShape::matrix(1, 1), {0, 0}, {2.0});
  EXPECT_THROW(fit(obs, TrainConfig{.epochs = 0}), ShapeError);
  EXPECT_THROW(fit(obs, TrainConfig{.features = 0}), ShapeError);
  EXPECT_THROW(fit(obs, TrainConfig{.lambda = -1.0}), ShapeError);
  TrainConfig bad_scale;
  bad_scale.init_scale = 0.0;
  EXPECT_THROW(fit(obs, bad_scale), ShapeError);
}

TEST(InitModel, UniformInOpenInterval) {
  TrainConfig cfg;
  cfg.features = 4;
  auto m = init_model(TensorShape::with_context(50, 40, 3), cfg);
  for (const auto& f : m.factors) {
    EXPECT_GT(f.minCoeff(), 0.0);
    EXPECT_LT(f.maxCoeff(), 0.5);
  }
}

TEST(SolveAxis, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 gen(21);
  auto inst = random_instance(gen, 3, 6, 3, 0.5);
  TrainConfig cfg;
  cfg.features = 3;
  cfg.epochs = 2;
  auto serial = fit(inst.obs, cfg);
  cfg.threads = 4;
  auto parallel = fit(inst.obs, cfg);
  for (std::size_t a = 0; a < serial.order(); ++a) EXPECT_EQ(serial.factors[a], parallel.factors[a]);
}

}  // namespace
}  // namespace itals
