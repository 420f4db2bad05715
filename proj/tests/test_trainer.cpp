#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "softki/adam.hpp"
#include "softki/data.hpp"
#include "softki/kmeans.hpp"
#include "softki/trainer.hpp"

using namespace softki;

namespace {

Dataset toy(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.x = oracle::random_matrix(n, 2, rng, -2, 2);
  d.y = (d.x.col(0).array().sin() + 0.3 * d.x.col(1).array()).matrix();
  d.stats = Standardization::identity(2);
  d.split = Split::kTrain;
  return d;
}

bool same_theta(const SoftKIHyperparams& a, const SoftKIHyperparams& b) {
  return flatten(a) == flatten(b);
}

}  // namespace

TEST(KMeans, AllPointsAsCentroidsIsPermutation) {
  std::mt19937_64 rng(1);
  const DenseMatrix x = oracle::random_matrix(12, 3, rng);
  const DenseMatrix c = kmeans(x, 12, 5);
  std::vector<bool> used(12, false);
  for (Index i = 0; i < 12; ++i) {
    Index hit = -1;
    for (Index j = 0; j < 12; ++j) {
      if (!used[j] && (c.row(i) - x.row(j)).norm() == 0.0) hit = j;
    }
    ASSERT_GE(hit, 0) << "centroid " << i << " is not an input row";
    used[hit] = true;
  }
}

TEST(KMeans, SingleCentroidIsColumnMean) {
  std::mt19937_64 rng(2);
  const DenseMatrix x = oracle::random_matrix(50, 4, rng);
  EXPECT_LE((kmeans(x, 1, 0).row(0) - x.colwise().mean()).norm(), 1e-12);
}

TEST(KMeans, SeparatedBlobs) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.3);
  DenseMatrix x(200, 2);
  for (Index i = 0; i < 200; ++i) {
    const double cx = i < 100 ? -5.0 : 5.0;
    x(i, 0) = cx + g(rng);
    x(i, 1) = g(rng);
  }
  const DenseVector m0 = x.topRows(100).colwise().mean().transpose();
  const DenseVector m1 = x.bottomRows(100).colwise().mean().transpose();
  const KMeansResult r = kmeans_fit(x, 2, 7);
  EXPECT_TRUE(r.converged);
  const DenseVector c0 = r.centroids.row(0).transpose();
  const DenseVector c1 = r.centroids.row(1).transpose();
  const double direct = std::max((c0 - m0).norm(), (c1 - m1).norm());
  const double swapped = std::max((c0 - m1).norm(), (c1 - m0).norm());
  EXPECT_LE(std::min(direct, swapped), 0.1);
}

TEST(KMeans, TooFewPointsAndDeterminism) {
  const DenseMatrix x = DenseMatrix::Zero(3, 2);
  EXPECT_THROW(kmeans(x, 4, 0), TooFewPoints);
  std::mt19937_64 rng(4);
  const DenseMatrix y = oracle::random_matrix(300, 2, rng);
  EXPECT_EQ(kmeans(y, 10, 9), kmeans(y, 10, 9));
}

TEST(KMeans, DuplicateInputsStillGiveRequestedCount) {
  DenseMatrix x = DenseMatrix::Zero(20, 2);
  x.bottomRows(10).setOnes();
  const DenseMatrix c = kmeans(x, 4, 1);
  EXPECT_EQ(c.rows(), 4);
  EXPECT_TRUE(c.allFinite());
}

TEST(Adam, FirstStepHasLearningRateMagnitude) {
  // Quadratic toy f(p) = -|p - c|^2, ascending towards c.
  DenseVector p = DenseVector::Zero(4);
  DenseVector c(4);
  c << 3.0, -0.01, 100.0, -7.0;
  const double lr = 0.05;
  AdamState adam(4);
  const DenseVector before = p;
  adam.ascend(p, 2.0 * (c - p), lr);
  const DenseVector step = p - before;
  for (Index i = 0; i < 4; ++i) {
    EXPECT_GT(step(i) * c(i), 0.0) << "not an ascent direction";
    EXPECT_GE(std::abs(step(i)), 0.9 * lr);
    EXPECT_LE(std::abs(step(i)), lr);
  }
  EXPECT_EQ(adam.step(), 1);
  EXPECT_THROW(adam.ascend(p, DenseVector::Zero(3), lr), DimensionMismatch);
}

TEST(Adam, ConvergesOnQuadratic) {
  DenseVector p = DenseVector::Zero(2);
  DenseVector c(2);
  c << 1.5, -0.5;
  AdamState adam(2);
  for (int i = 0; i < 3000; ++i) adam.ascend(p, 2.0 * (c - p), 0.01);
  EXPECT_LE((p - c).norm(), 1e-3);
}

TEST(Batches, PartitionArithmetic) {
  const auto b = epoch_batches(2048, 1024, 0, 0);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].size(), 1024u);
  const auto c = epoch_batches(2500, 1024, 0, 0);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[2].size(), 452u);
}

TEST(Batches, EveryPointOncePerEpochAndSeeded) {
  for (int epoch = 0; epoch < 3; ++epoch) {
    const auto b = epoch_batches(1001, 64, 11, epoch);
    std::vector<int> seen(1001, 0);
    for (const auto& batch : b)
      for (Index i : batch) ++seen[i];
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  }
  EXPECT_EQ(epoch_batches(500, 64, 3, 1), epoch_batches(500, 64, 3, 1));
  EXPECT_NE(epoch_batches(500, 64, 3, 1), epoch_batches(500, 64, 3, 2));
  EXPECT_NE(epoch_batches(500, 64, 3, 1), epoch_batches(500, 64, 4, 1));
}

TEST(Train, TwoStepsPerEpochAndTraceShape) {
  TrainConfig cfg;
  cfg.m = 8;
  cfg.epochs = 3;
  cfg.batch_size = 1024;
  const TrainResult r = train_softki(toy(2048, 1), cfg);
  EXPECT_EQ(r.trace.steps, 6);
  EXPECT_EQ(r.trace.batch_modes.size(), 6u);
  EXPECT_EQ(r.trace.epoch_objective.size(), 3u);
  EXPECT_EQ(r.trace.exact_count.size(), 3u);
  EXPECT_EQ(r.trace.pseudoloss_count.size(), 3u);
  EXPECT_EQ(r.trace.epoch_seconds.size(), 3u);
  for (int e = 0; e < 3; ++e) EXPECT_EQ(r.trace.exact_count[e] + r.trace.pseudoloss_count[e], 2);
  EXPECT_GE(r.trace.threads, 1);
}

TEST(Train, IdenticalSeedsGiveIdenticalResults) {
  TrainConfig cfg;
  cfg.m = 10;
  cfg.epochs = 4;
  cfg.batch_size = 128;
  cfg.learning_rate = 0.05;
  cfg.seed = 42;
  const Dataset d = toy(500, 2);
  const TrainResult a = train_softki(d, cfg);
  const TrainResult b = train_softki(d, cfg);
  EXPECT_TRUE(same_theta(a.theta, b.theta));
  EXPECT_EQ(a.trace.epoch_objective, b.trace.epoch_objective);
  cfg.seed = 43;
  EXPECT_FALSE(same_theta(a.theta, train_softki(d, cfg).theta));

  cfg.seed = 42;
  cfg.objective_mode = ObjectiveMode::kPseudoloss;
  EXPECT_TRUE(same_theta(train_softki(d, cfg).theta, train_softki(d, cfg).theta));
}

TEST(Train, ConstraintsHoldAfterEveryStep) {
  const Dataset d = toy(300, 3);
  TrainConfig cfg;
  cfg.m = 6;
  cfg.epochs = 1;
  cfg.batch_size = 50;
  cfg.learning_rate = 3.0;  // aggressive on purpose
  SoftKIHyperparams theta = train_softki(d, cfg).theta;
  for (int round = 0; round < 10; ++round) {
    cfg.seed = std::uint64_t(round);
    theta = train_softki_from(d, cfg, theta).theta;
    EXPECT_GE(theta.noise * theta.noise, kNoiseVarianceFloor);
    EXPECT_GT(theta.kernel.outputscale, 0.0);
    EXPECT_GE(theta.kernel.lengthscales.minCoeff(), 0.01);
    EXPECT_LE(theta.kernel.lengthscales.maxCoeff(), 5.0);
    EXPECT_GT(theta.interp.temperature.minCoeff(), 0.0);
    EXPECT_TRUE(flatten(theta).allFinite());
  }
}

TEST(Train, RejectsInvalidConfig) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = TrainConfig{};
  cfg.m = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = TrainConfig{};
  cfg.m = 50;
  EXPECT_THROW(train_softki(toy(20, 1), cfg), TooFewPoints);
}

TEST(Train, StepDecaySchedule) {
  TrainConfig cfg;
  cfg.learning_rate = 0.8;
  EXPECT_EQ(cfg.learning_rate_at(99), 0.8);
  cfg.lr_step_epochs = 10;
  cfg.lr_decay = 0.5;
  EXPECT_DOUBLE_EQ(cfg.learning_rate_at(9), 0.8);
  EXPECT_DOUBLE_EQ(cfg.learning_rate_at(10), 0.4);
  EXPECT_DOUBLE_EQ(cfg.learning_rate_at(25), 0.2);
}

TEST(Train, ForcedExactOnCoincidentPointsFailsWithLocation) {
  CoincidentOptions o;
  const SplitResult data = coincident_dataset(o);
  TrainConfig cfg;
  cfg.m = 16;
  cfg.epochs = 2;
  cfg.precision = Precision::kFloat32;
  cfg.objective_mode = ObjectiveMode::kExact;
  try {
    train_softki(data.train, cfg);
    FAIL() << "expected a training failure";
  } catch (const TrainingFailed& e) {
    EXPECT_EQ(e.epoch(), 0);
    EXPECT_EQ(e.batch(), 0);
    EXPECT_STREQ(e.kind(), "ObjectiveFailed");
  }
  cfg.objective_mode = ObjectiveMode::kAuto;
  const TrainResult r = train_softki(data.train, cfg);
  for (double v : r.trace.epoch_objective) EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(r.trace.pseudoloss_count[0], 0);
}

TEST(Train, RickerObjectiveIncreases) {
  const SplitResult data = ricker_dataset();
  TrainConfig cfg;
  cfg.m = 128;
  cfg.epochs = 100;
  cfg.learning_rate = 0.5;
  const TrainResult r = train_softki(data.train, cfg);
  ASSERT_EQ(r.trace.epoch_objective.size(), 100u);
  EXPECT_GT(r.trace.epoch_objective.back(), r.trace.epoch_objective.front());
  // Trend check: the last ten epochs beat the first ten on average.
  double first = 0, last = 0;
  for (int i = 0; i < 10; ++i) {
    first += r.trace.epoch_objective[i];
    last += r.trace.epoch_objective[90 + i];
  }
  EXPECT_GT(last, first);
}
