#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "softki/interp.hpp"

using namespace softki;

namespace {

InterpolationState state(const DenseMatrix& z, double t = 1.0) {
  InterpolationState s;
  s.z = z;
  s.temperature = DenseVector::Constant(z.cols(), t);
  return s;
}

MaternParams params(Index d) {
  MaternParams p;
  p.lengthscales = DenseVector::Constant(d, 0.8);
  p.outputscale = 1.3;
  return p;
}

}  // namespace

TEST(Softmax, SinglePointGivesOnes) {
  std::mt19937_64 rng(1);
  const DenseMatrix x = oracle::random_matrix(6, 2, rng);
  const DenseMatrix w = softmax_weights(x, state(DenseMatrix::Zero(1, 2)));
  EXPECT_LE((w - DenseMatrix::Ones(6, 1)).norm(), 1e-15);
}

TEST(Softmax, EquidistantIsUniform) {
  DenseMatrix z(4, 2);
  z << 1, 0, -1, 0, 0, 1, 0, -1;
  const DenseMatrix w = softmax_weights(DenseMatrix::Zero(1, 2), state(z));
  EXPECT_LE((w.array() - 0.25).abs().maxCoeff(), 1e-15);
}

TEST(Softmax, KnownOneDimensionalRow) {
  DenseMatrix z(2, 1);
  z << -1, 2;
  const DenseMatrix w = softmax_weights(DenseMatrix::Zero(1, 1), state(z));
  const double e = std::exp(1.0);
  EXPECT_NEAR(w(0, 0), e / (e + 1), 1e-14);
  EXPECT_NEAR(w(0, 1), 1 / (e + 1), 1e-14);
  EXPECT_NEAR(w(0, 0), 0.7311, 1e-4);
}

TEST(Softmax, RowStochasticAndMatchesOracle) {
  std::mt19937_64 rng(2);
  const DenseMatrix x = oracle::random_matrix(40, 3, rng, -3, 3);
  const DenseMatrix z = oracle::random_matrix(9, 3, rng, -3, 3);
  InterpolationState s = state(z);
  s.temperature << 0.5, 1.5, 2.0;
  const DenseMatrix w = softmax_weights(x, s);
  EXPECT_LE((w.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  EXPECT_GT(w.minCoeff(), 0.0);
  EXPECT_LE(w.maxCoeff(), 1.0);
  EXPECT_LE((w - oracle::softmax(x, z, s.temperature)).norm(), 1e-12);
}

TEST(Softmax, LargeDistancesDoNotOverflow) {
  DenseMatrix z(2, 1);
  z << 0, 1;
  const DenseMatrix w = softmax_weights(DenseMatrix::Constant(1, 1, 5000.0), state(z));
  EXPECT_TRUE(w.allFinite());
  EXPECT_NEAR(w.sum(), 1.0, 1e-12);
}

TEST(Softmax, Errors) {
  InterpolationState s = state(DenseMatrix::Zero(3, 2));
  EXPECT_THROW(softmax_weights(DenseMatrix::Zero(2, 3), s), DimensionMismatch);
  s.temperature(1) = 0.0;
  EXPECT_THROW(softmax_weights(DenseMatrix::Zero(2, 2), s), NonPositiveTemperature);
}

TEST(Softmax, TemperatureBreaksTranslationInvariance) {
  std::mt19937_64 rng(3);
  const DenseMatrix x = oracle::random_matrix(5, 2, rng);
  const DenseMatrix z = oracle::random_matrix(4, 2, rng);
  const DenseVector shift = DenseVector::Constant(2, 0.7);
  const DenseMatrix xs = x.rowwise() + shift.transpose();
  const DenseMatrix zs = z.rowwise() + shift.transpose();
  EXPECT_LE((softmax_weights(x, state(z)) - softmax_weights(xs, state(zs))).norm(), 1e-12);
  EXPECT_GT((softmax_weights(x, state(z, 2.0)) - softmax_weights(xs, state(zs, 2.0))).norm(),
            1e-3);
}

TEST(Softmax, ConcentratesForSeparatedPointsInHighDimension) {
  const Index d = 50;
  DenseMatrix z = 10.0 * DenseMatrix::Identity(3, d);
  const DenseMatrix x = z.row(1) + 0.01 * DenseVector::Ones(d).transpose();
  EXPECT_GT(softmax_weights(x, state(z)).maxCoeff(), 1.0 - 1e-5);
}

TEST(SoftmaxBackward, MatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const DenseMatrix x = oracle::random_matrix(6, 2, rng);
  DenseMatrix z = oracle::random_matrix(4, 2, rng);
  DenseVector t(2);
  t << 0.8, 1.3;
  const DenseMatrix up = oracle::random_matrix(6, 4, rng);
  const auto fwd = softmax_interpolation<double>(x, z, t);
  const auto g = softmax_backward<double>(x, z, t, fwd, up);
  const auto loss = [&](const DenseMatrix& zz, const DenseVector& tt) {
    return softmax_weights<double>(x, zz, tt).cwiseProduct(up).sum();
  };
  const double h = 1e-6;
  for (Index i = 0; i < z.size(); ++i) {
    DenseMatrix a = z, b = z;
    a.data()[i] += h;
    b.data()[i] -= h;
    EXPECT_NEAR(g.z.data()[i], (loss(a, t) - loss(b, t)) / (2 * h), 1e-8);
  }
  for (Index k = 0; k < 2; ++k) {
    DenseVector a = t, b = t;
    a(k) += h;
    b(k) -= h;
    EXPECT_NEAR(g.temperature(k), (loss(z, a) - loss(z, b)) / (2 * h), 1e-8);
  }
}

TEST(SoftKICross, SinglePoint) {
  std::mt19937_64 rng(5);
  const DenseMatrix x = oracle::random_matrix(5, 2, rng);
  const auto c = softki_cross(x, state(DenseMatrix::Zero(1, 2)), params(2));
  EXPECT_LE((c.khat - DenseMatrix::Constant(5, 1, 1.3)).norm(), 1e-14);
}

TEST(SoftKICross, MatchesTripleLoop) {
  std::mt19937_64 rng(6);
  const DenseMatrix x = oracle::random_matrix(7, 2, rng);
  const DenseMatrix z = oracle::random_matrix(3, 2, rng);
  const auto c = softki_cross(x, state(z), params(2));
  DenseMatrix naive = DenseMatrix::Zero(7, 3);
  for (Index i = 0; i < 7; ++i)
    for (Index j = 0; j < 3; ++j)
      for (Index k = 0; k < 3; ++k) naive(i, j) += c.weights(i, k) * c.kzz(k, j);
  EXPECT_LE((c.khat - naive).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((c.khat.rowwise().sum() - (c.weights * c.kzz).rowwise().sum()).norm(), 1e-12);
}

TEST(SoftKIGram, SinglePointIsConstant) {
  std::mt19937_64 rng(7);
  const DenseMatrix x = oracle::random_matrix(4, 2, rng);
  const DenseMatrix g = softki_gram(x, state(DenseMatrix::Zero(1, 2)), params(2));
  EXPECT_LE((g - DenseMatrix::Constant(4, 4, 1.3)).norm(), 1e-14);
}

TEST(SoftKIGram, LowRankPsdAndNystromForm) {
  std::mt19937_64 rng(8);
  const DenseMatrix x = oracle::random_matrix(30, 2, rng, -2, 2);
  const DenseMatrix z = oracle::random_matrix(5, 2, rng, -2, 2);
  const auto s = state(z);
  const DenseMatrix g = softki_gram(x, s, params(2));
  const DenseVector eig = Eigen::SelfAdjointEigenSolver<DenseMatrix>(g).eigenvalues();
  EXPECT_LE((eig.array() > 1e-10).count(), 5);
  EXPECT_GE(eig(0), -1e-8 * g.trace() / 30.0);
  const auto c = softki_cross(x, s, params(2));
  const DenseMatrix nys = c.khat * c.kzz.ldlt().solve(DenseMatrix(c.khat.transpose()));
  EXPECT_LE((g - nys).cwiseAbs().maxCoeff(), 1e-8);
}
