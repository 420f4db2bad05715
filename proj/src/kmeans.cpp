#include "softki/kmeans.hpp"

#include <limits>
#include <random>
#include <vector>

namespace softki {

namespace {

// Squared distance from every row of x to every row of c.
DenseMatrix all_distances(const DenseMatrix& x, const DenseMatrix& c) {
  DenseMatrix d2 = -2.0 * (x * c.transpose());
  d2.colwise() += x.rowwise().squaredNorm();
  d2.rowwise() += c.rowwise().squaredNorm().transpose();
  return d2.cwiseMax(0.0);
}

}  // namespace

KMeansResult kmeans_fit(const DenseMatrix& x, Index m, std::uint64_t seed,
                        int max_iters) {
  const Index n = x.rows();
  const Index d = x.cols();
  if (m < 1) throw InvalidArgument("kmeans: m must be at least 1");
  if (n < m) {
    throw TooFewPoints("kmeans: " + std::to_string(n) + " points for " +
                       std::to_string(m) + " clusters");
  }
  std::mt19937_64 rng(seed);
  KMeansResult out;
  out.centroids.resize(m, d);

  // k-means++ seeding.
  std::uniform_int_distribution<Index> first(0, n - 1);
  out.centroids.row(0) = x.row(first(rng));
  DenseVector mindist = (x.rowwise() - out.centroids.row(0)).rowwise().squaredNorm();
  for (Index j = 1; j < m; ++j) {
    const double total = mindist.sum();
    Index pick;
    if (!(total > 0)) {
      pick = std::uniform_int_distribution<Index>(0, n - 1)(rng);
    } else {
      std::discrete_distribution<Index> dist(mindist.data(), mindist.data() + n);
      pick = dist(rng);
    }
    out.centroids.row(j) = x.row(pick);
    mindist = mindist.cwiseMin(
        (x.rowwise() - out.centroids.row(j)).rowwise().squaredNorm());
  }

  std::vector<Index> assign(n, -1);
  for (int it = 0; it < max_iters; ++it) {
    const DenseMatrix d2 = all_distances(x, out.centroids);
    bool changed = false;
    DenseVector best(n);
    for (Index i = 0; i < n; ++i) {
      Index k;
      best(i) = d2.row(i).minCoeff(&k);
      if (k != assign[i]) {
        assign[i] = k;
        changed = true;
      }
    }
    out.iterations = it + 1;
    if (!changed) {
      out.converged = true;
      break;
    }
    DenseMatrix sums = DenseMatrix::Zero(m, d);
    std::vector<Index> counts(m, 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += x.row(i);
      ++counts[assign[i]];
    }
    for (Index k = 0; k < m; ++k) {
      if (counts[k] > 0) {
        out.centroids.row(k) = sums.row(k) / double(counts[k]);
        continue;
      }
      Index far;
      best.maxCoeff(&far);
      out.centroids.row(k) = x.row(far);
      best(far) = 0;
      assign[far] = -1;  // force another pass
    }
  }
  return out;
}

}  // namespace softki
