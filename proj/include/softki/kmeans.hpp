#pragma once

#include <cstdint>

#include "softki/linalg.hpp"

namespace softki {

struct KMeansResult {
  DenseMatrix centroids;  // m x d
  int iterations = 0;
  bool converged = false;  // assignments reached a fixpoint
};

// k-means++ seeding followed by Lloyd iterations (at most `max_iters`).
// Empty clusters are moved to the point farthest from its centroid.
KMeansResult kmeans_fit(const DenseMatrix& x, Index m, std::uint64_t seed,
                        int max_iters = 100);

inline DenseMatrix kmeans(const DenseMatrix& x, Index m, std::uint64_t seed) {
  return kmeans_fit(x, m, seed).centroids;
}

}  // namespace softki
