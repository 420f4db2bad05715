#pragma once

// Datasets: CSV ingestion, train/test splitting with training-set
// standardization, and the synthetic Ricker wavelet.

#include <cstdint>
#include <string>
#include <vector>

#include "softki/linalg.hpp"

namespace softki {

struct Standardization {
  DenseVector x_mean;
  DenseVector x_std;
  double y_mean = 0;
  double y_std = 1;

  static Standardization identity(Index d);
  DenseMatrix apply_x(const DenseMatrix& x) const;
  DenseVector apply_y(const DenseVector& y) const;
  DenseVector invert_y(const DenseVector& y) const;
  DenseMatrix invert_x(const DenseMatrix& x) const;
};

enum class Split { kRaw, kTrain, kTest };

struct Dataset {
  DenseMatrix x;
  DenseVector y;
  Standardization stats;
  Split split = Split::kRaw;

  Index size() const { return x.rows(); }
  Index dims() const { return x.cols(); }
};

struct CsvSchema {
  bool header = false;
  int target_column = -1;  // 0-based; negative counts from the end
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {});

struct SplitResult {
  Dataset train;
  Dataset test;
  std::vector<std::string> warnings;  // degenerate columns
};

// Seeded shuffle, then the first round(fraction * n) rows train. Both parts
// are standardized with training statistics.
SplitResult split_standardize(const Dataset& raw, double train_fraction,
                              std::uint64_t seed);

// Standardizes `train` in place with its own statistics and applies them to
// `test`.
std::vector<std::string> standardize_pair(Dataset& train, Dataset& test);

struct RickerOptions {
  Index n_train = 3000;
  Index n_test = 200;
  double width = 1.0;
  double amplitude = 1.0;
  double radius = 4.0;
  double noise = 0.0;  // std of noise added to training targets
  std::uint64_t seed = 0;
};

double ricker(double r, double width, double amplitude);
SplitResult ricker_dataset(const RickerOptions& options = {});

}  // namespace softki

namespace softki {

// Inputs drawn from only `locations` distinct 2-D sites (with repeats), so
// k-means with more centroids than sites yields coincident points. Targets
// are a smooth function of the site plus Gaussian noise.
struct CoincidentOptions {
  Index n_train = 400;
  Index n_test = 50;
  Index locations = 6;
  double noise = 0.05;
  std::uint64_t seed = 0;
};
SplitResult coincident_dataset(const CoincidentOptions& options = {});

}  // namespace softki
