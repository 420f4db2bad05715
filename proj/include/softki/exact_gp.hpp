#pragma once

// Dense exact GP with a Matern-3/2 kernel. Limited to small problems; it is
// the reference the approximate models are checked against.

#include "softki/data.hpp"
#include "softki/kernel.hpp"
#include "softki/posterior.hpp"
#include "softki/trainer.hpp"

namespace softki {

inline constexpr Index kExactGPMaxPoints = 4096;

struct ExactGPHyperparams {
  double noise = 0.5;
  MaternParams kernel;
};

struct ExactMllReport {
  double value = 0;
  ExactGPHyperparams gradient;
};

ExactMllReport exact_gp_mll(const DenseMatrix& x, const DenseVector& y,
                            const ExactGPHyperparams& theta);

struct ExactGPConfig {
  int epochs = 100;
  double learning_rate = 0.1;
  double init_noise = 0.5;
  double init_outputscale = 1.0;
  double init_lengthscale = 1.0;
};

struct ExactGPTrainResult {
  ExactGPHyperparams theta;
  TrainTrace trace;
};
ExactGPTrainResult train_exact_gp(const Dataset& train, const ExactGPConfig& cfg);

struct ExactGPPosterior {
  ExactGPHyperparams theta;
  DenseMatrix x;                       // training inputs
  linalg::UpperTriangular<double> u;  // chol(K + beta^2 I)
  DenseVector alpha;
};

ExactGPPosterior exact_gp_fit(const Dataset& data, const ExactGPHyperparams& theta);
DenseVector exact_gp_predict_mean(const ExactGPPosterior& post, const DenseMatrix& xs);
DenseVector exact_gp_predict_var(const ExactGPPosterior& post, const DenseMatrix& xs);
Metrics exact_gp_test_metrics(const ExactGPPosterior& post, const DenseMatrix& xs,
                              const DenseVector& ys);

}  // namespace softki
