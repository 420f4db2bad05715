#pragma once

// SGPR baseline: collapsed ELBO training and the Nystrom posterior.

#include <cstdint>

#include "softki/data.hpp"
#include "softki/params.hpp"
#include "softki/posterior.hpp"
#include "softki/trainer.hpp"

namespace softki {

struct ElboReport {
  double value = 0;
  SGPRHyperparams gradient;
  double trace_gap = 0;  // tr(K_xx - Q_xx), nonnegative up to roundoff
  double jitter = 0;
};

ElboReport sgpr_elbo(const DenseMatrix& x, const DenseVector& y,
                     const SGPRHyperparams& theta);

struct SGPRConfig {
  int epochs = 100;
  double learning_rate = 0.1;
  Index m = 512;
  std::uint64_t seed = 0;
  double init_noise = 0.5;
  double init_outputscale = 1.0;
  double init_lengthscale = 1.0;
  int lr_step_epochs = 0;
  double lr_decay = 0.5;
};

struct SGPRTrainResult {
  SGPRHyperparams theta;
  TrainTrace trace;
};

SGPRTrainResult train_sgpr(const Dataset& train, const SGPRConfig& cfg);
SGPRTrainResult train_sgpr_from(const Dataset& train, const SGPRConfig& cfg,
                                const SGPRHyperparams& init);

struct SGPRPosterior {
  SGPRHyperparams theta;
  SolverKind solver = SolverKind::kQR;
  linalg::UpperTriangular<double> uzz;
  linalg::UpperTriangular<double> r;  // qr only
  DenseMatrix c;                      // direct only
  DenseVector alpha;
  double jitter = 0;

  DenseMatrix kzz() const;
};

// `spec` must be qr or direct.
SGPRPosterior sgpr_fit(const Dataset& data, const SGPRHyperparams& theta,
                       const SolverSpec& spec = {});
DenseVector sgpr_predict_mean(const SGPRPosterior& post, const DenseMatrix& xs);
DenseVector sgpr_predict_var(const SGPRPosterior& post, const DenseMatrix& xs);
Metrics sgpr_test_metrics(const SGPRPosterior& post, const DenseMatrix& xs,
                          const DenseVector& ys);

}  // namespace softki
