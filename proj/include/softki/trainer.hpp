#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "softki/data.hpp"
#include "softki/objective.hpp"
#include "softki/params.hpp"

namespace softki {

struct TrainConfig {
  int epochs = 50;
  Index batch_size = 1024;
  double learning_rate = 0.01;
  int probes = 10;
  std::uint64_t seed = 0;
  ObjectiveMode objective_mode = ObjectiveMode::kAuto;
  double cg_tol = 1e-6;
  int cg_max_iters = 500;
  Index m = 512;
  Precision precision = Precision::kFloat64;
  bool scale_probes = true;

  // Initial hyperparameters (interpolation points come from k-means).
  double init_noise = 0.5;
  double init_outputscale = 1.0;
  double init_lengthscale = 1.0;
  double init_temperature = 1.0;

  // Step decay of the learning rate; disabled when lr_step_epochs == 0.
  int lr_step_epochs = 0;
  double lr_decay = 0.5;

  void validate() const;
  ObjectiveConfig objective() const;
  double learning_rate_at(int epoch) const;
};

struct TrainTrace {
  std::vector<double> epoch_objective;  // mean of value / n_b over batches
  std::vector<int> exact_count;
  std::vector<int> pseudoloss_count;
  std::vector<double> epoch_seconds;
  std::vector<ObjectiveMode> batch_modes;  // one entry per optimizer step
  int threads = 1;
  int steps = 0;
};

struct TrainResult {
  SoftKIHyperparams theta;
  TrainTrace trace;
};

// Training set must already be standardized.
TrainResult train_softki(const Dataset& train, const TrainConfig& cfg);

// Same loop from a given starting point (no k-means).
TrainResult train_softki_from(const Dataset& train, const TrainConfig& cfg,
                              const SoftKIHyperparams& init);

// Seeded permutation of 0..n-1 split into consecutive batches; the last one
// may be short.
std::vector<std::vector<Index>> epoch_batches(Index n, Index batch_size,
                                              std::uint64_t seed, int epoch);

}  // namespace softki

namespace softki {

// Full-batch Adam ascent shared by the baselines. `objective` returns the
// value and raw-space gradient, both already divided by n.
struct FullBatchSchedule {
  int epochs = 100;
  double learning_rate = 0.1;
  int lr_step_epochs = 0;
  double lr_decay = 0.5;
};
using RawObjective =
    std::function<std::pair<double, DenseVector>(const DenseVector& raw)>;
DenseVector run_full_batch_adam(DenseVector raw, const RawObjective& objective,
                                const FullBatchSchedule& schedule,
                                TrainTrace& trace);

}  // namespace softki
