#pragma once

// End-to-end runs (data -> training -> posterior -> metrics) and the
// benchmark / solver-study harnesses built on them.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "softki/checkpoint.hpp"
#include "softki/data.hpp"
#include "softki/posterior.hpp"
#include "softki/report.hpp"
#include "softki/trainer.hpp"

namespace softki {

struct RunConfig {
  ModelKind model = ModelKind::kSoftKI;
  std::string data = "ricker";  // "ricker", "coincident" or a CSV path
  CsvSchema csv;
  double train_fraction = 0.9;
  TrainConfig train;                      // epochs, m, seed, ... shared by all
  std::optional<double> learning_rate;    // default depends on the model
  SolverSpec solver;

  double effective_learning_rate() const;
  void validate() const;
};

// Loads or generates the train/test split named by cfg.data.
SplitResult load_dataset(const RunConfig& cfg);

struct PipelineResult {
  Checkpoint checkpoint;
  TrainTrace trace;
  Metrics test;
  double raw_rmse = 0;  // test RMSE in original target units
  double train_seconds = 0;
  DenseVector lengthscales;
  DenseVector temperatures;  // empty for the baselines
  std::vector<std::string> warnings;
};

PipelineResult run_pipeline(const RunConfig& cfg, const SplitResult& data);

// Config echo plus metrics; deterministic for a fixed run.
RunReport make_report(const RunConfig& cfg, const PipelineResult& r,
                      const SplitResult& data);

Metrics evaluate_checkpoint(const Checkpoint& ck, const Dataset& data);

struct BenchSuite {
  std::vector<std::string> datasets = {"ricker"};
  std::vector<ModelKind> models = {ModelKind::kSoftKI};
  std::vector<ObjectiveMode> modes = {ObjectiveMode::kAuto};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  RunConfig base;
  int workers = 1;
};

struct BenchRow {
  std::string dataset;
  std::string model;
  std::string mode;
  std::uint64_t seed = 0;
  bool aggregate = false;
  double rmse = 0;
  double rmse_std = 0;
  double nll = 0;
  double nll_std = 0;
  double seconds = 0;
  std::string status;  // ok, nan, or error text
};

// Worker count from SOFTKI_THREADS (>= 1), defaulting to `fallback`.
int worker_limit(int fallback);

// Runs every (dataset, model, mode, seed) row, then appends one aggregate
// row per (dataset, model, mode). Rows are sorted by key.
std::vector<BenchRow> run_bench(const BenchSuite& suite);
std::string bench_csv(const std::vector<BenchRow>& rows);
bool bench_all_completed(const std::vector<BenchRow>& rows);

struct SolverStudyRow {
  std::string solver;
  bool ok = false;
  std::string error;
  double train_rmse = 0;
  double relative_residual = 0;
  int iterations = 0;
  std::vector<double> residual_history;
};

// Solves the posterior system of `theta` on `data` with each solver and
// reports the training-set RMSE of the resulting mean.
std::vector<SolverStudyRow> run_solver_study(const Dataset& data,
                                             const SoftKIHyperparams& theta,
                                             const std::vector<SolverSpec>& solvers);
std::vector<SolverSpec> default_study_solvers();
std::string solver_study_csv(const std::vector<SolverStudyRow>& rows);
std::string residual_curves_csv(const std::vector<SolverStudyRow>& rows);

// A near-rank-deficient SoftKI posterior problem: a dense 1-D grid of
// interpolation points, a long lengthscale and a tiny noise level.
struct DegenerateProblem {
  Dataset data;
  SoftKIHyperparams theta;
};
DegenerateProblem degenerate_problem(std::uint64_t seed);

}  // namespace softki
