#pragma once

// SoftKI training objectives on one batch (x_b, y_b), for
//   D = Sigma K_zz Sigma^T + beta^2 I:
//
//   exact_mll              log N(y | 0, D) with analytic gradients
//   hutchinson_pseudoloss  probe-based surrogate whose gradient estimates
//                          the MLL gradient using CG solves against D
//   stabilized_objective   exact MLL, falling back to the pseudoloss when
//                          the exact path breaks down
//
// Values are not normalized by the batch size; the trainer does that.

#include <cstdint>
#include <string>
#include <vector>

#include "softki/linalg.hpp"
#include "softki/params.hpp"

namespace softki {

enum class ObjectiveMode { kAuto, kExact, kPseudoloss };
enum class MllPath { kLowRank, kDense };

const char* to_string(ObjectiveMode mode);
ObjectiveMode objective_mode_from_string(const std::string& s);

struct ObjectiveDiagnostics {
  double jitter = 0;      // diagonal shift used on K_zz
  int cg_iterations = 0;  // pseudoloss only
  bool cg_converged = true;
  double cg_max_residual = 0;
  std::string fallback_reason;  // why the exact path was abandoned
};

struct ObjectiveReport {
  double value = 0;
  SoftKIHyperparams gradient;  // d value / d (beta, l, s2, z, T)
  ObjectiveMode mode_used = ObjectiveMode::kExact;
  ObjectiveDiagnostics diagnostics;

  bool finite() const;
};

// Unit-norm Gaussian probe vectors, one per column.
struct ProbeSet {
  DenseMatrix vectors;  // n_b x l
  std::uint64_t seed = 0;

  static ProbeSet draw(Index length, int count, std::uint64_t seed);
  int count() const { return int(vectors.cols()); }
};

struct ExactOptions {
  MllPath path = MllPath::kLowRank;
  std::vector<double> jitter_schedule = linalg::default_jitter_schedule();
  Precision precision = Precision::kFloat64;
};

struct PseudolossOptions {
  double cg_tol = 1e-6;
  int cg_max_iters = 500;
  // Multiply the probe term by n_b so that unit-norm probes estimate the
  // trace; false reproduces the unscaled form.
  bool scale_probes = true;
  Precision precision = Precision::kFloat64;
};

struct ObjectiveConfig {
  ObjectiveMode mode = ObjectiveMode::kAuto;
  Precision precision = Precision::kFloat64;
  int probes = 10;
  double cg_tol = 1e-6;
  int cg_max_iters = 500;
  bool scale_probes = true;
  std::vector<double> jitter_schedule = linalg::default_jitter_schedule();
};

ObjectiveReport exact_mll(const DenseMatrix& x, const DenseVector& y,
                          const SoftKIHyperparams& theta,
                          const ExactOptions& options = {});

ObjectiveReport hutchinson_pseudoloss(const DenseMatrix& x,
                                      const DenseVector& y,
                                      const SoftKIHyperparams& theta,
                                      const ProbeSet& probes,
                                      const PseudolossOptions& options = {});

// `probe_seed` seeds the probes drawn if the pseudoloss is needed.
ObjectiveReport stabilized_objective(const DenseMatrix& x, const DenseVector& y,
                                     const SoftKIHyperparams& theta,
                                     const ObjectiveConfig& config,
                                     std::uint64_t probe_seed);

// (n / l) sum_j u_j^T dD w_j with D u_j = w_j: the probe estimate of
// tr(D^{-1} dD) for unit-norm probes.
struct TraceEstimate {
  double value = 0;
  int cg_iterations = 0;
  bool converged = false;
};
TraceEstimate estimate_trace_inv_product(const DenseMatrix& d,
                                         const DenseMatrix& d_prime,
                                         const ProbeSet& probes, double cg_tol,
                                         int cg_max_iters);

}  // namespace softki
