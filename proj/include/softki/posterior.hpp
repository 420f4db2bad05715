#pragma once

// Posterior for models of the form K ~ C_xz K_zz^{-1} C_zx with a cross
// matrix C_xz (SoftKI: Sigma_xz K_zz, SGPR: K_xz):
//
//   C_hat = K_zz + C_zx C_xz / beta^2,   alpha = C_hat^{-1} C_zx y / beta^2
//
// The default fit never forms C_hat. It streams row blocks of
// A = [C_xz / beta ; U_zz] through Householder QR, keeping only the m x m
// triangle, so memory stays O(block * m).

#include <functional>
#include <string>
#include <vector>

#include "softki/data.hpp"
#include "softki/linalg.hpp"
#include "softki/params.hpp"

namespace softki {

using CrossFn = std::function<DenseMatrix(const DenseMatrix& x_block)>;

inline constexpr Index kDefaultBlockRows = 8192;

struct BlockAccounting {
  Index block_rows = 0;  // configured block size
  Index blocks = 0;
  Index peak_rows = 0;   // largest stacked matrix held at once
};

struct QRSolution {
  linalg::UpperTriangular<double> r;
  DenseVector projected_rhs;  // Q^T (y / beta ; 0), top m entries
  DenseVector alpha;
  BlockAccounting accounting;
};

// Factorizes K_zz with the default jitter schedule.
linalg::CholeskyResult<double> factor_kzz(const DenseMatrix& kzz);

QRSolution streaming_qr_solve(const linalg::UpperTriangular<double>& uzz,
                              const CrossFn& cross, const DenseMatrix& x,
                              const DenseVector& y, double beta,
                              Index block_rows = kDefaultBlockRows);

// Explicit C_hat and right-hand side C_zx y / beta^2.
struct NormalSystem {
  DenseMatrix c_hat;
  DenseVector rhs;
};
NormalSystem assemble_normal_system(const linalg::UpperTriangular<double>& uzz,
                                    const CrossFn& cross, const DenseMatrix& x,
                                    const DenseVector& y, double beta);

enum class SolverKind { kQR, kDirect, kCholesky, kCG };

struct SolverSpec {
  SolverKind kind = SolverKind::kQR;
  double cg_tol = 1e-4;

  // "qr", "direct", "cholesky", "cg:<tol>"
  static SolverSpec parse(const std::string& s);
  std::string name() const;
};

struct AltSolveResult {
  DenseVector alpha;
  bool ok = false;
  std::string error;           // recorded failure, if any
  double relative_residual = 0;  // ||C_hat alpha - b|| / ||b||
  int iterations = 0;            // cg only
  std::vector<double> residual_history;  // cg only
};

// Solves the explicit normal system; failures are recorded, not thrown.
AltSolveResult solve_normal_system(const NormalSystem& sys, const SolverSpec& spec);

struct FittedPosterior {
  SoftKIHyperparams theta;
  linalg::UpperTriangular<double> uzz;
  linalg::UpperTriangular<double> r;
  DenseVector alpha;
  DenseVector projected_rhs;
  double jitter = 0;
  BlockAccounting accounting;

  Index num_points() const { return alpha.size(); }
  Index dims() const { return theta.dims(); }
  // K_zz as used by the fit (including jitter).
  DenseMatrix kzz() const;
  DenseMatrix cross(const DenseMatrix& x) const;  // Sigma_xz K_zz
};

void check_fit_inputs(const Dataset& data, const SoftKIHyperparams& theta);

FittedPosterior fit_qr(const Dataset& data, const SoftKIHyperparams& theta,
                       Index block_rows = kDefaultBlockRows);

// Posterior from an arbitrary solver. QR goes through fit_qr; the others
// solve the explicit system and leave R empty (mean only). Throws the
// recorded error when the solver fails.
FittedPosterior fit_with_solver(const Dataset& data, const SoftKIHyperparams& theta,
                                const SolverSpec& spec);

DenseVector predict_mean(const FittedPosterior& post, const DenseMatrix& xs);
DenseVector predict_var(const FittedPosterior& post, const DenseMatrix& xs);

struct Metrics {
  double rmse = 0;
  double nll = 0;
};

// Gaussian metrics on the standardized scale; `noise_var` is added to var.
Metrics gaussian_metrics(const DenseVector& mean, const DenseVector& var,
                         const DenseVector& y, double noise_var);
Metrics test_metrics(const FittedPosterior& post, const DenseMatrix& xs,
                     const DenseVector& ys);

AltSolveResult alt_solve(const Dataset& data, const SoftKIHyperparams& theta,
                         const SolverSpec& spec);

}  // namespace softki
