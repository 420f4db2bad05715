#include "softki/posterior.hpp"

#include <cmath>
#include <cstdlib>

#include "softki/interp.hpp"
#include "softki/kernel.hpp"

namespace softki {

linalg::CholeskyResult<double> factor_kzz(const DenseMatrix& kzz) {
  return linalg::cholesky_upper<double>(kzz);
}

QRSolution streaming_qr_solve(const linalg::UpperTriangular<double>& uzz,
                              const CrossFn& cross, const DenseMatrix& x,
                              const DenseVector& y, double beta,
                              Index block_rows) {
  const Index m = uzz.order();
  const Index n = x.rows();
  if (y.size() != n) throw DimensionMismatch("targets do not match inputs");
  if (block_rows < 1) throw InvalidArgument("block size must be positive");
  if (!(beta > 0)) throw InvalidArgument("noise must be positive");

  DenseMatrix r = uzz.matrix();
  DenseVector c = DenseVector::Zero(m);
  QRSolution out;
  out.accounting.block_rows = block_rows;
  for (Index start = 0; start < n; start += block_rows) {
    const Index nb = std::min(block_rows, n - start);
    const DenseMatrix cb = cross(x.middleRows(start, nb));
    if (cb.rows() != nb || cb.cols() != m) {
      throw DimensionMismatch("cross block has the wrong shape");
    }
    DenseMatrix stacked(m + nb, m);
    stacked.topRows(m) = r;
    stacked.bottomRows(nb) = cb / beta;
    DenseVector rhs(m + nb);
    rhs.head(m) = c;
    rhs.tail(nb) = y.segment(start, nb) / beta;
    const linalg::HouseholderQR<double> qr(std::move(stacked));
    r = qr.r().matrix();
    c = qr.apply_qt(rhs).col(0).head(m);
    ++out.accounting.blocks;
    out.accounting.peak_rows = std::max(out.accounting.peak_rows, m + nb);
  }
  const double top = r.diagonal().cwiseAbs().maxCoeff();
  for (Index i = 0; i < m; ++i) {
    if (!(std::abs(r(i, i)) > linalg::kRankTolerance * top)) {
      throw RankDeficient(
          "posterior system is rank deficient at column " + std::to_string(i) +
          "; increase the jitter or reduce the number of points");
    }
  }
  out.r = linalg::UpperTriangular<double>(std::move(r));
  out.projected_rhs = c;
  out.alpha = linalg::tri_solve_upper(out.r, c);
  return out;
}

NormalSystem assemble_normal_system(const linalg::UpperTriangular<double>& uzz,
                                    const CrossFn& cross, const DenseMatrix& x,
                                    const DenseVector& y, double beta) {
  const DenseMatrix c = cross(x);
  const double b2 = beta * beta;
  NormalSystem sys;
  sys.c_hat = uzz.matrix().transpose() * uzz.matrix() + c.transpose() * c / b2;
  sys.c_hat = 0.5 * (sys.c_hat + sys.c_hat.transpose());
  sys.rhs = c.transpose() * y / b2;
  return sys;
}

SolverSpec SolverSpec::parse(const std::string& s) {
  SolverSpec spec;
  if (s == "qr") {
    spec.kind = SolverKind::kQR;
  } else if (s == "direct") {
    spec.kind = SolverKind::kDirect;
  } else if (s == "cholesky") {
    spec.kind = SolverKind::kCholesky;
  } else if (s.rfind("cg:", 0) == 0) {
    spec.kind = SolverKind::kCG;
    char* end = nullptr;
    const std::string tol = s.substr(3);
    spec.cg_tol = std::strtod(tol.c_str(), &end);
    if (tol.empty() || end != tol.c_str() + tol.size() || !(spec.cg_tol > 0)) {
      throw InvalidArgument("bad cg tolerance in solver '" + s + "'");
    }
  } else {
    throw InvalidArgument("unknown solver '" + s + "'");
  }
  return spec;
}

std::string SolverSpec::name() const {
  switch (kind) {
    case SolverKind::kQR:
      return "qr";
    case SolverKind::kDirect:
      return "direct";
    case SolverKind::kCholesky:
      return "cholesky";
    case SolverKind::kCG: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "cg:%g", cg_tol);
      return buf;
    }
  }
  return "?";
}

AltSolveResult solve_normal_system(const NormalSystem& sys, const SolverSpec& spec) {
  AltSolveResult out;
  const Index m = sys.rhs.size();
  try {
    switch (spec.kind) {
      case SolverKind::kQR:
        throw InvalidArgument("qr works on the stacked system, not C_hat");
      case SolverKind::kDirect:
        out.alpha = sys.c_hat.partialPivLu().solve(sys.rhs);
        break;
      case SolverKind::kCholesky: {
        const auto f = linalg::cholesky_upper<double>(sys.c_hat, {0.0});
        out.alpha = linalg::cholesky_solve(f.factor, sys.rhs);
        break;
      }
      case SolverKind::kCG: {
        const linalg::LinearOperator<double> apply = [&](const DenseMatrix& v) {
          return DenseMatrix(sys.c_hat * v);
        };
        const auto cg = linalg::block_cg<double>(apply, sys.rhs, spec.cg_tol,
                                                 std::max<int>(int(m), 1000));
        out.alpha = cg.solutions.col(0);
        out.iterations = cg.iterations;
        out.residual_history = cg.residual_history;
        break;
      }
    }
    out.ok = out.alpha.allFinite();
    if (!out.ok) out.error = "non-finite solution";
  } catch (const Error& e) {
    out.error = std::string(e.kind()) + ": " + e.what();
    out.alpha = DenseVector::Constant(m, std::nan(""));
  }
  const double bn = sys.rhs.norm();
  out.relative_residual =
      (sys.c_hat * out.alpha - sys.rhs).norm() / (bn > 0 ? bn : 1.0);
  return out;
}

DenseMatrix FittedPosterior::kzz() const {
  return uzz.matrix().transpose() * uzz.matrix();
}

DenseMatrix FittedPosterior::cross(const DenseMatrix& x) const {
  if (x.cols() != dims()) {
    throw DimensionMismatch("expected " + std::to_string(dims()) +
                            " input dims, got " + std::to_string(x.cols()));
  }
  return softmax_weights<double>(x, theta.interp.z, theta.interp.temperature) *
         kzz();
}

void check_fit_inputs(const Dataset& data, const SoftKIHyperparams& theta) {
  if (data.size() < 1) throw InvalidArgument("empty dataset");
  if (data.y.size() != data.size()) {
    throw DimensionMismatch("targets do not match inputs");
  }
  theta.validate(data.dims());
}

namespace {

struct Prepared {
  linalg::CholeskyResult<double> kchol;
  DenseMatrix kzz;
  CrossFn cross;
};

Prepared prepare(const SoftKIHyperparams& theta) {
  Prepared p;
  DenseMatrix kzz = matern32_symmetric<double>(theta.interp.z, theta.kernel);
  p.kchol = factor_kzz(kzz);
  kzz.diagonal().array() += p.kchol.jitter;
  p.kzz = kzz;
  const DenseMatrix z = theta.interp.z;
  const DenseVector t = theta.interp.temperature;
  p.cross = [z, t, kzz](const DenseMatrix& xb) {
    return DenseMatrix(softmax_weights<double>(xb, z, t) * kzz);
  };
  return p;
}

}  // namespace

FittedPosterior fit_qr(const Dataset& data, const SoftKIHyperparams& theta,
                       Index block_rows) {
  check_fit_inputs(data, theta);
  const Prepared p = prepare(theta);
  QRSolution sol = streaming_qr_solve(p.kchol.factor, p.cross, data.x, data.y,
                                      theta.noise, block_rows);
  FittedPosterior post;
  post.theta = theta;
  post.uzz = p.kchol.factor;
  post.r = std::move(sol.r);
  post.alpha = std::move(sol.alpha);
  post.projected_rhs = std::move(sol.projected_rhs);
  post.jitter = p.kchol.jitter;
  post.accounting = sol.accounting;
  return post;
}

AltSolveResult alt_solve(const Dataset& data, const SoftKIHyperparams& theta,
                         const SolverSpec& spec) {
  check_fit_inputs(data, theta);
  const Prepared p = prepare(theta);
  if (spec.kind == SolverKind::kQR) {
    AltSolveResult out;
    const NormalSystem sys =
        assemble_normal_system(p.kchol.factor, p.cross, data.x, data.y, theta.noise);
    try {
      out.alpha = streaming_qr_solve(p.kchol.factor, p.cross, data.x, data.y,
                                     theta.noise)
                      .alpha;
      out.ok = out.alpha.allFinite();
    } catch (const Error& e) {
      out.error = std::string(e.kind()) + ": " + e.what();
      out.alpha = DenseVector::Constant(theta.num_points(), std::nan(""));
    }
    out.relative_residual =
        (sys.c_hat * out.alpha - sys.rhs).norm() / std::max(sys.rhs.norm(), 1e-300);
    return out;
  }
  const NormalSystem sys =
      assemble_normal_system(p.kchol.factor, p.cross, data.x, data.y, theta.noise);
  return solve_normal_system(sys, spec);
}

FittedPosterior fit_with_solver(const Dataset& data, const SoftKIHyperparams& theta,
                                const SolverSpec& spec) {
  if (spec.kind == SolverKind::kQR) return fit_qr(data, theta);
  const AltSolveResult r = alt_solve(data, theta, spec);
  if (!r.ok) throw ObjectiveFailed("solver " + spec.name() + " failed: " + r.error);
  const Prepared p = prepare(theta);
  FittedPosterior post;
  post.theta = theta;
  post.uzz = p.kchol.factor;
  post.alpha = r.alpha;
  post.jitter = p.kchol.jitter;
  return post;
}

DenseVector predict_mean(const FittedPosterior& post, const DenseMatrix& xs) {
  return post.cross(xs) * post.alpha;
}

DenseVector predict_var(const FittedPosterior& post, const DenseMatrix& xs) {
  if (post.r.order() != post.num_points()) {
    throw InvalidArgument("variance needs the QR factor; refit with the qr solver");
  }
  const DenseMatrix khat = post.cross(xs);
  const DenseMatrix v = linalg::tri_solve_upper_transposed(post.r, khat.transpose());
  return v.colwise().squaredNorm().transpose().cwiseMax(0.0);
}

Metrics gaussian_metrics(const DenseVector& mean, const DenseVector& var,
                         const DenseVector& y, double noise_var) {
  if (mean.size() != y.size() || var.size() != y.size()) {
    throw DimensionMismatch("metrics: length mismatch");
  }
  Metrics m;
  if (y.size() == 0) return m;
  const DenseVector r = mean - y;
  m.rmse = std::sqrt(r.squaredNorm() / double(y.size()));
  constexpr double kLog2Pi = 1.8378770664093454836;
  double total = 0;
  for (Index i = 0; i < y.size(); ++i) {
    const double s = var(i) + noise_var;
    total += 0.5 * (kLog2Pi + std::log(s)) + 0.5 * r(i) * r(i) / s;
  }
  m.nll = total / double(y.size());
  return m;
}

Metrics test_metrics(const FittedPosterior& post, const DenseMatrix& xs,
                     const DenseVector& ys) {
  const DenseVector mean = predict_mean(post, xs);
  DenseVector var = post.r.order() == post.num_points()
                        ? predict_var(post, xs)
                        : DenseVector::Zero(xs.rows());
  return gaussian_metrics(mean, var, ys, post.theta.noise * post.theta.noise);
}

}  // namespace softki
