#include "softki/objective.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "softki/interp.hpp"
#include "softki/kernel.hpp"

namespace softki {

const char* to_string(ObjectiveMode mode) {
  switch (mode) {
    case ObjectiveMode::kAuto:
      return "auto";
    case ObjectiveMode::kExact:
      return "exact";
    case ObjectiveMode::kPseudoloss:
      return "pseudoloss";
  }
  return "?";
}

ObjectiveMode objective_mode_from_string(const std::string& s) {
  if (s == "auto") return ObjectiveMode::kAuto;
  if (s == "exact") return ObjectiveMode::kExact;
  if (s == "pseudoloss") return ObjectiveMode::kPseudoloss;
  throw InvalidArgument("unknown objective mode '" + s + "'");
}

bool ObjectiveReport::finite() const {
  return std::isfinite(value) && flatten(gradient).allFinite();
}

ProbeSet ProbeSet::draw(Index length, int count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("need at least one probe vector");
  ProbeSet probes;
  probes.seed = seed;
  probes.vectors.resize(length, count);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int j = 0; j < count; ++j) {
    for (Index i = 0; i < length; ++i) probes.vectors(i, j) = normal(rng);
    probes.vectors.col(j).normalize();
  }
  return probes;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

template <typename S>
struct BatchState {
  Matrix<S> x;
  Vector<S> y;
  Matrix<S> z;
  Vector<S> temperature;
  S beta2;
  SoftmaxResult<S> softmax;
};

template <typename S>
BatchState<S> prepare(const DenseMatrix& x, const DenseVector& y,
                      const SoftKIHyperparams& theta) {
  if (x.rows() != y.size()) {
    throw DimensionMismatch("batch has " + std::to_string(x.rows()) +
                            " inputs and " + std::to_string(y.size()) +
                            " targets");
  }
  if (x.rows() < 1) throw InvalidArgument("empty batch");
  theta.validate(x.cols());
  BatchState<S> b;
  b.x = x.cast<S>();
  b.y = y.cast<S>();
  b.z = theta.interp.z.cast<S>();
  b.temperature = theta.interp.temperature.cast<S>();
  b.beta2 = S(theta.noise * theta.noise);
  b.softmax = softmax_interpolation<S>(b.x, b.z, b.temperature);
  return b;
}

// Pulls dL/dK_zz, dL/dSigma and dL/dbeta^2 back onto the hyperparameters.
template <typename S>
SoftKIHyperparams backprop(const SoftKIHyperparams& theta,
                           const BatchState<S>& b, const Matrix<S>& g_kzz,
                           const Matrix<S>& g_sigma, S g_beta2) {
  const MaternGrads<S> kg =
      matern32_param_grads<S>(b.z, b.z, theta.kernel, g_kzz, true);
  const SoftmaxGrads<S> sg =
      softmax_backward<S>(b.x, b.z, b.temperature, b.softmax, g_sigma);
  SoftKIHyperparams g = SoftKIHyperparams::zeros_like(theta);
  g.noise = 2.0 * theta.noise * double(g_beta2);
  g.kernel.outputscale = double(kg.outputscale);
  g.kernel.lengthscales = kg.lengthscales.template cast<double>();
  g.interp.z = (kg.x + kg.z + sg.z).template cast<double>();
  g.interp.temperature = sg.temperature.template cast<double>();
  return g;
}

template <typename S>
Matrix<S> symmetrized(const Matrix<S>& a) {
  return S(0.5) * (a + a.transpose());
}

template <typename S>
ObjectiveReport exact_low_rank(const DenseMatrix& x, const DenseVector& y,
                               const SoftKIHyperparams& theta,
                               const ExactOptions& options) {
  using linalg::cholesky_solve;
  const BatchState<S> b = prepare<S>(x, y, theta);
  const Index n = b.x.rows();
  const Index m = b.z.rows();

  Matrix<S> kzz = matern32_symmetric<S>(b.z, theta.kernel);
  const linalg::CholeskyResult<S> kchol =
      linalg::cholesky_upper<S>(kzz, options.jitter_schedule);
  kzz.diagonal().array() += kchol.jitter;

  const Matrix<S>& sigma = b.softmax.weights;
  const Matrix<S> khat = sigma * kzz;
  const Matrix<S> ktk = symmetrized<S>(khat.transpose() * khat);
  const Matrix<S> c = symmetrized<S>(kzz + ktk / b.beta2);
  // No jitter here: a failure means D itself is numerically unusable.
  const linalg::CholeskyResult<S> cchol = linalg::cholesky_upper<S>(c, {0.0});

  const S beta4 = b.beta2 * b.beta2;
  const Vector<S> t = cholesky_solve(cchol.factor, khat.transpose() * b.y);
  const Vector<S> a = b.y / b.beta2 - khat * t / beta4;
  const S quad = b.y.dot(a);
  const S logdet = S(n) * std::log(b.beta2) +
                   linalg::log_det_from_cholesky(cchol.factor) -
                   linalg::log_det_from_cholesky(kchol.factor);

  ObjectiveReport report;
  report.value = -0.5 * (double(quad) + double(logdet) + double(n) * kLog2Pi);
  report.mode_used = ObjectiveMode::kExact;
  report.diagnostics.jitter = double(kchol.jitter);

  // W = D^{-1} Sigma via Woodbury.
  const Matrix<S> w =
      sigma / b.beta2 -
      khat * cholesky_solve(cchol.factor, Matrix<S>(khat.transpose() * sigma)) /
          beta4;
  const Vector<S> s = sigma.transpose() * a;
  const Matrix<S> g_kzz =
      S(0.5) * (s * s.transpose() - sigma.transpose() * w);
  const Matrix<S> g_sigma = a * (kzz * s).transpose() - w * kzz;
  const S tr_dinv =
      S(n) / b.beta2 - cholesky_solve(cchol.factor, ktk).trace() / beta4;
  const S g_beta2 = S(0.5) * (a.squaredNorm() - tr_dinv);
  report.gradient = backprop<S>(theta, b, g_kzz, g_sigma, g_beta2);
  (void)m;
  return report;
}

template <typename S>
ObjectiveReport exact_dense(const DenseMatrix& x, const DenseVector& y,
                            const SoftKIHyperparams& theta) {
  using linalg::cholesky_solve;
  const BatchState<S> b = prepare<S>(x, y, theta);
  const Index n = b.x.rows();
  const Matrix<S> kzz = matern32_symmetric<S>(b.z, theta.kernel);
  const Matrix<S>& sigma = b.softmax.weights;
  Matrix<S> d = symmetrized<S>(sigma * kzz * sigma.transpose());
  d.diagonal().array() += b.beta2;
  const linalg::CholeskyResult<S> dchol = linalg::cholesky_upper<S>(d, {0.0});
  const Vector<S> a = cholesky_solve(dchol.factor, b.y);
  const Matrix<S> dinv =
      cholesky_solve(dchol.factor, Matrix<S>::Identity(n, n));

  ObjectiveReport report;
  report.value = -0.5 * (double(b.y.dot(a)) +
                         double(linalg::log_det_from_cholesky(dchol.factor)) +
                         double(n) * kLog2Pi);
  report.mode_used = ObjectiveMode::kExact;

  const Vector<S> s = sigma.transpose() * a;
  const Matrix<S> g_kzz =
      S(0.5) * (s * s.transpose() - sigma.transpose() * dinv * sigma);
  const Matrix<S> g_sigma = (a * a.transpose() - dinv) * sigma * kzz;
  const S g_beta2 = S(0.5) * (a.squaredNorm() - dinv.trace());
  report.gradient = backprop<S>(theta, b, g_kzz, g_sigma, g_beta2);
  return report;
}

template <typename S>
ObjectiveReport pseudoloss_impl(const DenseMatrix& x, const DenseVector& y,
                                const SoftKIHyperparams& theta,
                                const ProbeSet& probes,
                                const PseudolossOptions& options) {
  const BatchState<S> b = prepare<S>(x, y, theta);
  const Index n = b.x.rows();
  const int l = probes.count();
  if (probes.vectors.rows() != n) {
    throw DimensionMismatch("probe length does not match the batch");
  }
  const Matrix<S> kzz = matern32_symmetric<S>(b.z, theta.kernel);
  const Matrix<S>& sigma = b.softmax.weights;
  const S beta2 = b.beta2;
  const linalg::LinearOperator<S> apply_d = [&](const Matrix<S>& v) {
    Matrix<S> out = sigma * (kzz * (sigma.transpose() * v));
    out += beta2 * v;
    return out;
  };

  Matrix<S> rhs(n, l + 1);
  rhs.col(0) = b.y;
  rhs.rightCols(l) = probes.vectors.cast<S>();
  const linalg::CGReport<S> cg =
      linalg::block_cg<S>(apply_d, rhs, options.cg_tol, options.cg_max_iters);
  const Matrix<S>& u = cg.solutions;

  // Operator applied to (u_0, w_1 .. w_l).
  Matrix<S> probe_side = rhs;
  probe_side.col(0) = u.col(0);
  const Matrix<S> d_side = apply_d(probe_side);

  const S scale = options.scale_probes ? S(n) : S(1);
  S probe_term = 0;
  for (int j = 1; j <= l; ++j) probe_term += u.col(j).dot(d_side.col(j));
  const S quad = u.col(0).dot(d_side.col(0));

  ObjectiveReport report;
  report.value = -0.5 * (double(quad) + double(scale * probe_term / S(l)));
  report.mode_used = ObjectiveMode::kPseudoloss;
  report.diagnostics.cg_iterations = cg.iterations;
  report.diagnostics.cg_converged = cg.converged;
  report.diagnostics.cg_max_residual =
      cg.final_residual_norms.empty()
          ? 0.0
          : *std::max_element(cg.final_residual_norms.begin(),
                              cg.final_residual_norms.end());

  // With the solves held fixed, the surrogate gradient is <G, dD> for
  //   G = 1/2 u0 u0^T - scale/(2l) sum_j sym(u_j w_j^T),
  // i.e. the MLL gradient with the trace term replaced by its probe estimate.
  Vector<S> coef(l + 1);
  coef(0) = S(0.5);
  coef.tail(l).setConstant(-scale / (S(2) * S(l)));
  const Matrix<S>& left = u;             // u_0 .. u_l
  const Matrix<S>& right = probe_side;   // u_0, w_1 .. w_l
  const Matrix<S> pl = sigma.transpose() * left;
  const Matrix<S> pr = sigma.transpose() * right;
  const Matrix<S> g_kzz =
      S(0.5) * (pl * coef.asDiagonal() * pr.transpose() +
                pr * coef.asDiagonal() * pl.transpose());
  const Matrix<S> g_sigma =
      left * coef.asDiagonal() * (kzz * pr).transpose() +
      right * coef.asDiagonal() * (kzz * pl).transpose();
  S g_beta2 = 0;
  for (int k = 0; k <= l; ++k) g_beta2 += coef(k) * left.col(k).dot(right.col(k));
  report.gradient = backprop<S>(theta, b, g_kzz, g_sigma, g_beta2);
  return report;
}

}  // namespace

ObjectiveReport exact_mll(const DenseMatrix& x, const DenseVector& y,
                          const SoftKIHyperparams& theta,
                          const ExactOptions& options) {
  const bool single = options.precision == Precision::kFloat32;
  if (options.path == MllPath::kDense) {
    return single ? exact_dense<float>(x, y, theta)
                  : exact_dense<double>(x, y, theta);
  }
  return single ? exact_low_rank<float>(x, y, theta, options)
                : exact_low_rank<double>(x, y, theta, options);
}

ObjectiveReport hutchinson_pseudoloss(const DenseMatrix& x,
                                      const DenseVector& y,
                                      const SoftKIHyperparams& theta,
                                      const ProbeSet& probes,
                                      const PseudolossOptions& options) {
  return options.precision == Precision::kFloat32
             ? pseudoloss_impl<float>(x, y, theta, probes, options)
             : pseudoloss_impl<double>(x, y, theta, probes, options);
}

ObjectiveReport stabilized_objective(const DenseMatrix& x, const DenseVector& y,
                                     const SoftKIHyperparams& theta,
                                     const ObjectiveConfig& config,
                                     std::uint64_t probe_seed) {
  std::string reason;
  if (config.mode != ObjectiveMode::kPseudoloss) {
    ExactOptions exact;
    exact.jitter_schedule = config.jitter_schedule;
    exact.precision = config.precision;
    try {
      ObjectiveReport r = exact_mll(x, y, theta, exact);
      if (r.finite()) return r;
      reason = "non-finite exact objective";
    } catch (const NotPositiveDefinite& e) {
      reason = e.what();
    }
    if (config.mode == ObjectiveMode::kExact) {
      throw ObjectiveFailed("exact objective unstable: " + reason);
    }
  }
  PseudolossOptions pseudo;
  pseudo.cg_tol = config.cg_tol;
  pseudo.cg_max_iters = config.cg_max_iters;
  pseudo.scale_probes = config.scale_probes;
  pseudo.precision = config.precision;
  const ProbeSet probes = ProbeSet::draw(x.rows(), config.probes, probe_seed);
  ObjectiveReport r = hutchinson_pseudoloss(x, y, theta, probes, pseudo);
  r.diagnostics.fallback_reason = reason;
  if (!r.finite()) {
    throw ObjectiveFailed(reason.empty()
                              ? "pseudoloss is non-finite"
                              : "both objectives failed: " + reason);
  }
  return r;
}

TraceEstimate estimate_trace_inv_product(const DenseMatrix& d,
                                         const DenseMatrix& d_prime,
                                         const ProbeSet& probes, double cg_tol,
                                         int cg_max_iters) {
  const Index n = d.rows();
  if (d.cols() != n || d_prime.rows() != n || d_prime.cols() != n ||
      probes.vectors.rows() != n) {
    throw DimensionMismatch("estimate_trace_inv_product: shapes");
  }
  const linalg::LinearOperator<double> apply = [&](const DenseMatrix& v) {
    return DenseMatrix(d * v);
  };
  const auto cg =
      linalg::block_cg<double>(apply, probes.vectors, cg_tol, cg_max_iters);
  const DenseMatrix dw = d_prime * probes.vectors;
  double sum = 0;
  for (int j = 0; j < probes.count(); ++j) sum += cg.solutions.col(j).dot(dw.col(j));
  return {double(n) * sum / probes.count(), cg.iterations, cg.converged};
}

}  // namespace softki
