#include "softki/sgpr.hpp"

#include <cmath>

#include "softki/kernel.hpp"
#include "softki/kmeans.hpp"

namespace softki {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

ElboReport sgpr_elbo(const DenseMatrix& x, const DenseVector& y,
                     const SGPRHyperparams& theta) {
  using linalg::cholesky_solve;
  const Index n = x.rows();
  if (y.size() != n) throw DimensionMismatch("targets do not match inputs");
  if (n < 1) throw InvalidArgument("empty batch");
  theta.validate(x.cols());
  const Index m = theta.z.rows();
  const double b2 = theta.noise * theta.noise;
  const double b4 = b2 * b2;

  DenseMatrix kzz = matern32_symmetric<double>(theta.z, theta.kernel);
  const auto kchol = linalg::cholesky_upper<double>(kzz);
  kzz.diagonal().array() += kchol.jitter;
  const DenseMatrix kxz = matern32<double>(x, theta.z, theta.kernel);
  // V = K_xz U^{-1}, so Q = V V^T.
  const DenseMatrix v =
      linalg::tri_solve_upper_transposed(kchol.factor, kxz.transpose()).transpose();
  const DenseMatrix vtv = v.transpose() * v;
  DenseMatrix b = vtv / b2;
  b.diagonal().array() += 1.0;
  b = 0.5 * (b + b.transpose());
  const auto bchol = linalg::cholesky_upper<double>(b, {0.0});

  const DenseVector vty = v.transpose() * y;
  const DenseVector a = y / b2 - v * cholesky_solve(bchol.factor, vty) / b4;
  const double logdet = double(n) * std::log(b2) +
                        linalg::log_det_from_cholesky(bchol.factor);
  const double tr_q = vtv.trace();
  const double trace_gap = double(n) * theta.kernel.outputscale - tr_q;

  ElboReport out;
  out.jitter = kchol.jitter;
  out.trace_gap = trace_gap;
  out.value = -0.5 * (y.dot(a) + logdet + double(n) * kLog2Pi) -
              trace_gap / (2.0 * b2);

  // P = K_xz K_zz^{-1}
  const DenseMatrix p = cholesky_solve(kchol.factor, kxz.transpose()).transpose();
  const DenseMatrix dinv_p =
      p / b2 - v * cholesky_solve(bchol.factor, DenseMatrix(v.transpose() * p)) / b4;
  const DenseVector pta = p.transpose() * a;
  const DenseMatrix g_kxz = a * pta.transpose() - dinv_p + p / b2;
  DenseMatrix g_kzz = -0.5 * pta * pta.transpose() +
                      0.5 * p.transpose() * dinv_p -
                      p.transpose() * p / (2.0 * b2);
  g_kzz = 0.5 * (g_kzz + g_kzz.transpose());
  const double tr_dinv =
      double(n) / b2 - cholesky_solve(bchol.factor, vtv).trace() / b4;
  const double g_b2 =
      0.5 * (a.squaredNorm() - tr_dinv) + trace_gap / (2.0 * b4);

  const auto gx = matern32_param_grads<double>(x, theta.z, theta.kernel, g_kxz, true);
  const auto gz =
      matern32_param_grads<double>(theta.z, theta.z, theta.kernel, g_kzz, true);
  out.gradient = SGPRHyperparams::zeros_like(theta);
  out.gradient.noise = 2.0 * theta.noise * g_b2;
  out.gradient.kernel.outputscale =
      gx.outputscale + gz.outputscale - double(n) / (2.0 * b2);
  out.gradient.kernel.lengthscales = gx.lengthscales + gz.lengthscales;
  out.gradient.z = gx.z + gz.x + gz.z;
  (void)m;
  return out;
}

SGPRTrainResult train_sgpr_from(const Dataset& train, const SGPRConfig& cfg,
                                const SGPRHyperparams& init) {
  const Index n = train.size();
  if (n < 1) throw InvalidArgument("empty training set");
  const Parameterization param(init.z.rows(), train.dims(), false);
  const RawObjective objective = [&](const DenseVector& raw) {
    const SGPRHyperparams theta = param.sgpr_from_raw(raw);
    const ElboReport r = sgpr_elbo(train.x, train.y, theta);
    return std::make_pair(r.value / double(n),
                          DenseVector(param.raw_gradient(raw, r.gradient) / double(n)));
  };
  FullBatchSchedule s;
  s.epochs = cfg.epochs;
  s.learning_rate = cfg.learning_rate;
  s.lr_step_epochs = cfg.lr_step_epochs;
  s.lr_decay = cfg.lr_decay;
  SGPRTrainResult out;
  const DenseVector raw =
      run_full_batch_adam(param.to_raw(init), objective, s, out.trace);
  out.theta = param.sgpr_from_raw(raw);
  return out;
}

SGPRTrainResult train_sgpr(const Dataset& train, const SGPRConfig& cfg) {
  if (cfg.m < 1) throw InvalidArgument("m must be at least 1");
  SGPRHyperparams init;
  init.noise = cfg.init_noise;
  init.kernel.outputscale = cfg.init_outputscale;
  init.kernel.lengthscales = DenseVector::Constant(train.dims(), cfg.init_lengthscale);
  init.z = kmeans(train.x, cfg.m, cfg.seed);
  return train_sgpr_from(train, cfg, init);
}

DenseMatrix SGPRPosterior::kzz() const {
  return uzz.matrix().transpose() * uzz.matrix();
}

SGPRPosterior sgpr_fit(const Dataset& data, const SGPRHyperparams& theta,
                       const SolverSpec& spec) {
  if (data.size() < 1) throw InvalidArgument("empty dataset");
  theta.validate(data.dims());
  SGPRPosterior post;
  post.theta = theta;
  post.solver = spec.kind;
  const DenseMatrix kzz = matern32_symmetric<double>(theta.z, theta.kernel);
  const auto kchol = factor_kzz(kzz);
  post.uzz = kchol.factor;
  post.jitter = kchol.jitter;
  const MaternParams kp = theta.kernel;
  const DenseMatrix z = theta.z;
  const CrossFn cross = [kp, z](const DenseMatrix& xb) {
    return matern32<double>(xb, z, kp);
  };
  switch (spec.kind) {
    case SolverKind::kQR: {
      QRSolution sol =
          streaming_qr_solve(post.uzz, cross, data.x, data.y, theta.noise);
      post.r = std::move(sol.r);
      post.alpha = std::move(sol.alpha);
      break;
    }
    case SolverKind::kDirect: {
      const NormalSystem sys =
          assemble_normal_system(post.uzz, cross, data.x, data.y, theta.noise);
      const AltSolveResult r = solve_normal_system(sys, spec);
      if (!r.ok) throw ObjectiveFailed("direct SGPR solve failed: " + r.error);
      post.c = sys.c_hat;
      post.alpha = r.alpha;
      break;
    }
    default:
      throw InvalidArgument("SGPR supports the qr and direct solvers");
  }
  return post;
}

DenseVector sgpr_predict_mean(const SGPRPosterior& post, const DenseMatrix& xs) {
  return matern32<double>(xs, post.theta.z, post.theta.kernel) * post.alpha;
}

DenseVector sgpr_predict_var(const SGPRPosterior& post, const DenseMatrix& xs) {
  const DenseMatrix kzs =
      matern32<double>(xs, post.theta.z, post.theta.kernel).transpose();
  const DenseVector prior_term =
      linalg::tri_solve_upper_transposed(post.uzz, kzs).colwise().squaredNorm();
  DenseVector post_term;
  if (post.solver == SolverKind::kQR) {
    post_term = linalg::tri_solve_upper_transposed(post.r, kzs).colwise().squaredNorm();
  } else {
    post_term = (kzs.cwiseProduct(post.c.partialPivLu().solve(kzs)))
                    .colwise()
                    .sum()
                    .transpose();
  }
  const DenseVector var =
      (post.theta.kernel.outputscale - prior_term.array() + post_term.array())
          .matrix();
  return var.cwiseMax(0.0);
}

Metrics sgpr_test_metrics(const SGPRPosterior& post, const DenseMatrix& xs,
                          const DenseVector& ys) {
  return gaussian_metrics(sgpr_predict_mean(post, xs), sgpr_predict_var(post, xs),
                          ys, post.theta.noise * post.theta.noise);
}

}  // namespace softki
