#include "softki/exact_gp.hpp"

#include <cmath>

#include "softki/params.hpp"

namespace softki {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_size(Index n) {
  if (n > kExactGPMaxPoints) {
    throw TooLarge("exact GP is limited to " + std::to_string(kExactGPMaxPoints) +
                   " points, got " + std::to_string(n));
  }
  if (n < 1) throw InvalidArgument("empty dataset");
}

void validate(const ExactGPHyperparams& t, Index d) {
  if (!(t.noise > 0) || !std::isfinite(t.noise)) {
    throw InvalidArgument("noise must be positive and finite");
  }
  t.kernel.validate(d);
}

DenseMatrix noisy_gram(const DenseMatrix& x, const ExactGPHyperparams& t) {
  DenseMatrix k = matern32_symmetric<double>(x, t.kernel);
  k.diagonal().array() += t.noise * t.noise;
  return k;
}

}  // namespace

ExactMllReport exact_gp_mll(const DenseMatrix& x, const DenseVector& y,
                            const ExactGPHyperparams& theta) {
  const Index n = x.rows();
  check_size(n);
  if (y.size() != n) throw DimensionMismatch("targets do not match inputs");
  validate(theta, x.cols());
  const auto chol = linalg::cholesky_upper<double>(noisy_gram(x, theta), {0.0});
  const DenseVector a = linalg::cholesky_solve(chol.factor, y);
  const DenseMatrix dinv =
      linalg::cholesky_solve(chol.factor, DenseMatrix::Identity(n, n));
  ExactMllReport out;
  out.value = -0.5 * (y.dot(a) + linalg::log_det_from_cholesky(chol.factor) +
                      double(n) * kLog2Pi);
  const DenseMatrix g = 0.5 * (a * a.transpose() - dinv);
  const auto kg = matern32_param_grads<double>(x, x, theta.kernel, g, false);
  out.gradient.noise = 2.0 * theta.noise * g.trace();
  out.gradient.kernel.outputscale = kg.outputscale;
  out.gradient.kernel.lengthscales = kg.lengthscales;
  return out;
}

ExactGPTrainResult train_exact_gp(const Dataset& train, const ExactGPConfig& cfg) {
  const Index n = train.size();
  const Index d = train.dims();
  check_size(n);
  DenseVector raw(2 + d);
  raw(0) = bijection::noise_to_raw(cfg.init_noise);
  raw(1) = bijection::softplus_inverse(cfg.init_outputscale);
  raw.tail(d).setConstant(bijection::lengthscale_to_raw(cfg.init_lengthscale));
  const auto decode = [d](const DenseVector& r) {
    ExactGPHyperparams t;
    t.noise = bijection::noise_from_raw(r(0));
    t.kernel.outputscale = bijection::softplus(r(1));
    t.kernel.lengthscales.resize(d);
    for (Index k = 0; k < d; ++k) {
      t.kernel.lengthscales(k) = bijection::lengthscale_from_raw(r(2 + k));
    }
    return t;
  };
  const RawObjective objective = [&](const DenseVector& r) {
    const ExactMllReport rep = exact_gp_mll(train.x, train.y, decode(r));
    DenseVector g(2 + d);
    g(0) = rep.gradient.noise * bijection::noise_derivative(r(0));
    g(1) = rep.gradient.kernel.outputscale * bijection::sigmoid(r(1));
    for (Index k = 0; k < d; ++k) {
      g(2 + k) = rep.gradient.kernel.lengthscales(k) *
                 bijection::lengthscale_derivative(r(2 + k));
    }
    return std::make_pair(rep.value / double(n), DenseVector(g / double(n)));
  };
  FullBatchSchedule s;
  s.epochs = cfg.epochs;
  s.learning_rate = cfg.learning_rate;
  ExactGPTrainResult out;
  out.theta = decode(run_full_batch_adam(raw, objective, s, out.trace));
  return out;
}

ExactGPPosterior exact_gp_fit(const Dataset& data, const ExactGPHyperparams& theta) {
  check_size(data.size());
  validate(theta, data.dims());
  ExactGPPosterior post;
  post.theta = theta;
  post.x = data.x;
  post.u = linalg::cholesky_upper<double>(noisy_gram(data.x, theta), {0.0}).factor;
  post.alpha = linalg::cholesky_solve(post.u, data.y);
  return post;
}

DenseVector exact_gp_predict_mean(const ExactGPPosterior& post, const DenseMatrix& xs) {
  return matern32<double>(xs, post.x, post.theta.kernel) * post.alpha;
}

DenseVector exact_gp_predict_var(const ExactGPPosterior& post, const DenseMatrix& xs) {
  const DenseMatrix kxs = matern32<double>(xs, post.x, post.theta.kernel).transpose();
  const DenseVector q =
      linalg::tri_solve_upper_transposed(post.u, kxs).colwise().squaredNorm();
  return (post.theta.kernel.outputscale - q.array()).matrix().cwiseMax(0.0);
}

Metrics exact_gp_test_metrics(const ExactGPPosterior& post, const DenseMatrix& xs,
                              const DenseVector& ys) {
  return gaussian_metrics(exact_gp_predict_mean(post, xs),
                          exact_gp_predict_var(post, xs), ys,
                          post.theta.noise * post.theta.noise);
}

}  // namespace softki
