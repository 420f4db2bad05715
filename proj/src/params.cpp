#include "softki/params.hpp"

#include <algorithm>
#include <cmath>

namespace softki {

void SoftKIHyperparams::validate(Index d) const {
  if (!(noise > 0) || !std::isfinite(noise)) {
    throw InvalidArgument("noise must be positive and finite");
  }
  kernel.validate(d);
  interp.validate(d);
}

SoftKIHyperparams SoftKIHyperparams::zeros_like(const SoftKIHyperparams& o) {
  SoftKIHyperparams g;
  g.noise = 0;
  g.kernel.outputscale = 0;
  g.kernel.lengthscales = DenseVector::Zero(o.kernel.lengthscales.size());
  g.interp.z = DenseMatrix::Zero(o.interp.z.rows(), o.interp.z.cols());
  g.interp.temperature = DenseVector::Zero(o.interp.temperature.size());
  return g;
}

void SGPRHyperparams::validate(Index d) const {
  if (!(noise > 0) || !std::isfinite(noise)) {
    throw InvalidArgument("noise must be positive and finite");
  }
  kernel.validate(d);
  if (z.cols() != d) throw DimensionMismatch("inducing points have wrong dims");
  if (z.rows() < 1) throw InvalidArgument("need at least one inducing point");
}

SGPRHyperparams SGPRHyperparams::zeros_like(const SGPRHyperparams& o) {
  SGPRHyperparams g;
  g.noise = 0;
  g.kernel.outputscale = 0;
  g.kernel.lengthscales = DenseVector::Zero(o.kernel.lengthscales.size());
  g.z = DenseMatrix::Zero(o.z.rows(), o.z.cols());
  return g;
}

DenseVector flatten(const SoftKIHyperparams& g) {
  const Index d = g.kernel.lengthscales.size();
  const Index nz = g.interp.z.size();
  DenseVector v(2 + 2 * d + nz);
  v(0) = g.noise;
  v(1) = g.kernel.outputscale;
  v.segment(2, d) = g.kernel.lengthscales;
  v.segment(2 + d, d) = g.interp.temperature;
  v.tail(nz) = Eigen::Map<const DenseVector>(g.interp.z.data(), nz);
  return v;
}

DenseVector flatten(const SGPRHyperparams& g) {
  const Index d = g.kernel.lengthscales.size();
  const Index nz = g.z.size();
  DenseVector v(2 + d + nz);
  v(0) = g.noise;
  v(1) = g.kernel.outputscale;
  v.segment(2, d) = g.kernel.lengthscales;
  v.tail(nz) = Eigen::Map<const DenseVector>(g.z.data(), nz);
  return v;
}

double gradient_norm(const SoftKIHyperparams& g) { return flatten(g).norm(); }

namespace bijection {

double softplus(double r) {
  return r > 30 ? r : std::log1p(std::exp(r));
}

double softplus_inverse(double v) {
  if (!(v > 0)) throw InvalidArgument("softplus_inverse needs v > 0");
  return v > 30 ? v : std::log(std::expm1(v));
}

double sigmoid(double r) {
  if (r >= 0) return 1.0 / (1.0 + std::exp(-r));
  const double e = std::exp(r);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double lengthscale_from_raw(double r) {
  return kLengthscaleMin + (kLengthscaleMax - kLengthscaleMin) * sigmoid(r);
}

double lengthscale_to_raw(double l) {
  const double span = kLengthscaleMax - kLengthscaleMin;
  double p = (l - kLengthscaleMin) / span;
  // Keep the preimage finite for values on (or beyond) the cap.
  p = std::clamp(p, 1e-9, 1.0 - 1e-9);
  return logit(p);
}

double lengthscale_derivative(double r) {
  const double s = sigmoid(r);
  return (kLengthscaleMax - kLengthscaleMin) * s * (1.0 - s);
}

double noise_from_raw(double r) {
  return std::sqrt(kNoiseVarianceFloor + softplus(r));
}

double noise_to_raw(double beta) {
  const double excess = beta * beta - kNoiseVarianceFloor;
  return softplus_inverse(std::max(excess, 1e-12));
}

double noise_derivative(double r) {
  return sigmoid(r) / (2.0 * noise_from_raw(r));
}

}  // namespace bijection

Parameterization::Parameterization(Index m, Index d, bool has_temperature)
    : m_(m), d_(d), has_temperature_(has_temperature) {}

Index Parameterization::z_offset() const {
  return 2 + d_ + (has_temperature_ ? d_ : 0);
}

Index Parameterization::size() const { return z_offset() + m_ * d_; }

namespace {

void write_points(const DenseMatrix& z, DenseVector& raw, Index offset) {
  const Index d = z.cols();
  for (Index j = 0; j < z.rows(); ++j) {
    raw.segment(offset + j * d, d) = z.row(j).transpose();
  }
}

DenseMatrix read_points(const DenseVector& raw, Index offset, Index m, Index d) {
  DenseMatrix z(m, d);
  for (Index j = 0; j < m; ++j) z.row(j) = raw.segment(offset + j * d, d);
  return z;
}

}  // namespace

DenseVector Parameterization::to_raw(const SoftKIHyperparams& p) const {
  if (!has_temperature_) throw InvalidArgument("parameterization has no temperature");
  p.validate(d_);
  if (p.num_points() != m_) throw DimensionMismatch("wrong number of points");
  DenseVector raw(size());
  raw(0) = bijection::noise_to_raw(p.noise);
  raw(1) = bijection::softplus_inverse(p.kernel.outputscale);
  for (Index k = 0; k < d_; ++k) {
    raw(2 + k) = bijection::lengthscale_to_raw(p.kernel.lengthscales(k));
    raw(2 + d_ + k) = bijection::softplus_inverse(p.interp.temperature(k));
  }
  write_points(p.interp.z, raw, z_offset());
  return raw;
}

SoftKIHyperparams Parameterization::softki_from_raw(const DenseVector& raw) const {
  if (raw.size() != size()) throw DimensionMismatch("raw parameter size");
  SoftKIHyperparams p;
  p.noise = bijection::noise_from_raw(raw(0));
  p.kernel.outputscale = bijection::softplus(raw(1));
  p.kernel.lengthscales.resize(d_);
  p.interp.temperature.resize(d_);
  for (Index k = 0; k < d_; ++k) {
    p.kernel.lengthscales(k) = bijection::lengthscale_from_raw(raw(2 + k));
    p.interp.temperature(k) = bijection::softplus(raw(2 + d_ + k));
  }
  p.interp.z = read_points(raw, z_offset(), m_, d_);
  return p;
}

DenseVector Parameterization::raw_gradient(const DenseVector& raw,
                                           const SoftKIHyperparams& g) const {
  DenseVector out(size());
  out(0) = g.noise * bijection::noise_derivative(raw(0));
  out(1) = g.kernel.outputscale * bijection::sigmoid(raw(1));
  for (Index k = 0; k < d_; ++k) {
    out(2 + k) =
        g.kernel.lengthscales(k) * bijection::lengthscale_derivative(raw(2 + k));
    out(2 + d_ + k) =
        g.interp.temperature(k) * bijection::sigmoid(raw(2 + d_ + k));
  }
  write_points(g.interp.z, out, z_offset());
  return out;
}

DenseVector Parameterization::to_raw(const SGPRHyperparams& p) const {
  p.validate(d_);
  if (p.z.rows() != m_) throw DimensionMismatch("wrong number of points");
  DenseVector raw(size());
  raw(0) = bijection::noise_to_raw(p.noise);
  raw(1) = bijection::softplus_inverse(p.kernel.outputscale);
  for (Index k = 0; k < d_; ++k) {
    raw(2 + k) = bijection::lengthscale_to_raw(p.kernel.lengthscales(k));
  }
  write_points(p.z, raw, z_offset());
  return raw;
}

SGPRHyperparams Parameterization::sgpr_from_raw(const DenseVector& raw) const {
  if (raw.size() != size()) throw DimensionMismatch("raw parameter size");
  SGPRHyperparams p;
  p.noise = bijection::noise_from_raw(raw(0));
  p.kernel.outputscale = bijection::softplus(raw(1));
  p.kernel.lengthscales.resize(d_);
  for (Index k = 0; k < d_; ++k) {
    p.kernel.lengthscales(k) = bijection::lengthscale_from_raw(raw(2 + k));
  }
  p.z = read_points(raw, z_offset(), m_, d_);
  return p;
}

DenseVector Parameterization::raw_gradient(const DenseVector& raw,
                                           const SGPRHyperparams& g) const {
  DenseVector out(size());
  out(0) = g.noise * bijection::noise_derivative(raw(0));
  out(1) = g.kernel.outputscale * bijection::sigmoid(raw(1));
  for (Index k = 0; k < d_; ++k) {
    out(2 + k) =
        g.kernel.lengthscales(k) * bijection::lengthscale_derivative(raw(2 + k));
  }
  write_points(g.z, out, z_offset());
  return out;
}

}  // namespace softki
