#pragma once

// Model hyperparameters and the unconstrained parameterization the
// optimizer works in.
//
//   noise variance  beta^2 = kNoiseVarianceFloor + softplus(r)
//   outputscale     s2     = softplus(r)
//   lengthscale     l      = l_min + (l_max - l_min) sigmoid(r)
//   temperature     T      = softplus(r)
//   interpolation / inducing points are used as-is.

#include "softki/interp.hpp"
#include "softki/kernel.hpp"
#include "softki/linalg.hpp"

namespace softki {

inline constexpr double kNoiseVarianceFloor = 1e-4;

struct SoftKIHyperparams {
  double noise = 1.0;  // observation noise std beta; Lambda = beta^2 I
  MaternParams kernel;
  InterpolationState interp;

  Index dims() const { return kernel.dims(); }
  Index num_points() const { return interp.size(); }
  void validate(Index d) const;

  // All-zero value with the same shapes (used for gradients).
  static SoftKIHyperparams zeros_like(const SoftKIHyperparams& other);
};

// Same layout without temperatures; used by SGPR.
struct SGPRHyperparams {
  double noise = 1.0;
  MaternParams kernel;
  DenseMatrix z;

  void validate(Index d) const;
  static SGPRHyperparams zeros_like(const SGPRHyperparams& other);
};

// Flattened gradient norm over every component.
double gradient_norm(const SoftKIHyperparams& g);
// Concatenates every component into one vector (for comparisons).
DenseVector flatten(const SoftKIHyperparams& g);
DenseVector flatten(const SGPRHyperparams& g);

namespace bijection {

double softplus(double r);
double softplus_inverse(double v);
double sigmoid(double r);
double logit(double p);

double lengthscale_from_raw(double r);
double lengthscale_to_raw(double l);
double lengthscale_derivative(double r);

double noise_from_raw(double r);
double noise_to_raw(double beta);
double noise_derivative(double r);  // d beta / d r

}  // namespace bijection

// Raw layout: [noise, outputscale, lengthscales(d), temperature(d), z(m*d)]
// with z stored row by row. SGPR omits the temperature block.
class Parameterization {
 public:
  Parameterization(Index m, Index d, bool has_temperature);

  Index size() const;
  Index num_points() const { return m_; }
  Index dims() const { return d_; }
  bool has_temperature() const { return has_temperature_; }

  DenseVector to_raw(const SoftKIHyperparams& p) const;
  SoftKIHyperparams softki_from_raw(const DenseVector& raw) const;
  // Chain rule: gradient in natural coordinates -> gradient in raw ones.
  DenseVector raw_gradient(const DenseVector& raw,
                           const SoftKIHyperparams& natural_grad) const;

  DenseVector to_raw(const SGPRHyperparams& p) const;
  SGPRHyperparams sgpr_from_raw(const DenseVector& raw) const;
  DenseVector raw_gradient(const DenseVector& raw,
                           const SGPRHyperparams& natural_grad) const;

 private:
  Index z_offset() const;

  Index m_;
  Index d_;
  bool has_temperature_;
};

}  // namespace softki
