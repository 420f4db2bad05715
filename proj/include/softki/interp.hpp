#pragma once

// Softmax interpolation weights and the SoftKI kernel pieces.
//
//   Sigma_ij = exp(-||x_i / T - z_j||) / sum_k exp(-||x_i / T - z_k||)
//
// T divides the inputs elementwise per dimension; the interpolation points
// are not rescaled.

#include <cmath>
#include <string>

#include "softki/kernel.hpp"
#include "softki/linalg.hpp"

namespace softki {

struct InterpolationState {
  DenseMatrix z;            // m x d
  DenseVector temperature;  // d

  Index size() const { return z.rows(); }
  Index dims() const { return z.cols(); }

  void validate(Index d) const {
    if (z.rows() < 1) throw InvalidArgument("need at least one interpolation point");
    if (z.cols() != d || temperature.size() != d) {
      throw DimensionMismatch("interpolation state has dims z=" +
                              std::to_string(z.cols()) + " T=" +
                              std::to_string(temperature.size()) +
                              ", inputs have " + std::to_string(d));
    }
    if (!z.allFinite()) throw InvalidArgument("interpolation points must be finite");
    if (!(temperature.array() > 0).all()) {
      throw NonPositiveTemperature("temperature must be strictly positive");
    }
  }
};

template <typename Scalar>
struct SoftmaxResult {
  Matrix<Scalar> weights;    // n x m, rows sum to one
  Matrix<Scalar> distances;  // n x m, ||x_i / T - z_j||
};

template <typename Scalar>
SoftmaxResult<Scalar> softmax_interpolation(const Matrix<Scalar>& x,
                                            const Matrix<Scalar>& z,
                                            const Vector<Scalar>& temperature) {
  if (x.cols() != z.cols() || temperature.size() != x.cols()) {
    throw DimensionMismatch("softmax_weights: dimension mismatch");
  }
  if (!(temperature.array() > Scalar(0)).all()) {
    throw NonPositiveTemperature("softmax_weights: temperature must be > 0");
  }
  const Matrix<Scalar> u = x * temperature.cwiseInverse().asDiagonal();
  SoftmaxResult<Scalar> out;
  out.distances = kernel_detail::squared_distances(u, z).cwiseSqrt();
  // Shift each row by its smallest distance before exponentiating.
  const Vector<Scalar> nearest = out.distances.rowwise().minCoeff();
  out.weights = (-(out.distances.colwise() - nearest).array()).exp().matrix();
  const Vector<Scalar> total = out.weights.rowwise().sum();
  out.weights.array().colwise() /= total.array();
  return out;
}

template <typename Scalar>
Matrix<Scalar> softmax_weights(const Matrix<Scalar>& x,
                               const Matrix<Scalar>& z,
                               const Vector<Scalar>& temperature) {
  return softmax_interpolation(x, z, temperature).weights;
}

inline DenseMatrix softmax_weights(const DenseMatrix& x,
                                   const InterpolationState& s) {
  s.validate(x.cols());
  return softmax_weights<double>(x, s.z, s.temperature);
}

template <typename Scalar>
struct SoftmaxGrads {
  Matrix<Scalar> z;            // m x d
  Vector<Scalar> temperature;  // d
};

// Vector-Jacobian product of the softmax weights with respect to z and T.
// The distance gradient at coincident points is taken to be zero.
template <typename Scalar>
SoftmaxGrads<Scalar> softmax_backward(const Matrix<Scalar>& x,
                                      const Matrix<Scalar>& z,
                                      const Vector<Scalar>& temperature,
                                      const SoftmaxResult<Scalar>& fwd,
                                      const Matrix<Scalar>& upstream) {
  const Index n = x.rows();
  const Index m = z.rows();
  const Index d = x.cols();
  const Matrix<Scalar>& w = fwd.weights;
  // d loss / d logits, logits = -distance.
  const Vector<Scalar> centered = (upstream.cwiseProduct(w)).rowwise().sum();
  Matrix<Scalar> g_logit = w.cwiseProduct(upstream);
  g_logit -= w.cwiseProduct(centered.replicate(1, m));
  // d loss / d distance, divided by the distance.
  Matrix<Scalar> scaled = -g_logit;
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) {
      const Scalar dist = fwd.distances(i, j);
      scaled(i, j) = dist > Scalar(0) ? scaled(i, j) / dist : Scalar(0);
    }
  }
  const Vector<Scalar> inv_t = temperature.cwiseInverse();
  const Matrix<Scalar> ut = (x * inv_t.asDiagonal()).transpose();  // d x n
  const Matrix<Scalar> zt = z.transpose();                          // d x m
  Matrix<Scalar> gut = Matrix<Scalar>::Zero(d, n);
  Matrix<Scalar> gzt = Matrix<Scalar>::Zero(d, m);
  Vector<Scalar> diff(d);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) {
      const Scalar c = scaled(i, j);
      if (c == Scalar(0)) continue;
      diff = c * (ut.col(i) - zt.col(j));
      gut.col(i) += diff;
      gzt.col(j) -= diff;
    }
  }
  SoftmaxGrads<Scalar> g;
  g.z = gzt.transpose();
  // u = x / T  =>  du/dT = -x / T^2 = -u / T
  g.temperature =
      -(gut.cwiseProduct(ut)).rowwise().sum().cwiseProduct(inv_t);
  return g;
}

// Sigma_xz, K_zz and Khat_xz = Sigma_xz K_zz.
struct SoftKICross {
  DenseMatrix weights;
  DenseMatrix kzz;
  DenseMatrix khat;
};

inline SoftKICross softki_cross(const DenseMatrix& x,
                                const InterpolationState& s,
                                const MaternParams& p) {
  s.validate(x.cols());
  SoftKICross out;
  out.weights = softmax_weights<double>(x, s.z, s.temperature);
  out.kzz = matern32_symmetric<double>(s.z, p);
  out.khat = out.weights * out.kzz;
  return out;
}

// Sigma_xz K_zz Sigma_xz^T (n x n; meant for small n).
inline DenseMatrix softki_gram(const DenseMatrix& x, const InterpolationState& s,
                               const MaternParams& p) {
  const SoftKICross c = softki_cross(x, s, p);
  DenseMatrix g = c.khat * c.weights.transpose();
  return 0.5 * (g + g.transpose());
}

}  // namespace softki
