#pragma once

// Matérn-3/2 kernel with ARD lengthscales and an output scale:
//   k(x, z) = s2 (1 + sqrt(3) r) exp(-sqrt(3) r),  r = ||(x - z) / l||.

#include <cmath>
#include <string>

#include "softki/linalg.hpp"

namespace softki {

inline constexpr double kLengthscaleMin = 0.01;
inline constexpr double kLengthscaleMax = 5.0;

struct MaternParams {
  DenseVector lengthscales;
  double outputscale = 1.0;

  Index dims() const { return lengthscales.size(); }

  void validate(Index d) const {
    if (lengthscales.size() != d) {
      throw DimensionMismatch("kernel has " +
                              std::to_string(lengthscales.size()) +
                              " lengthscales, inputs have " +
                              std::to_string(d) + " dims");
    }
    if (!(outputscale > 0) || !std::isfinite(outputscale)) {
      throw InvalidArgument("outputscale must be positive and finite");
    }
    if (!(lengthscales.array() > 0).all() || !lengthscales.allFinite()) {
      throw InvalidArgument("lengthscales must be positive and finite");
    }
  }
};

namespace kernel_detail {

inline constexpr double kSqrt3 = 1.7320508075688772935;

// Squared distances by the expanded-norm identity, clamped at zero.
template <typename Scalar>
Matrix<Scalar> squared_distances(const Matrix<Scalar>& a,
                                 const Matrix<Scalar>& b) {
  const Vector<Scalar> an = a.rowwise().squaredNorm();
  const Vector<Scalar> bn = b.rowwise().squaredNorm();
  Matrix<Scalar> d2 = Scalar(-2) * (a * b.transpose());
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  return d2.cwiseMax(Scalar(0));
}

template <typename Scalar>
Matrix<Scalar> scale_columns(const Matrix<Scalar>& x,
                             const DenseVector& lengthscales) {
  const Vector<Scalar> inv = lengthscales.cwiseInverse().cast<Scalar>();
  return x * inv.asDiagonal();
}

template <typename Scalar>
Matrix<Scalar> matern_from_distance(const Matrix<Scalar>& r, double s2) {
  const Scalar sr3 = Scalar(kSqrt3);
  return (Scalar(s2) * (Scalar(1) + sr3 * r.array()) *
          (-sr3 * r.array()).exp())
      .matrix();
}

}  // namespace kernel_detail

template <typename Scalar>
Matrix<Scalar> matern32(const Matrix<Scalar>& x, const Matrix<Scalar>& z,
                        const MaternParams& p) {
  if (x.cols() != z.cols()) {
    throw DimensionMismatch("matern32: x has " + std::to_string(x.cols()) +
                            " dims, z has " + std::to_string(z.cols()));
  }
  p.validate(x.cols());
  const Matrix<Scalar> xs = kernel_detail::scale_columns(x, p.lengthscales);
  const Matrix<Scalar> zs = kernel_detail::scale_columns(z, p.lengthscales);
  const Matrix<Scalar> r =
      kernel_detail::squared_distances(xs, zs).cwiseSqrt();
  return kernel_detail::matern_from_distance(r, p.outputscale);
}

// k(z, z): exactly symmetric with the diagonal pinned to s2.
template <typename Scalar>
Matrix<Scalar> matern32_symmetric(const Matrix<Scalar>& z,
                                  const MaternParams& p) {
  p.validate(z.cols());
  const Matrix<Scalar> zs = kernel_detail::scale_columns(z, p.lengthscales);
  Matrix<Scalar> d2 = kernel_detail::squared_distances(zs, zs);
  d2 = (Scalar(0.5) * (d2 + d2.transpose())).eval();
  d2.diagonal().setZero();
  return kernel_detail::matern_from_distance(
      Matrix<Scalar>(d2.cwiseSqrt()), p.outputscale);
}

template <typename Scalar>
struct MaternGrads {
  Vector<Scalar> lengthscales;
  Scalar outputscale = 0;
  Matrix<Scalar> x;  // d/dx_i rows; empty unless requested
  Matrix<Scalar> z;  // d/dz_j rows; empty unless requested
};

// Vector-Jacobian product: sum_ij upstream_ij * dK_ij/dparam for the
// lengthscales, the output scale and (optionally) both point sets.
//
// dk/dl_k = 3 s2 exp(-sqrt3 r) (x_k - z_k)^2 / l_k^3
// dk/dx   = -3 s2 exp(-sqrt3 r) (x - z) / l^2
// Both are finite at r = 0 (the input gradient vanishes there).
template <typename Scalar>
MaternGrads<Scalar> matern32_param_grads(const Matrix<Scalar>& x,
                                         const Matrix<Scalar>& z,
                                         const MaternParams& p,
                                         const Matrix<Scalar>& upstream,
                                         bool with_inputs = true) {
  if (x.cols() != z.cols()) throw DimensionMismatch("matern32_param_grads: dims");
  if (upstream.rows() != x.rows() || upstream.cols() != z.rows()) {
    throw DimensionMismatch("matern32_param_grads: upstream shape");
  }
  p.validate(x.cols());
  const Index n = x.rows();
  const Index m = z.rows();
  const Index d = x.cols();
  const Scalar s2 = Scalar(p.outputscale);
  const Scalar sr3 = Scalar(kernel_detail::kSqrt3);
  const Vector<Scalar> inv_l2 =
      p.lengthscales.array().square().inverse().matrix().cast<Scalar>();

  // Points as columns for contiguous per-point access.
  const Matrix<Scalar> xt = x.transpose();
  const Matrix<Scalar> zt = z.transpose();

  MaternGrads<Scalar> g;
  Vector<Scalar> dl = Vector<Scalar>::Zero(d);
  Scalar ds2 = 0;
  Matrix<Scalar> gxt, gzt;
  if (with_inputs) {
    gxt.setZero(d, n);
    gzt.setZero(d, m);
  }
  Vector<Scalar> diff(d);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) {
      const Scalar up = upstream(i, j);
      if (up == Scalar(0)) continue;
      diff = xt.col(i) - zt.col(j);
      const Scalar r = std::sqrt(diff.cwiseAbs2().dot(inv_l2));
      const Scalar e = std::exp(-sr3 * r);
      ds2 += up * (Scalar(1) + sr3 * r) * e;
      const Scalar coef = Scalar(3) * s2 * e * up;
      dl.array() += coef * diff.array().square();
      if (with_inputs) {
        diff.array() *= coef * inv_l2.array();
        gxt.col(i) -= diff;
        gzt.col(j) += diff;
      }
    }
  }
  g.lengthscales =
      dl.cwiseQuotient(p.lengthscales.array().cube().matrix().cast<Scalar>());
  g.outputscale = ds2;
  if (with_inputs) {
    g.x = gxt.transpose();
    g.z = gzt.transpose();
  }
  return g;
}

}  // namespace softki
