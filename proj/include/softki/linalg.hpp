#pragma once

// Dense linear-algebra kernels: jittered Cholesky, Householder QR,
// triangular solves and multi-right-hand-side conjugate gradients.
//
// Everything is templated on the scalar type. Double precision is the
// working precision of the library; float exists so that single-precision
// breakdowns of the training objective can be reproduced on purpose.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "softki/errors.hpp"

namespace softki {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using DenseMatrix = Matrix<double>;
using DenseVector = Vector<double>;

enum class Precision { kFloat64, kFloat32 };

namespace linalg {

// Square upper-triangular matrix. The strict lower part is always zero.
template <typename Scalar>
class UpperTriangular {
 public:
  UpperTriangular() = default;
  explicit UpperTriangular(Matrix<Scalar> data) : data_(std::move(data)) {
    if (data_.rows() != data_.cols()) {
      throw DimensionMismatch("UpperTriangular requires a square matrix");
    }
    data_.template triangularView<Eigen::StrictlyLower>().setZero();
  }

  Index order() const { return data_.rows(); }
  const Matrix<Scalar>& matrix() const { return data_; }
  Scalar operator()(Index i, Index j) const { return data_(i, j); }

  template <typename Other>
  UpperTriangular<Other> cast() const {
    return UpperTriangular<Other>(data_.template cast<Other>());
  }

 private:
  Matrix<Scalar> data_;
};

template <typename Scalar>
struct CholeskyResult {
  UpperTriangular<Scalar> factor;
  // Absolute diagonal shift that made the factorization succeed.
  Scalar jitter = 0;
};

// Relative multipliers of mean(diag(M)).
inline std::vector<double> default_jitter_schedule() {
  return {0.0, 1e-8, 1e-6, 1e-4};
}

template <typename Scalar>
double symmetry_tolerance() {
  return std::max(1e-10, 100.0 * double(std::numeric_limits<Scalar>::epsilon()));
}

namespace detail {

// Returns false as soon as a pivot is not strictly positive and finite.
template <typename Scalar>
bool try_cholesky_upper(const Matrix<Scalar>& m, Scalar shift,
                        Matrix<Scalar>& u) {
  const Index n = m.rows();
  u.setZero(n, n);
  for (Index k = 0; k < n; ++k) {
    Scalar pivot = m(k, k) + shift;
    if (k > 0) pivot -= u.col(k).head(k).squaredNorm();
    if (!(pivot > Scalar(0)) || !std::isfinite(pivot)) return false;
    const Scalar ukk = std::sqrt(pivot);
    u(k, k) = ukk;
    const Index rest = n - k - 1;
    if (rest == 0) continue;
    if (k > 0) {
      u.row(k).tail(rest).noalias() =
          m.row(k).tail(rest) -
          u.col(k).head(k).transpose() * u.block(0, k + 1, k, rest);
    } else {
      u.row(k).tail(rest) = m.row(k).tail(rest);
    }
    u.row(k).tail(rest) /= ukk;
  }
  return true;
}

}  // namespace detail

// Upper Cholesky factor U with U^T U = M + eps I, trying each relative
// jitter in `schedule` (scaled by mean(diag(M))) in order.
template <typename Scalar>
CholeskyResult<Scalar> cholesky_upper(
    const Matrix<Scalar>& m,
    const std::vector<double>& schedule = default_jitter_schedule()) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("cholesky_upper: matrix is " +
                            std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()));
  }
  const Index n = m.rows();
  if (n == 0) return {UpperTriangular<Scalar>(Matrix<Scalar>(0, 0)), 0};
  if (!m.allFinite()) {
    throw NotPositiveDefinite("cholesky_upper: matrix has non-finite entries");
  }
  const double scale = double(m.cwiseAbs().maxCoeff());
  const double asym = double((m - m.transpose()).cwiseAbs().maxCoeff());
  if (!(asym <= symmetry_tolerance<Scalar>() * std::max(scale, 1e-300))) {
    throw InvalidArgument("cholesky_upper: matrix is not symmetric");
  }
  const Scalar mean_diag = m.diagonal().mean();
  Matrix<Scalar> u;
  for (double rel : schedule) {
    const Scalar shift = Scalar(rel) * mean_diag;
    if (detail::try_cholesky_upper(m, shift, u)) {
      return {UpperTriangular<Scalar>(std::move(u)), shift};
    }
  }
  throw NotPositiveDefinite("cholesky_upper: factorization failed for all " +
                            std::to_string(schedule.size()) +
                            " jitter levels (order " + std::to_string(n) + ")");
}

// Solves R X = B by back substitution (B may hold several columns).
template <typename Scalar, typename Derived>
Matrix<Scalar> tri_solve_upper(const UpperTriangular<Scalar>& r,
                               const Eigen::MatrixBase<Derived>& b) {
  const Index n = r.order();
  if (b.rows() != n) throw DimensionMismatch("tri_solve_upper: rhs rows");
  const Matrix<Scalar>& rm = r.matrix();
  Matrix<Scalar> x = b;
  for (Index i = n - 1; i >= 0; --i) {
    const Scalar d = rm(i, i);
    if (d == Scalar(0)) {
      throw SingularTriangular("tri_solve_upper: zero diagonal at " +
                               std::to_string(i));
    }
    if (i + 1 < n) {
      x.row(i).noalias() -= rm.row(i).tail(n - i - 1) * x.bottomRows(n - i - 1);
    }
    x.row(i) /= d;
  }
  return x;
}

// Solves R^T X = B by forward substitution.
template <typename Scalar, typename Derived>
Matrix<Scalar> tri_solve_upper_transposed(const UpperTriangular<Scalar>& r,
                                          const Eigen::MatrixBase<Derived>& b) {
  const Index n = r.order();
  if (b.rows() != n) {
    throw DimensionMismatch("tri_solve_upper_transposed: rhs rows");
  }
  const Matrix<Scalar>& rm = r.matrix();
  Matrix<Scalar> x = b;
  for (Index i = 0; i < n; ++i) {
    const Scalar d = rm(i, i);
    if (d == Scalar(0)) {
      throw SingularTriangular("tri_solve_upper_transposed: zero diagonal at " +
                               std::to_string(i));
    }
    if (i > 0) {
      x.row(i).noalias() -= rm.col(i).head(i).transpose() * x.topRows(i);
    }
    x.row(i) /= d;
  }
  return x;
}

// Solves (U^T U) X = B given the upper Cholesky factor.
template <typename Scalar, typename Derived>
Matrix<Scalar> cholesky_solve(const UpperTriangular<Scalar>& u,
                              const Eigen::MatrixBase<Derived>& b) {
  return tri_solve_upper(u, tri_solve_upper_transposed(u, b));
}

template <typename Scalar>
Scalar log_det_from_cholesky(const UpperTriangular<Scalar>& u) {
  return Scalar(2) * u.matrix().diagonal().array().log().sum();
}

// Householder QR of a tall matrix, kept in packed LAPACK-style form so the
// reflectors can be applied to extra right-hand sides without forming Q.
template <typename Scalar>
class HouseholderQR {
 public:
  explicit HouseholderQR(Matrix<Scalar> a) : packed_(std::move(a)) {
    const Index rows = packed_.rows();
    const Index cols = packed_.cols();
    if (rows < cols) {
      throw DimensionMismatch("qr: need rows >= cols, got " +
                              std::to_string(rows) + "x" +
                              std::to_string(cols));
    }
    tau_.setZero(cols);
    Vector<Scalar> w;
    for (Index k = 0; k < cols; ++k) {
      const Index len = rows - k;
      auto x = packed_.col(k).tail(len);
      const Scalar x0 = x(0);
      const Scalar tail_norm2 =
          len > 1 ? x.tail(len - 1).squaredNorm() : Scalar(0);
      if (tail_norm2 == Scalar(0)) {
        tau_(k) = 0;
        continue;
      }
      const Scalar norm = std::sqrt(x0 * x0 + tail_norm2);
      const Scalar beta = x0 >= Scalar(0) ? -norm : norm;
      tau_(k) = (beta - x0) / beta;
      x.tail(len - 1) /= (x0 - beta);
      x(0) = beta;
      const Index rest = cols - k - 1;
      if (rest > 0) {
        auto trailing = packed_.block(k, k + 1, len, rest);
        // w = v^T A with v = (1, x_tail)
        w.noalias() = trailing.row(0).transpose();
        w.noalias() += trailing.bottomRows(len - 1).transpose() * x.tail(len - 1);
        trailing.row(0) -= tau_(k) * w.transpose();
        trailing.bottomRows(len - 1).noalias() -=
            (tau_(k) * x.tail(len - 1)) * w.transpose();
      }
    }
  }

  Index rows() const { return packed_.rows(); }
  Index cols() const { return packed_.cols(); }

  UpperTriangular<Scalar> r() const {
    return UpperTriangular<Scalar>(packed_.topRows(cols()));
  }

  // Returns Q^T B (all rows).
  template <typename Derived>
  Matrix<Scalar> apply_qt(const Eigen::MatrixBase<Derived>& b) const {
    if (b.rows() != rows()) throw DimensionMismatch("apply_qt: rhs rows");
    Matrix<Scalar> out = b;
    for (Index k = 0; k < cols(); ++k) reflect(k, out);
    return out;
  }

  Matrix<Scalar> thin_q() const {
    Matrix<Scalar> q = Matrix<Scalar>::Identity(rows(), cols());
    for (Index k = cols() - 1; k >= 0; --k) reflect(k, q);
    return q;
  }

  // First column whose |R_ii| falls below rel_tol * max_j |R_jj|, or -1.
  Index first_deficient_column(double rel_tol) const {
    if (cols() == 0) return -1;
    const auto diag = packed_.diagonal().head(cols()).cwiseAbs();
    const double largest = double(diag.maxCoeff());
    for (Index i = 0; i < cols(); ++i) {
      if (!(double(diag(i)) >= rel_tol * largest) || largest == 0.0) return i;
    }
    return -1;
  }

 private:
  void reflect(Index k, Matrix<Scalar>& b) const {
    if (tau_(k) == Scalar(0)) return;
    const Index len = rows() - k;
    auto v_tail = packed_.col(k).tail(len - 1);
    auto block = b.bottomRows(len);
    Vector<Scalar> w = block.row(0).transpose();
    w.noalias() += block.bottomRows(len - 1).transpose() * v_tail;
    block.row(0) -= tau_(k) * w.transpose();
    block.bottomRows(len - 1).noalias() -= (tau_(k) * v_tail) * w.transpose();
  }

  Matrix<Scalar> packed_;
  Vector<Scalar> tau_;
};

inline constexpr double kRankTolerance = 1e-12;

template <typename Scalar>
struct ThinQR {
  Matrix<Scalar> q;
  UpperTriangular<Scalar> r;
};

template <typename Scalar>
ThinQR<Scalar> qr_thin(const Matrix<Scalar>& a) {
  HouseholderQR<Scalar> qr(a);
  const Index bad = qr.first_deficient_column(kRankTolerance);
  if (bad >= 0) {
    throw RankDeficient("qr_thin: column " + std::to_string(bad) +
                        " is numerically dependent");
  }
  return {qr.thin_q(), qr.r()};
}

template <typename Scalar>
using LinearOperator = std::function<Matrix<Scalar>(const Matrix<Scalar>&)>;

template <typename Scalar>
struct CGReport {
  Matrix<Scalar> solutions;
  int iterations = 0;
  // Relative residual norms ||b - A x|| / ||b|| per column.
  std::vector<double> final_residual_norms;
  bool converged = false;
  // Largest relative residual across columns after each iteration.
  std::vector<double> residual_history;
};

// Conjugate gradients run on every column of `rhs` at once with a shared
// operator application per iteration. Columns stop updating once their
// relative residual reaches `tol`.
template <typename Scalar>
CGReport<Scalar> block_cg(const LinearOperator<Scalar>& apply,
                          const Matrix<Scalar>& rhs, double tol,
                          int max_iters) {
  if (!(tol > 0)) throw InvalidArgument("block_cg: tol must be positive");
  const Index n = rhs.rows();
  const Index k = rhs.cols();
  CGReport<Scalar> report;
  report.solutions.setZero(n, k);
  Matrix<Scalar> r = rhs;
  Matrix<Scalar> p = rhs;
  std::vector<double> b_norm(k), rel(k);
  std::vector<Scalar> rr(k);
  std::vector<char> active(k, 1);
  for (Index j = 0; j < k; ++j) {
    b_norm[j] = double(rhs.col(j).norm());
    rr[j] = r.col(j).squaredNorm();
    rel[j] = b_norm[j] > 0 ? 1.0 : 0.0;
    if (b_norm[j] == 0.0) {
      active[j] = 0;
      p.col(j).setZero();
    }
  }
  auto any_active = [&] {
    return std::any_of(active.begin(), active.end(), [](char a) { return a; });
  };
  while (any_active() && report.iterations < max_iters) {
    const Matrix<Scalar> ap = apply(p);
    ++report.iterations;
    for (Index j = 0; j < k; ++j) {
      if (!active[j]) continue;
      const Scalar pap = p.col(j).dot(ap.col(j));
      if (!(pap > Scalar(0)) || !std::isfinite(pap)) {
        // Breakdown: the operator is not positive definite along p.
        active[j] = 0;
        p.col(j).setZero();
        continue;
      }
      const Scalar alpha = rr[j] / pap;
      report.solutions.col(j) += alpha * p.col(j);
      r.col(j) -= alpha * ap.col(j);
      const Scalar rr_new = r.col(j).squaredNorm();
      rel[j] = std::sqrt(double(rr_new)) / b_norm[j];
      if (rel[j] <= tol) {
        active[j] = 0;
        p.col(j).setZero();
      } else {
        p.col(j) = r.col(j) + (rr_new / rr[j]) * p.col(j);
      }
      rr[j] = rr_new;
    }
    report.residual_history.push_back(*std::max_element(rel.begin(), rel.end()));
  }
  report.final_residual_norms = rel;
  report.converged = std::all_of(rel.begin(), rel.end(),
                                 [tol](double v) { return v <= tol; });
  return report;
}

}  // namespace linalg
}  // namespace softki
