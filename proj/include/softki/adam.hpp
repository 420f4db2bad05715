#pragma once

#include "softki/linalg.hpp"

namespace softki {

// Adam with bias correction. `ascend` moves the parameters along +gradient.
class AdamState {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  explicit AdamState(Index size)
      : m_(DenseVector::Zero(size)), v_(DenseVector::Zero(size)) {}

  void ascend(DenseVector& params, const DenseVector& grad, double lr) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
      throw DimensionMismatch("adam: parameter size changed");
    }
    ++step_;
    m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
    v_ = kBeta2 * v_ + (1.0 - kBeta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(kBeta1, step_);
    const double c2 = 1.0 - std::pow(kBeta2, step_);
    params.array() +=
        lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + kEpsilon);
  }

  int step() const { return step_; }
  const DenseVector& first_moment() const { return m_; }
  const DenseVector& second_moment() const { return v_; }

 private:
  DenseVector m_;
  DenseVector v_;
  int step_ = 0;
};

}  // namespace softki
