#pragma once

#include <cmath>

#include "aoiq/nn/tensor.hpp"

namespace aoiq::nn {

/// Column-wise softmax with max subtraction.
template <typename Scalar>
Matrix<Scalar> softmax(const Matrix<Scalar>& logits) {
  Matrix<Scalar> p(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const Scalar m = logits.col(j).maxCoeff();
    p.col(j) = (logits.col(j).array() - m).exp();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits) {
  return softmax<Scalar>(Matrix<Scalar>(logits)).col(0);
}

template <typename Scalar>
Matrix<Scalar> log_softmax(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const Scalar m = logits.col(j).maxCoeff();
    const Scalar lse = m + std::log((logits.col(j).array() - m).exp().sum());
    out.col(j) = logits.col(j).array() - lse;
  }
  return out;
}

/// Pulls d(loss)/d(probabilities) back to d(loss)/d(logits).
template <typename Scalar>
Matrix<Scalar> softmax_backward(const Matrix<Scalar>& probs, const Matrix<Scalar>& grad_probs) {
  require_shape(probs.rows() == grad_probs.rows() && probs.cols() == grad_probs.cols(), "softmax_backward shape");
  Matrix<Scalar> g(probs.rows(), probs.cols());
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    const Scalar inner = probs.col(j).dot(grad_probs.col(j));
    g.col(j) = probs.col(j).array() * (grad_probs.col(j).array() - inner);
  }
  return g;
}

/// Mean squared error over all entries; `grad` receives d(loss)/d(pred).
template <typename Scalar>
Scalar mse_loss(const Matrix<Scalar>& pred, const Matrix<Scalar>& target, Matrix<Scalar>* grad = nullptr) {
  require_shape(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse_loss shape");
  const Matrix<Scalar> diff = pred - target;
  const Scalar n = static_cast<Scalar>(diff.size());
  if (grad) *grad = diff * (Scalar(2) / n);
  return diff.squaredNorm() / n;
}

}  // namespace aoiq::nn
