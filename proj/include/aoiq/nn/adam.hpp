#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "aoiq/nn/tensor.hpp"

namespace aoiq::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam moment accumulators and step counter for one ordered parameter list.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

  /// Bias-corrected Adam update from the accumulated gradients.
  void step(const ParameterList<Scalar>& params) {
    bind(params);
    for (const auto* p : params)
      if (!p->grad.allFinite()) throw NumericError("non-finite gradient in " + p->name);
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    const Scalar b1 = static_cast<Scalar>(cfg_.beta1), b2 = static_cast<Scalar>(cfg_.beta2);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = *params[k];
      auto& m = first_[k];
      auto& v = second_[k];
      m = b1 * m + (Scalar(1) - b1) * p.grad;
      v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseProduct(p.grad);
      const Scalar lr = static_cast<Scalar>(cfg_.learning_rate / c1);
      const Scalar root_c2 = static_cast<Scalar>(std::sqrt(c2));
      p.value.array() -= lr * m.array() / (v.array().sqrt() / root_c2 + static_cast<Scalar>(cfg_.epsilon));
    }
  }

  std::uint64_t steps() const { return steps_; }
  const std::vector<Matrix<Scalar>>& first_moments() const { return first_; }
  const std::vector<Matrix<Scalar>>& second_moments() const { return second_; }

  void restore(std::uint64_t steps, std::vector<Matrix<Scalar>> first, std::vector<Matrix<Scalar>> second) {
    require_shape(first.size() == second.size(), "adam restore: moment count mismatch");
    steps_ = steps;
    first_ = std::move(first);
    second_ = std::move(second);
  }

 private:
  void bind(const ParameterList<Scalar>& params) {
    if (first_.empty() && steps_ == 0) {
      for (const auto* p : params) {
        first_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
        second_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      }
    }
    require_shape(first_.size() == params.size(), "adam: parameter count changed");
    for (std::size_t k = 0; k < params.size(); ++k)
      require_shape(first_[k].rows() == params[k]->value.rows() && first_[k].cols() == params[k]->value.cols(),
                    "adam: moment shape mismatch for " + params[k]->name);
  }

  AdamConfig cfg_;
  std::uint64_t steps_ = 0;
  std::vector<Matrix<Scalar>> first_;
  std::vector<Matrix<Scalar>> second_;
};

template <typename Scalar>
void zero_grad(const ParameterList<Scalar>& params) {
  for (auto* p : params) p->zero_grad();
}

template <typename Scalar>
double grad_norm(const ParameterList<Scalar>& params) {
  double sq = 0.0;
  for (const auto* p : params) sq += static_cast<double>(p->grad.squaredNorm());
  return std::sqrt(sq);
}

/// Rescales gradients so their global norm is at most `max_norm`; returns the pre-clip norm.
template <typename Scalar>
double clip_grad_norm(const ParameterList<Scalar>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const Scalar scale = static_cast<Scalar>(max_norm / norm);
    for (auto* p : params) p->grad *= scale;
  }
  return norm;
}

/// target <- (1 - tau) * target + tau * source, parameter by parameter.
template <typename Scalar>
void polyak_update(const ParameterList<Scalar>& target, const ParameterList<Scalar>& source, double tau) {
  require_shape(target.size() == source.size(), "polyak: parameter count mismatch");
  const Scalar t = static_cast<Scalar>(tau);
  for (std::size_t k = 0; k < target.size(); ++k)
    target[k]->value = (Scalar(1) - t) * target[k]->value + t * source[k]->value;
}

}  // namespace aoiq::nn
