#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "aoiq/core/random.hpp"
#include "aoiq/nn/tensor.hpp"

namespace aoiq::nn {

template <typename Scalar>
struct LstmState {
  Matrix<Scalar> h;  // hidden x batch
  Matrix<Scalar> c;  // hidden x batch

  static LstmState zeros(Eigen::Index hidden, Eigen::Index batch) {
    return {Matrix<Scalar>::Zero(hidden, batch), Matrix<Scalar>::Zero(hidden, batch)};
  }
};

/// Long short-term memory cell. Gate rows are stacked [input; forget; candidate; output].
template <typename Scalar>
class Lstm {
 public:
  Lstm() = default;
  Lstm(const std::string& name, Eigen::Index in, Eigen::Index hidden)
      : input_weight(name + ".input_weight", 4 * hidden, in),
        recurrent_weight(name + ".recurrent_weight", 4 * hidden, hidden),
        bias(name + ".bias", 4 * hidden, 1),
        hidden_(hidden) {}

  Eigen::Index in_dim() const { return input_weight.value.cols(); }
  Eigen::Index hidden_size() const { return hidden_; }

  // Small uniform weights; forget-gate bias starts at +1.
  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (auto* p : {&input_weight, &recurrent_weight, &bias})
      for (Eigen::Index i = 0; i < p->value.size(); ++i)
        p->value.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
    bias.value.block(hidden_, 0, hidden_, 1).setConstant(Scalar(1));
  }

  LstmState<Scalar> step(const Matrix<Scalar>& x, const LstmState<Scalar>& s) const {
    Cache cache;
    return step_impl(x, s, cache);
  }

  /// Runs a window and records everything needed by backward_sequence().
  std::vector<Matrix<Scalar>> forward_sequence(const std::vector<Matrix<Scalar>>& xs, const LstmState<Scalar>& init) {
    caches_.clear();
    caches_.resize(xs.size());
    std::vector<Matrix<Scalar>> hs;
    hs.reserve(xs.size());
    LstmState<Scalar> s = init;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      s = step_impl(xs[t], s, caches_[t]);
      hs.push_back(s.h);
    }
    final_ = s;
    return hs;
  }

  /// Single recorded step; the caller drives the recurrence (closed-loop inputs).
  LstmState<Scalar> forward_step(const Matrix<Scalar>& x, const LstmState<Scalar>& s) {
    caches_.emplace_back();
    final_ = step_impl(x, s, caches_.back());
    return final_;
  }

  void clear_tape() { caches_.clear(); }
  std::size_t tape_length() const { return caches_.size(); }
  const LstmState<Scalar>& final_state() const { return final_; }

  /// Truncated backpropagation through the recorded window. `grad_h[t]` is
  /// d(loss)/d(h_t); gradients into the initial state are dropped.
  std::vector<Matrix<Scalar>> backward_sequence(const std::vector<Matrix<Scalar>>& grad_h) {
    require_shape(grad_h.size() == caches_.size(), "lstm backward: window length mismatch");
    std::vector<Matrix<Scalar>> grad_x(caches_.size());
    if (caches_.empty()) return grad_x;
    const Eigen::Index batch = caches_.front().x.cols();
    Matrix<Scalar> dh_next = Matrix<Scalar>::Zero(hidden_, batch);
    Matrix<Scalar> dc_next = Matrix<Scalar>::Zero(hidden_, batch);
    const Eigen::Index H = hidden_;
    for (std::size_t k = caches_.size(); k-- > 0;) {
      const Cache& c = caches_[k];
      const Matrix<Scalar> dh = grad_h[k] + dh_next;
      const auto i = c.gates.topRows(H).array();
      const auto f = c.gates.middleRows(H, H).array();
      const auto g = c.gates.middleRows(2 * H, H).array();
      const auto o = c.gates.bottomRows(H).array();
      const auto tc = c.tanh_c.array();
      Matrix<Scalar> dc = dc_next.array() + dh.array() * o * (Scalar(1) - tc * tc);
      Matrix<Scalar> dz(4 * H, batch);
      dz.topRows(H) = (dc.array() * g * i * (Scalar(1) - i)).matrix();
      dz.middleRows(H, H) = (dc.array() * c.c_prev.array() * f * (Scalar(1) - f)).matrix();
      dz.middleRows(2 * H, H) = (dc.array() * i * (Scalar(1) - g * g)).matrix();
      dz.bottomRows(H) = (dh.array() * tc * o * (Scalar(1) - o)).matrix();
      input_weight.grad.noalias() += dz * c.x.transpose();
      recurrent_weight.grad.noalias() += dz * c.h_prev.transpose();
      bias.grad += dz.rowwise().sum();
      grad_x[k] = input_weight.value.transpose() * dz;
      dh_next = recurrent_weight.value.transpose() * dz;
      dc_next = (dc.array() * f).matrix();
    }
    return grad_x;
  }

  ParameterList<Scalar> parameters() { return {&input_weight, &recurrent_weight, &bias}; }

  Parameter<Scalar> input_weight;
  Parameter<Scalar> recurrent_weight;
  Parameter<Scalar> bias;

 private:
  struct Cache {
    Matrix<Scalar> x, h_prev, c_prev, gates, tanh_c;
  };

  static Scalar sigmoid(Scalar z) { return Scalar(1) / (Scalar(1) + std::exp(-z)); }

  LstmState<Scalar> step_impl(const Matrix<Scalar>& x, const LstmState<Scalar>& s, Cache& cache) const {
    require_shape(x.rows() == in_dim(), "lstm: input has " + std::to_string(x.rows()) + " rows, expected " +
                                            std::to_string(in_dim()));
    require_shape(s.h.rows() == hidden_ && s.c.rows() == hidden_ && s.h.cols() == x.cols() && s.c.cols() == x.cols(),
                  "lstm: state shape mismatch");
    const Eigen::Index H = hidden_;
    Matrix<Scalar> z = input_weight.value * x + recurrent_weight.value * s.h;
    z.colwise() += bias.value.col(0);
    z.topRows(2 * H) = z.topRows(2 * H).unaryExpr(&sigmoid);
    z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
    z.bottomRows(H) = z.bottomRows(H).unaryExpr(&sigmoid);
    LstmState<Scalar> next;
    next.c = (z.middleRows(H, H).array() * s.c.array() + z.topRows(H).array() * z.middleRows(2 * H, H).array()).matrix();
    Matrix<Scalar> tanh_c = next.c.array().tanh().matrix();
    next.h = (z.bottomRows(H).array() * tanh_c.array()).matrix();
    cache.x = x;
    cache.h_prev = s.h;
    cache.c_prev = s.c;
    cache.gates = std::move(z);
    cache.tanh_c = std::move(tanh_c);
    return next;
  }

  Eigen::Index hidden_ = 0;
  std::vector<Cache> caches_;
  LstmState<Scalar> final_;
};

}  // namespace aoiq::nn
