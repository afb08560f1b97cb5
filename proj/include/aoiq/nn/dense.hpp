#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "aoiq/core/random.hpp"
#include "aoiq/nn/tensor.hpp"

namespace aoiq::nn {

enum class Activation { identity, relu };

/// Fully connected layer operating on column batches (features x batch).
template <typename Scalar>
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, Eigen::Index in, Eigen::Index out, Activation act)
      : weight(name + ".weight", out, in), bias(name + ".bias", out, 1), activation(act) {}

  Eigen::Index in_dim() const { return weight.value.cols(); }
  Eigen::Index out_dim() const { return weight.value.rows(); }

  // U(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
  void init_fan_in(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
    for (Eigen::Index i = 0; i < weight.value.size(); ++i)
      weight.value.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
    for (Eigen::Index i = 0; i < bias.value.size(); ++i)
      bias.value.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
  }

  Matrix<Scalar> infer(const Matrix<Scalar>& x) const {
    require_shape(x.rows() == in_dim(), "dense " + weight.name + ": input has " + std::to_string(x.rows()) +
                                            " rows, expected " + std::to_string(in_dim()));
    Matrix<Scalar> y = weight.value * x;
    y.colwise() += bias.value.col(0);
    if (activation == Activation::relu) y = y.cwiseMax(Scalar(0));
    return y;
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    input_ = x;
    output_ = infer(x);
    return output_;
  }

  /// Accumulates parameter gradients and returns d(loss)/d(input).
  Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) {
    require_shape(grad_out.rows() == out_dim() && grad_out.cols() == input_.cols(),
                  "dense " + weight.name + ": gradient shape mismatch");
    Matrix<Scalar> dz = grad_out;
    if (activation == Activation::relu) dz.array() *= (output_.array() > Scalar(0)).template cast<Scalar>();
    weight.grad.noalias() += dz * input_.transpose();
    bias.grad += dz.rowwise().sum();
    return weight.value.transpose() * dz;
  }

  ParameterList<Scalar> parameters() { return {&weight, &bias}; }

  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
  Activation activation = Activation::identity;

 private:
  Matrix<Scalar> input_;
  Matrix<Scalar> output_;
};

/// Stack of dense layers: relu hidden layers and an identity output layer.
template <typename Scalar>
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, Eigen::Index in, const std::vector<Eigen::Index>& hidden, Eigen::Index out) {
    Eigen::Index prev = in;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      layers_.emplace_back(name + ".fc" + std::to_string(i), prev, hidden[i], Activation::relu);
      prev = hidden[i];
    }
    layers_.emplace_back(name + ".out", prev, out, Activation::identity);
  }

  void init_fan_in(Rng& rng) {
    for (auto& l : layers_) l.init_fan_in(rng);
  }

  Matrix<Scalar> infer(const Matrix<Scalar>& x) const {
    Matrix<Scalar> h = x;
    for (const auto& l : layers_) h = l.infer(h);
    return h;
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    Matrix<Scalar> h = x;
    for (auto& l : layers_) h = l.forward(h);
    return h;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& grad_out) {
    Matrix<Scalar> g = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
    return g;
  }

  ParameterList<Scalar> parameters() {
    ParameterList<Scalar> out;
    for (auto& l : layers_)
      for (auto* p : l.parameters()) out.push_back(p);
    return out;
  }

  Eigen::Index in_dim() const { return layers_.front().in_dim(); }
  Eigen::Index out_dim() const { return layers_.back().out_dim(); }
  std::vector<Dense<Scalar>>& layers() { return layers_; }
  const std::vector<Dense<Scalar>>& layers() const { return layers_; }

 private:
  std::vector<Dense<Scalar>> layers_;
};

}  // namespace aoiq::nn
