#pragma once

// Fully connected networks with exact backpropagation. Columns of an input
// matrix are samples.

#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "triage/random.hpp"

namespace triage::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { Identity, Tanh, Relu, Sigmoid };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

struct Layer {
  Matrix weight;  // fan_out x fan_in
  Vector bias;    // fan_out
  Activation act = Activation::Identity;

  Eigen::Index fan_in() const { return weight.cols(); }
  Eigen::Index fan_out() const { return weight.rows(); }

  bool operator==(const Layer& o) const {
    return act == o.act && weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() &&
           weight == o.weight && bias == o.bias;
  }
};

struct ForwardCache {
  std::vector<Matrix> inputs;   // input fed to layer i
  std::vector<Matrix> outputs;  // activated output of layer i
};

/// Gradients with the same layout as the network parameters.
struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
  Matrix input;  // d(loss)/d(input), one column per sample
};

namespace detail {

inline void activate(Matrix& z, Activation a) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Tanh: z = z.array().tanh(); break;
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Sigmoid: z = (1.0 + (-z.array()).exp()).inverse(); break;
  }
}

// Derivative expressed through the activated output y.
inline Matrix activation_grad(const Matrix& y, Activation a) {
  switch (a) {
    case Activation::Identity: return Matrix::Ones(y.rows(), y.cols());
    case Activation::Tanh: return (1.0 - y.array().square()).matrix();
    case Activation::Relu: return (y.array() > 0.0).cast<double>().matrix();
    case Activation::Sigmoid: return (y.array() * (1.0 - y.array())).matrix();
  }
  return {};
}

}  // namespace detail

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) { check_shapes(); }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  Eigen::Index input_dim() const { return layers_.front().fan_in(); }
  Eigen::Index output_dim() const { return layers_.back().fan_out(); }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  Matrix forward(const Matrix& x) const {
    check_input(x);
    Matrix h = x;
    for (const auto& l : layers_) {
      Matrix z = (l.weight * h).colwise() + l.bias;
      detail::activate(z, l.act);
      h = std::move(z);
    }
    return h;
  }

  Vector forward(const Vector& x) const { return forward(Matrix(x)).col(0); }

  Matrix forward(const Matrix& x, ForwardCache& cache) const {
    check_input(x);
    cache.inputs.clear();
    cache.outputs.clear();
    Matrix h = x;
    for (const auto& l : layers_) {
      cache.inputs.push_back(h);
      Matrix z = (l.weight * h).colwise() + l.bias;
      detail::activate(z, l.act);
      cache.outputs.push_back(z);
      h = std::move(z);
    }
    return h;
  }

  /// Backpropagates dy = d(loss)/d(output) through a cached forward pass.
  /// Parameter gradients are summed over the batch columns.
  Gradients backward(const ForwardCache& cache, const Matrix& dy) const {
    if (cache.outputs.size() != layers_.size())
      throw std::invalid_argument("backward: cache does not match network");
    if (dy.rows() != output_dim() || dy.cols() != cache.outputs.back().cols())
      throw std::invalid_argument("backward: upstream gradient has wrong shape");
    Gradients g;
    g.weight.resize(layers_.size());
    g.bias.resize(layers_.size());
    Matrix delta = dy;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const Layer& l = layers_[i];
      delta.array() *= detail::activation_grad(cache.outputs[i], l.act).array();
      g.weight[i] = delta * cache.inputs[i].transpose();
      g.bias[i] = delta.rowwise().sum();
      delta = l.weight.transpose() * delta;
    }
    g.input = std::move(delta);
    return g;
  }

  /// Parameter blocks in a fixed order: W0, b0, W1, b1, ...
  std::vector<std::span<double>> param_blocks() {
    std::vector<std::span<double>> out;
    for (auto& l : layers_) {
      out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
      out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    return out;
  }

  bool operator==(const Mlp&) const = default;

 private:
  void check_shapes() const {
    if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].bias.size() != layers_[i].fan_out())
        throw std::invalid_argument("bias size does not match layer width");
      if (i > 0 && layers_[i].fan_in() != layers_[i - 1].fan_out())
        throw std::invalid_argument("layer shapes do not chain");
    }
  }

  void check_input(const Matrix& x) const {
    if (x.rows() != input_dim())
      throw std::invalid_argument("input dimension " + std::to_string(x.rows()) +
                                  " does not match network input " +
                                  std::to_string(input_dim()));
  }

  std::vector<Layer> layers_;
};

inline std::vector<std::span<const double>> grad_blocks(const Gradients& g) {
  std::vector<std::span<const double>> out;
  for (std::size_t i = 0; i < g.weight.size(); ++i) {
    out.emplace_back(g.weight[i].data(), static_cast<std::size_t>(g.weight[i].size()));
    out.emplace_back(g.bias[i].data(), static_cast<std::size_t>(g.bias[i].size()));
  }
  return out;
}

inline Layer xavier_uniform_layer(Eigen::Index fan_in, Eigen::Index fan_out, Activation act,
                                  Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Layer l{Matrix(fan_out, fan_in), Vector::Zero(fan_out), act};
  for (Eigen::Index j = 0; j < fan_in; ++j)
    for (Eigen::Index i = 0; i < fan_out; ++i) l.weight(i, j) = dist(rng);
  return l;
}

inline Layer he_normal_layer(Eigen::Index fan_in, Eigen::Index fan_out, Activation act, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Layer l{Matrix(fan_out, fan_in), Vector::Zero(fan_out), act};
  for (Eigen::Index j = 0; j < fan_in; ++j)
    for (Eigen::Index i = 0; i < fan_out; ++i) l.weight(i, j) = dist(rng);
  return l;
}

/// Actor: tanh hidden layer, sigmoid output, Xavier-uniform weights.
inline Mlp init_policy_net(Eigen::Index in_dim, Eigen::Index hidden, Eigen::Index out_dim,
                           Rng& rng) {
  if (in_dim < 1 || hidden < 1 || out_dim < 1)
    throw std::invalid_argument("network dimensions must be >= 1");
  std::vector<Layer> layers;
  layers.push_back(xavier_uniform_layer(in_dim, hidden, Activation::Tanh, rng));
  layers.push_back(xavier_uniform_layer(hidden, out_dim, Activation::Sigmoid, rng));
  return Mlp(std::move(layers));
}

/// Critic: relu hidden layer, scalar output, He-normal weights. The output
/// is linear unless `relu_output` is set.
inline Mlp init_value_net(Eigen::Index in_dim, Eigen::Index hidden, Rng& rng,
                          bool relu_output = false) {
  if (in_dim < 1 || hidden < 1) throw std::invalid_argument("network dimensions must be >= 1");
  std::vector<Layer> layers;
  layers.push_back(he_normal_layer(in_dim, hidden, Activation::Relu, rng));
  layers.push_back(
      he_normal_layer(hidden, 1, relu_output ? Activation::Relu : Activation::Identity, rng));
  return Mlp(std::move(layers));
}

}  // namespace triage::nn
