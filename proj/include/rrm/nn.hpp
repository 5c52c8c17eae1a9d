#pragma once

// Small dense-network engine: batched forward pass, exact backprop, Adam,
// Polyak blending, stable softmax/logsumexp and text serialization.
//
// Batches are column-major: one sample per column, shape (features x B).

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rrm/error.hpp"
#include "rrm/random.hpp"

namespace rrm::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class DenseNet {
 public:
  DenseNet() = default;

  // Zero-initialized network with the given layer widths.
  explicit DenseNet(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
    if (dims_.size() < 2) throw DimensionMismatch("DenseNet needs at least input and output dims");
    for (int d : dims_) {
      if (d < 1) throw DimensionMismatch("DenseNet layer widths must be >= 1");
    }
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      weights_.push_back(Matrix::Zero(dims_[l + 1], dims_[l]));
      biases_.push_back(Vector::Zero(dims_[l + 1]));
    }
  }

  // Glorot-uniform weights, zero biases.
  static DenseNet glorot(std::vector<int> layer_dims, Rng& rng) {
    DenseNet net(std::move(layer_dims));
    for (auto& w : net.weights_) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
      }
    }
    return net;
  }

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return weights_.size(); }

  Matrix& weight(std::size_t l) { return weights_[l]; }
  const Matrix& weight(std::size_t l) const { return weights_[l]; }
  Vector& bias(std::size_t l) { return biases_[l]; }
  const Vector& bias(std::size_t l) const { return biases_[l]; }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  // Visits every scalar parameter in a fixed order: per layer, weights
  // column-major then biases.
  template <typename Fn>
  void for_each_param(Fn&& fn) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (Eigen::Index k = 0; k < weights_[l].size(); ++k) fn(weights_[l].data()[k]);
      for (Eigen::Index k = 0; k < biases_[l].size(); ++k) fn(biases_[l].data()[k]);
    }
  }
  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      for (Eigen::Index k = 0; k < weights_[l].size(); ++k) fn(weights_[l].data()[k]);
      for (Eigen::Index k = 0; k < biases_[l].size(); ++k) fn(biases_[l].data()[k]);
    }
  }

  bool all_finite() const {
    bool ok = true;
    for_each_param([&](double v) { ok = ok && std::isfinite(v); });
    return ok;
  }

  friend bool operator==(const DenseNet& a, const DenseNet& b) {
    if (a.dims_ != b.dims_) return false;
    for (std::size_t l = 0; l < a.weights_.size(); ++l) {
      if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
    }
    return true;
  }

 private:
  std::vector<int> dims_;
  std::vector<Matrix> weights_;  // layer l: dims[l+1] x dims[l]
  std::vector<Vector> biases_;
};

// Same layout as DenseNet parameters.
struct Gradients {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_biases;

  static Gradients zeros_like(const DenseNet& net) {
    Gradients g;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      g.d_weights.push_back(Matrix::Zero(net.weight(l).rows(), net.weight(l).cols()));
      g.d_biases.push_back(Vector::Zero(net.bias(l).size()));
    }
    return g;
  }

  Gradients& operator+=(const Gradients& o) {
    for (std::size_t l = 0; l < d_weights.size(); ++l) {
      d_weights[l] += o.d_weights[l];
      d_biases[l] += o.d_biases[l];
    }
    return *this;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < d_weights.size(); ++l) {
      if (!d_weights[l].allFinite() || !d_biases[l].allFinite()) return false;
    }
    return true;
  }
};

// Post-activation values of every layer, input first.
struct ForwardCache {
  std::vector<Matrix> activations;
  const Matrix& output() const { return activations.back(); }
};

inline void check_input(const DenseNet& net, Eigen::Index rows) {
  if (rows != net.input_dim()) {
    throw DimensionMismatch("network expects input of size " + std::to_string(net.input_dim()) +
                            ", got " + std::to_string(rows));
  }
}

// ReLU on hidden layers, identity on the output layer.
inline ForwardCache forward_batch(const DenseNet& net, const Matrix& input) {
  check_input(net, input.rows());
  ForwardCache cache;
  cache.activations.reserve(net.num_layers() + 1);
  cache.activations.push_back(input);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix z = net.weight(l) * cache.activations.back();
    z.colwise() += net.bias(l);
    if (l + 1 < net.num_layers()) z = z.cwiseMax(0.0);
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

inline Matrix predict(const DenseNet& net, const Matrix& input) {
  return forward_batch(net, input).output();
}

inline Vector forward(const DenseNet& net, const Vector& input) {
  check_input(net, input.size());
  Vector a = input;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Vector z = net.weight(l) * a + net.bias(l);
    a = (l + 1 < net.num_layers()) ? Vector(z.cwiseMax(0.0)) : z;
  }
  return a;
}

struct BackwardResult {
  Gradients grads;
  Matrix input_grad;
};

// Reverse-mode pass for a scalar loss whose gradient w.r.t. the network
// output is `output_grad` (same shape as the output batch). Gradients are
// summed over the batch columns.
inline BackwardResult backward(const DenseNet& net, const ForwardCache& cache,
                               const Matrix& output_grad) {
  if (output_grad.rows() != net.output_dim() ||
      output_grad.cols() != cache.output().cols()) {
    throw DimensionMismatch("output gradient shape does not match forward output");
  }
  BackwardResult out;
  const std::size_t layers = net.num_layers();
  out.grads.d_weights.resize(layers);
  out.grads.d_biases.resize(layers);
  Matrix delta = output_grad;
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& a_prev = cache.activations[l];
    out.grads.d_weights[l].noalias() = delta * a_prev.transpose();
    out.grads.d_biases[l] = delta.rowwise().sum();
    Matrix upstream = net.weight(l).transpose() * delta;
    if (l > 0) {
      // ReLU derivative, read off the cached post-activation.
      delta = (a_prev.array() > 0.0).select(upstream, 0.0);
    } else {
      out.input_grad = std::move(upstream);
    }
  }
  return out;
}

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long step = 0;
  Gradients m;
  Gradients v;

  static AdamState for_net(const DenseNet& net, double lr) {
    AdamState s;
    s.learning_rate = lr;
    s.m = Gradients::zeros_like(net);
    s.v = Gradients::zeros_like(net);
    return s;
  }
};

// Bias-corrected Adam update. Non-finite gradients abort the step and leave
// both the network and the optimizer state untouched.
inline void adam_step(DenseNet& net, const Gradients& grads, AdamState& state) {
  if (!grads.all_finite()) throw NumericalError("non-finite gradient in Adam step");
  if (state.m.d_weights.size() != net.num_layers()) {
    state.m = Gradients::zeros_like(net);
    state.v = Gradients::zeros_like(net);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= state.learning_rate * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + state.eps);
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    update(net.weight(l), grads.d_weights[l], state.m.d_weights[l], state.v.d_weights[l]);
    update(net.bias(l), grads.d_biases[l], state.m.d_biases[l], state.v.d_biases[l]);
  }
}

// target <- tau * source + (1 - tau) * target.
inline void polyak_update(DenseNet& target, const DenseNet& source, double tau) {
  if (target.dims() != source.dims()) throw DimensionMismatch("polyak: network shapes differ");
  if (tau == 1.0) {
    target = source;
    return;
  }
  for (std::size_t l = 0; l < target.num_layers(); ++l) {
    target.weight(l) = tau * source.weight(l) + (1.0 - tau) * target.weight(l);
    target.bias(l) = tau * source.bias(l) + (1.0 - tau) * target.bias(l);
  }
}

template <typename Derived>
double logsumexp(const Eigen::MatrixBase<Derived>& values) {
  if (values.size() == 0) throw std::invalid_argument("logsumexp of an empty vector");
  const double m = values.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((values.array() - m).exp().sum());
}

inline double logsumexp(const std::vector<double>& values) {
  return logsumexp(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

template <typename Derived>
Vector softmax(const Eigen::MatrixBase<Derived>& values) {
  if (values.size() == 0) throw std::invalid_argument("softmax of an empty vector");
  const double m = values.maxCoeff();
  Vector e = (values.array() - m).exp();
  return e / e.sum();
}

inline std::vector<double> softmax(const std::vector<double>& values) {
  const Vector p =
      softmax(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
  return {p.data(), p.data() + p.size()};
}

// Column-wise softmax of a (classes x B) logit matrix.
inline Matrix softmax_columns(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) p.col(c) = softmax(logits.col(c));
  return p;
}

// Column-wise logsumexp of a (classes x B) matrix.
inline Vector logsumexp_columns(const Matrix& values) {
  Vector out(values.cols());
  for (Eigen::Index c = 0; c < values.cols(); ++c) out(c) = logsumexp(values.col(c));
  return out;
}

inline nlohmann::json to_json(const DenseNet& net) {
  std::vector<double> params;
  params.reserve(net.num_params());
  net.for_each_param([&](double v) { params.push_back(v); });
  return {{"layer_dims", net.dims()},
          {"activation", "relu"},
          {"output_activation", "identity"},
          {"params", params}};
}

inline DenseNet from_json(const nlohmann::json& j) {
  if (j.value("activation", "") != "relu") throw IoError("unsupported activation in model file");
  DenseNet net(j.at("layer_dims").get<std::vector<int>>());
  const auto& params = j.at("params");
  if (params.size() != net.num_params()) throw IoError("model parameter count mismatch");
  std::size_t k = 0;
  net.for_each_param([&](double& v) { v = params[k++].get<double>(); });
  return net;
}

}  // namespace rrm::nn
