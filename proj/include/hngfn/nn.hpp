// Copyright 2026 The hngfn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HNGFN_NN_HPP_
#define HNGFN_NN_HPP_

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hngfn/error.hpp"
#include "hngfn/random.hpp"

namespace hngfn::nn {

// Dense storage. Batched operations lay samples out as columns.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using ConstVecRef = Eigen::Ref<const Vector>;
using VecRef = Eigen::Ref<Vector>;

inline constexpr double kLeakySlope = 0.01;

enum class Activation { kLeakyRelu, kIdentity };

/// Shape of a fully connected stack. Parameters live in one flat vector:
/// for every layer the weight block (out x in, column-major) followed by
/// the bias block. Hidden layers use LeakyReLU(0.01); the last layer uses
/// `output_activation`.
class MlpLayout {
 public:
  MlpLayout() = default;
  explicit MlpLayout(std::vector<Index> sizes,
                     Activation output_activation = Activation::kIdentity)
      : sizes_(std::move(sizes)), output_activation_(output_activation) {
    if (sizes_.size() < 2) {
      throw DimensionError("MlpLayout needs at least input and output sizes");
    }
    Index offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) {
        throw DimensionError("MlpLayout layer sizes must be positive");
      }
      weight_offsets_.push_back(offset);
      offset += sizes_[l] * sizes_[l + 1];
      bias_offsets_.push_back(offset);
      offset += sizes_[l + 1];
    }
    param_count_ = offset;
  }

  const std::vector<Index>& sizes() const { return sizes_; }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  Index input_size() const { return sizes_.front(); }
  Index output_size() const { return sizes_.back(); }
  Index param_count() const { return param_count_; }
  Index fan_in(std::size_t l) const { return sizes_[l]; }
  Index fan_out(std::size_t l) const { return sizes_[l + 1]; }
  Index weight_offset(std::size_t l) const { return weight_offsets_[l]; }
  Index bias_offset(std::size_t l) const { return bias_offsets_[l]; }
  Activation activation(std::size_t l) const {
    return l + 1 == num_layers() ? output_activation_ : Activation::kLeakyRelu;
  }
  Activation output_activation() const { return output_activation_; }

  bool operator==(const MlpLayout& other) const {
    return sizes_ == other.sizes_ &&
           output_activation_ == other.output_activation_;
  }

 private:
  std::vector<Index> sizes_;
  Activation output_activation_ = Activation::kIdentity;
  std::vector<Index> weight_offsets_;
  std::vector<Index> bias_offsets_;
  Index param_count_ = 0;
};

/// Activations recorded by a forward pass, consumed by backward.
struct ForwardCache {
  std::vector<Matrix> inputs;   // what layer l saw
  std::vector<Matrix> preacts;  // W x + b of layer l
  std::vector<Matrix> masks;    // inverted-dropout mask on layer l output
  bool empty() const { return inputs.empty(); }
  void clear() {
    inputs.clear();
    preacts.clear();
    masks.clear();
  }
};

/// Inverted dropout on hidden-layer outputs; only used while training.
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;
};

namespace detail {

inline void activate(Matrix& z, Activation act) {
  if (act == Activation::kLeakyRelu) {
    z = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
  }
}

inline void activation_grad(const Matrix& pre, Matrix& grad, Activation act) {
  if (act == Activation::kLeakyRelu) {
    grad.array() *= pre.unaryExpr([](double v) {
                          return v > 0.0 ? 1.0 : kLeakySlope;
                        }).array();
  }
}

inline void check_params(const MlpLayout& layout, Index n) {
  if (n != layout.param_count()) {
    std::ostringstream msg;
    msg << "parameter vector has " << n << " entries, layout expects "
        << layout.param_count();
    throw DimensionError(msg.str());
  }
}

}  // namespace detail

inline Eigen::Map<const Matrix> weight(const MlpLayout& layout,
                                       const ConstVecRef& params,
                                       std::size_t l) {
  return {params.data() + layout.weight_offset(l), layout.fan_out(l),
          layout.fan_in(l)};
}

inline Eigen::Map<const Vector> bias(const MlpLayout& layout,
                                     const ConstVecRef& params, std::size_t l) {
  return {params.data() + layout.bias_offset(l), layout.fan_out(l)};
}

/// Batched forward pass; `x` has one sample per column.
inline Matrix forward(const MlpLayout& layout, const ConstVecRef& params,
                      const Matrix& x, ForwardCache* cache = nullptr,
                      const Dropout* dropout = nullptr) {
  detail::check_params(layout, params.size());
  if (x.rows() != layout.input_size()) {
    std::ostringstream msg;
    msg << "forward: input has " << x.rows() << " features, expected "
        << layout.input_size();
    throw DimensionError(msg.str());
  }
  if (cache != nullptr) cache->clear();
  Matrix h = x;
  for (std::size_t l = 0; l < layout.num_layers(); ++l) {
    Matrix z = weight(layout, params, l) * h;
    z.colwise() += bias(layout, params, l);
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(h));
      cache->preacts.push_back(z);
    }
    detail::activate(z, layout.activation(l));
    Matrix mask;
    const bool hidden = l + 1 < layout.num_layers();
    if (hidden && dropout != nullptr && dropout->rate > 0.0) {
      const double keep = 1.0 - dropout->rate;
      std::bernoulli_distribution bern(keep);
      mask.resize(z.rows(), z.cols());
      for (Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = bern(*dropout->rng) ? 1.0 / keep : 0.0;
      }
      z.array() *= mask.array();
    }
    if (cache != nullptr) cache->masks.push_back(std::move(mask));
    h = std::move(z);
  }
  return h;
}

/// Backpropagates `upstream` (dL/doutput, one column per sample) through the
/// pass recorded in `cache`. Parameter gradients are accumulated into `grad`;
/// the gradient with respect to the input is returned.
inline Matrix backward(const MlpLayout& layout, const ConstVecRef& params,
                       const ForwardCache& cache, const Matrix& upstream,
                       VecRef grad) {
  if (cache.empty()) {
    throw StateError("backward called without cached forward activations");
  }
  detail::check_params(layout, params.size());
  detail::check_params(layout, grad.size());
  if (upstream.rows() != layout.output_size() ||
      upstream.cols() != cache.inputs.front().cols()) {
    throw DimensionError("backward: upstream gradient shape mismatch");
  }
  Matrix g = upstream;
  for (std::size_t li = layout.num_layers(); li-- > 0;) {
    if (cache.masks[li].size() != 0) g.array() *= cache.masks[li].array();
    detail::activation_grad(cache.preacts[li], g, layout.activation(li));
    Eigen::Map<Matrix> dw(grad.data() + layout.weight_offset(li),
                          layout.fan_out(li), layout.fan_in(li));
    Eigen::Map<Vector> db(grad.data() + layout.bias_offset(li),
                          layout.fan_out(li));
    dw.noalias() += g * cache.inputs[li].transpose();
    db += g.rowwise().sum();
    g = weight(layout, params, li).transpose() * g;
  }
  return g;
}

/// He-uniform weights (bound sqrt(6 / fan_in), times `scale`), zero biases.
inline Vector he_uniform(const MlpLayout& layout, Rng& rng,
                         double scale = 1.0) {
  Vector p = Vector::Zero(layout.param_count());
  for (std::size_t l = 0; l < layout.num_layers(); ++l) {
    const double bound =
        scale * std::sqrt(6.0 / static_cast<double>(layout.fan_in(l)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const Index n = layout.fan_in(l) * layout.fan_out(l);
    for (Index i = 0; i < n; ++i) p[layout.weight_offset(l) + i] = dist(rng);
  }
  return p;
}

struct Gradients {
  Vector params;
  Matrix input;
};

/// A layout together with the parameters it owns.
class FeedForwardNet {
 public:
  FeedForwardNet() = default;
  explicit FeedForwardNet(MlpLayout layout)
      : layout_(std::move(layout)),
        params_(Vector::Zero(layout_.param_count())) {}
  FeedForwardNet(MlpLayout layout, Vector params)
      : layout_(std::move(layout)), params_(std::move(params)) {
    detail::check_params(layout_, params_.size());
  }

  static FeedForwardNet he_uniform(MlpLayout layout, Rng& rng,
                                   double scale = 1.0) {
    Vector p = nn::he_uniform(layout, rng, scale);
    return {std::move(layout), std::move(p)};
  }

  const MlpLayout& layout() const { return layout_; }
  const Vector& params() const { return params_; }
  Vector& params() { return params_; }
  Index param_count() const { return layout_.param_count(); }

  Vector forward(const Vector& x) const {
    Matrix out = nn::forward(layout_, params_, Matrix(x));
    return out.col(0);
  }

  Matrix forward(const Matrix& x, ForwardCache* cache = nullptr,
                 const Dropout* dropout = nullptr) const {
    return nn::forward(layout_, params_, x, cache, dropout);
  }

  Gradients backward(const ForwardCache& cache, const Matrix& upstream) const {
    Gradients g;
    g.params = Vector::Zero(layout_.param_count());
    g.input = nn::backward(layout_, params_, cache, upstream, g.params);
    return g;
  }

 private:
  MlpLayout layout_;
  Vector params_;
};

/// Adam with bias correction. `weight_decay` adds an L2 term to the gradient
/// before the moment updates.
struct AdamState {
  AdamState() = default;
  AdamState(Index n, double lr, double decay = 0.0)
      : learning_rate(lr),
        weight_decay(decay),
        first_moment(Vector::Zero(n)),
        second_moment(Vector::Zero(n)) {}

  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  std::int64_t step_count = 0;
  Vector first_moment;
  Vector second_moment;
};

inline void adam_step(AdamState& state, VecRef params, const ConstVecRef& grads) {
  if (params.size() != grads.size() ||
      params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: parameter, gradient and moment sizes differ");
  }
  if (!grads.allFinite()) {
    Index i = 0;
    while (std::isfinite(grads[i])) ++i;
    throw NumericError("adam_step: non-finite gradient at parameter index " +
                       std::to_string(i));
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double lr = state.learning_rate;
  const double eps = state.epsilon;
  const double wd = state.weight_decay;
  auto m = state.first_moment.array();
  auto v = state.second_moment.array();
  if (wd != 0.0) {
    const Vector g = grads + wd * params;
    m = b1 * m + (1.0 - b1) * g.array();
    v = b2 * v + (1.0 - b2) * g.array().square();
  } else {
    m = b1 * m + (1.0 - b1) * grads.array();
    v = b2 * v + (1.0 - b2) * grads.array().square();
  }
  params.array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
}

/// Rescales `grad` in place so that its L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
inline double clip_grad_norm(VecRef grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm && norm > 0.0) grad *= max_norm / norm;
  return norm;
}

}  // namespace hngfn::nn

#endif  // HNGFN_NN_HPP_
