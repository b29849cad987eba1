// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "vigan/tape.hpp"

namespace vigan {

/// Handle to a node on a tape.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, NodeId id) : tape_(tape), id_(id) {}

  NodeId id() const noexcept { return id_; }
  Tape<T>& tape() const { return *tape_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  NodeId id_ = -1;
};

enum class ActivationKind { None, Relu, LeakyRelu, Tanh, Sigmoid };

struct Activation {
  ActivationKind kind = ActivationKind::None;
  double alpha = 0.2;  // leaky slope
};

enum class ElementwiseKind { Add, Sub, Mul };
enum class ReduceKind { Sum, Mean };

template <class T>
Var<T> constant(Tape<T>& tape, Tensor<T> value);

/// Leaf carrying a copy of x's value: gradients do not flow back through it.
template <class T>
Var<T> detach(const Var<T>& x);

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> elementwise(const Var<T>& a, const Var<T>& b, ElementwiseKind kind);

template <class T>
Var<T> scale(const Var<T>& x, double factor);
template <class T>
Var<T> add_scalar(const Var<T>& x, double value);
/// Adds b[F] along axis 1 of x[B,F,...].
template <class T>
Var<T> add_bias(const Var<T>& x, const Var<T>& b);

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::int64_t stride, std::int64_t pad);
template <class T>
Var<T> deconv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::int64_t stride, std::int64_t pad);

template <class T>
Var<T> relu(const Var<T>& x);
template <class T>
Var<T> leaky_relu(const Var<T>& x, double alpha = 0.2);
template <class T>
Var<T> tanh(const Var<T>& x);
template <class T>
Var<T> sigmoid(const Var<T>& x);
template <class T>
Var<T> activation(const Var<T>& x, Activation act);

template <class T>
Var<T> exp(const Var<T>& x);
template <class T>
Var<T> log(const Var<T>& x);
template <class T>
Var<T> square(const Var<T>& x);
/// Gradient passes through inside [lo, hi] and is zero outside.
template <class T>
Var<T> clamp(const Var<T>& x, double lo, double hi);

template <class T>
Var<T> sum(const Var<T>& x);
template <class T>
Var<T> mean(const Var<T>& x);
template <class T>
Var<T> reduce(const Var<T>& x, ReduceKind kind);

template <class T>
Var<T> concat(const Var<T>& a, const Var<T>& b, std::int64_t axis);
template <class T>
Var<T> reshape(const Var<T>& x, Shape shape);
/// [B, ...] -> [B, prod(...)]
template <class T>
Var<T> flatten(const Var<T>& x);

template <class T>
struct BatchNormResult {
  Var<T> y;
  std::vector<T> batch_mean;
  std::vector<T> batch_var;  // biased
};

/// Per-channel normalization by batch statistics (axis 1 is the channel).
template <class T>
BatchNormResult<T> batchnorm_train(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps);

template <class T>
Var<T> batchnorm_eval(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Tensor<T>& running_mean,
                      const Tensor<T>& running_var, double eps);

}  // namespace vigan
