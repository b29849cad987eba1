// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vigan/tensor.hpp"

namespace vigan {

using NodeId = std::int64_t;

enum class OpKind : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  AddBias,
  MatMul,
  Conv2d,
  Deconv2d,
  Relu,
  LeakyRelu,
  Tanh,
  Sigmoid,
  Exp,
  Log,
  Square,
  Clamp,
  Sum,
  Mean,
  Concat,
  Reshape,
  BatchNorm,
};

std::string_view op_name(OpKind kind);
std::optional<OpKind> op_from_name(std::string_view name);
std::span<const OpKind> differentiable_ops();

/// Describes one recorded operation: its kind plus the attributes its shape
/// rule and backward rule depend on.
struct OpDesc {
  OpKind kind = OpKind::Leaf;
  double alpha = 0.0;  // leaky slope, scale factor or additive scalar
  double lo = 0.0;     // clamp bounds
  double hi = 0.0;
  std::int64_t stride = 1;
  std::int64_t pad = 0;
  std::int64_t axis = 0;      // concat
  Shape target;               // reshape
  bool batch_stats = true;    // batchnorm normalizes by batch statistics
  double eps = 1e-5;          // batchnorm

  static OpDesc of(OpKind k) {
    OpDesc d;
    d.kind = k;
    return d;
  }
};

/// Output shape of `op` applied to inputs of the given shapes; throws
/// ShapeError naming the offending shapes.
Shape infer_shape(const OpDesc& op, std::span<const Shape> inputs);

template <class T>
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<std::optional<Tensor<T>>> grads, std::vector<Shape> shapes)
      : grads_(std::move(grads)), shapes_(std::move(shapes)) {}

  /// dLoss/dNode; zeros of the node's shape when the node is not reachable.
  Tensor<T> of(NodeId id) const;
  bool reached(NodeId id) const;

 private:
  std::vector<std::optional<Tensor<T>>> grads_;
  std::vector<Shape> shapes_;
};

/// Append-only record of a computation. Node inputs always refer to earlier
/// nodes, so reverse recording order is a valid topological order.
template <class T>
class Tape {
 public:
  struct Node {
    OpDesc op;
    std::vector<NodeId> inputs;
    Tensor<T> value;
    std::vector<T> aux;  // saved statistics needed by the backward rule
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  NodeId leaf(Tensor<T> value);
  NodeId record(OpDesc op, std::vector<NodeId> inputs, Tensor<T> output, std::vector<T> aux = {});

  const Tensor<T>& value(NodeId id) const { return node(id).value; }
  const Node& node(NodeId id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar node. Fan-out gradients accumulate.
  Gradients<T> backward(NodeId loss) const;
  /// Vector-Jacobian product: sweep from any node with upstream gradient
  /// `seed` of that node's shape.
  Gradients<T> backward(NodeId output, Tensor<T> seed) const;

  /// Test hook: scales the backward rule of one op kind by 1.5 so gradient
  /// checks can be shown to catch a broken rule.
  void inject_fault(std::optional<OpKind> kind) { fault_ = kind; }

 private:
  void apply_backward(const Node& node, const Tensor<T>& grad, std::vector<std::optional<Tensor<T>>>& grads) const;

  std::vector<Node> nodes_;
  std::optional<OpKind> fault_;
};

extern template class Gradients<float>;
extern template class Gradients<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace vigan
