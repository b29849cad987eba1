// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/tape.hpp"

#include <array>
#include <cmath>
#include <string>

#include "vigan/kernels.hpp"

namespace vigan {

namespace {

constexpr std::array<std::pair<OpKind, std::string_view>, 23> kOpNames{{
    {OpKind::Leaf, "leaf"},
    {OpKind::Add, "add"},
    {OpKind::Sub, "sub"},
    {OpKind::Mul, "mul"},
    {OpKind::Scale, "scale"},
    {OpKind::AddScalar, "add_scalar"},
    {OpKind::AddBias, "add_bias"},
    {OpKind::MatMul, "matmul"},
    {OpKind::Conv2d, "conv2d"},
    {OpKind::Deconv2d, "deconv2d"},
    {OpKind::Relu, "relu"},
    {OpKind::LeakyRelu, "leaky_relu"},
    {OpKind::Tanh, "tanh"},
    {OpKind::Sigmoid, "sigmoid"},
    {OpKind::Exp, "exp"},
    {OpKind::Log, "log"},
    {OpKind::Square, "square"},
    {OpKind::Clamp, "clamp"},
    {OpKind::Sum, "sum"},
    {OpKind::Mean, "mean"},
    {OpKind::Concat, "concat"},
    {OpKind::Reshape, "reshape"},
    {OpKind::BatchNorm, "batchnorm"},
}};

std::string describe(std::span<const Shape> shapes) {
  std::string s;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (i) s += " and ";
    s += to_string(shapes[i]);
  }
  return s;
}

[[noreturn]] void shape_fail(const OpDesc& op, std::span<const Shape> in, const std::string& why) {
  throw ShapeError(std::string(op_name(op.kind)) + ": " + why + " (input shapes " + describe(in) + ")");
}

void expect_arity(const OpDesc& op, std::span<const Shape> in, std::size_t n) {
  if (in.size() != n) {
    shape_fail(op, in, "expected " + std::to_string(n) + " inputs, got " + std::to_string(in.size()));
  }
}

kernels::ConvGeometry conv_geometry(const Shape& x, const Shape& w, std::int64_t stride, std::int64_t pad,
                                    std::int64_t out_h, std::int64_t out_w) {
  kernels::ConvGeometry g;
  g.batch = x[0];
  g.in_channels = x[1];
  g.in_h = x[2];
  g.in_w = x[3];
  g.out_channels = w[0];
  g.kh = w[2];
  g.kw = w[3];
  g.stride = stride;
  g.pad = pad;
  g.out_h = out_h;
  g.out_w = out_w;
  return g;
}

// Geometry for a transposed convolution viewed as the adjoint conv: the
// output y is the image side, the input x the grid side.
kernels::ConvGeometry deconv_geometry(const Shape& x, const Shape& w, const Shape& y, std::int64_t stride,
                                      std::int64_t pad) {
  kernels::ConvGeometry g;
  g.batch = x[0];
  g.out_channels = w[0];
  g.in_channels = w[1];
  g.kh = w[2];
  g.kw = w[3];
  g.out_h = x[2];
  g.out_w = x[3];
  g.in_h = y[2];
  g.in_w = y[3];
  g.stride = stride;
  g.pad = pad;
  return g;
}

template <class T>
void accumulate(std::optional<Tensor<T>>& slot, const Tensor<T>& g) {
  if (!slot) {
    slot = g;
    return;
  }
  auto dst = slot->data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <class T>
Tensor<T> map_grad(const Tensor<T>& g, const Tensor<T>& ref, auto&& fn) {
  Tensor<T> out(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = fn(g[i], ref[i]);
  return out;
}

}  // namespace

std::string_view op_name(OpKind kind) {
  for (const auto& [k, name] : kOpNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<OpKind> op_from_name(std::string_view name) {
  for (const auto& [k, n] : kOpNames)
    if (n == name) return k;
  return std::nullopt;
}

std::span<const OpKind> differentiable_ops() {
  static const std::vector<OpKind> ops = [] {
    std::vector<OpKind> v;
    for (const auto& [k, name] : kOpNames)
      if (k != OpKind::Leaf) v.push_back(k);
    return v;
  }();
  return ops;
}

Shape infer_shape(const OpDesc& op, std::span<const Shape> in) {
  switch (op.kind) {
    case OpKind::Leaf:
      shape_fail(op, in, "leaves are not recorded through shape rules");
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
      expect_arity(op, in, 2);
      if (in[0] != in[1]) shape_fail(op, in, "shape mismatch");
      return in[0];
    case OpKind::Scale:
    case OpKind::AddScalar:
    case OpKind::Relu:
    case OpKind::LeakyRelu:
    case OpKind::Tanh:
    case OpKind::Sigmoid:
    case OpKind::Exp:
    case OpKind::Log:
    case OpKind::Square:
    case OpKind::Clamp:
      expect_arity(op, in, 1);
      return in[0];
    case OpKind::AddBias:
      expect_arity(op, in, 2);
      if (in[0].size() < 2 || in[1].size() != 1 || in[0][1] != in[1][0])
        shape_fail(op, in, "bias must be 1-d and match axis 1");
      return in[0];
    case OpKind::MatMul:
      expect_arity(op, in, 2);
      if (in[0].size() != 2 || in[1].size() != 2) shape_fail(op, in, "operands must be 2-d");
      if (in[0][1] != in[1][0]) shape_fail(op, in, "inner dimensions differ");
      return {in[0][0], in[1][1]};
    case OpKind::Conv2d: {
      expect_arity(op, in, 3);
      const auto &x = in[0], &w = in[1], &b = in[2];
      if (x.size() != 4 || w.size() != 4 || b.size() != 1) shape_fail(op, in, "expected x[B,C,H,W], w[F,C,kh,kw], b[F]");
      if (w[1] != x[1] || b[0] != w[0]) shape_fail(op, in, "channel mismatch");
      if (op.stride < 1 || op.pad < 0) shape_fail(op, in, "stride must be >= 1 and pad >= 0");
      if (w[2] > x[2] + 2 * op.pad || w[3] > x[3] + 2 * op.pad) shape_fail(op, in, "kernel larger than padded input");
      return {x[0], w[0], (x[2] + 2 * op.pad - w[2]) / op.stride + 1, (x[3] + 2 * op.pad - w[3]) / op.stride + 1};
    }
    case OpKind::Deconv2d: {
      expect_arity(op, in, 3);
      const auto &x = in[0], &w = in[1], &b = in[2];
      if (x.size() != 4 || w.size() != 4 || b.size() != 1) shape_fail(op, in, "expected x[B,C,H,W], w[C,F,kh,kw], b[F]");
      if (w[0] != x[1] || b[0] != w[1]) shape_fail(op, in, "channel mismatch");
      if (op.stride < 1 || op.pad < 0) shape_fail(op, in, "stride must be >= 1 and pad >= 0");
      const std::int64_t h = (x[2] - 1) * op.stride - 2 * op.pad + w[2];
      const std::int64_t wd = (x[3] - 1) * op.stride - 2 * op.pad + w[3];
      if (h <= 0 || wd <= 0) shape_fail(op, in, "non-positive output extent");
      return {x[0], w[1], h, wd};
    }
    case OpKind::Sum:
    case OpKind::Mean:
      expect_arity(op, in, 1);
      return {};
    case OpKind::Concat: {
      expect_arity(op, in, 2);
      const auto &a = in[0], &b = in[1];
      if (a.size() != b.size() || op.axis < 0 || op.axis >= static_cast<std::int64_t>(a.size()))
        shape_fail(op, in, "rank mismatch or bad axis " + std::to_string(op.axis));
      Shape out = a;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (static_cast<std::int64_t>(i) == op.axis) continue;
        if (a[i] != b[i]) shape_fail(op, in, "extents differ off the concat axis");
      }
      out[op.axis] += b[op.axis];
      return out;
    }
    case OpKind::Reshape:
      expect_arity(op, in, 1);
      if (numel(op.target) != numel(in[0])) shape_fail(op, in, "cannot reshape to " + to_string(op.target));
      return op.target;
    case OpKind::BatchNorm:
      expect_arity(op, in, 3);
      if ((in[0].size() != 2 && in[0].size() != 4) || in[1] != Shape{in[0][1]} || in[2] != Shape{in[0][1]})
        shape_fail(op, in, "expected x[B,C] or x[B,C,H,W] with gamma[C], beta[C]");
      return in[0];
  }
  shape_fail(op, in, "unknown op");
}

template <class T>
Tensor<T> Gradients<T>::of(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= shapes_.size()) throw std::out_of_range("gradient of unknown node");
  if (static_cast<std::size_t>(id) < grads_.size() && grads_[id]) return *grads_[id];
  return Tensor<T>::zeros(shapes_[id]);
}

template <class T>
bool Gradients<T>::reached(NodeId id) const {
  return id >= 0 && static_cast<std::size_t>(id) < grads_.size() && grads_[id].has_value();
}

template <class T>
NodeId Tape<T>::leaf(Tensor<T> value) {
  nodes_.push_back(Node{OpDesc::of(OpKind::Leaf), {}, std::move(value), {}});
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <class T>
NodeId Tape<T>::record(OpDesc op, std::vector<NodeId> inputs, Tensor<T> output, std::vector<T> aux) {
  std::vector<Shape> shapes;
  shapes.reserve(inputs.size());
  for (NodeId id : inputs) {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
      throw std::out_of_range("record: input node " + std::to_string(id) + " does not exist");
    shapes.push_back(nodes_[id].value.shape());
  }
  const Shape expected = infer_shape(op, shapes);
  if (expected != output.shape()) {
    throw ShapeError(std::string(op_name(op.kind)) + ": output shape " + to_string(output.shape()) +
                     " differs from shape rule " + to_string(expected));
  }
  nodes_.push_back(Node{std::move(op), std::move(inputs), std::move(output), std::move(aux)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

template <class T>
const typename Tape<T>::Node& Tape<T>::node(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw std::out_of_range("unknown node id " + std::to_string(id));
  return nodes_[id];
}

template <class T>
Gradients<T> Tape<T>::backward(NodeId loss) const {
  const Node& root = node(loss);
  if (root.value.size() != 1) throw ShapeError("backward: loss node is not scalar, shape " + to_string(root.value.shape()));
  return backward(loss, Tensor<T>(root.value.shape(), T(1)));
}

template <class T>
Gradients<T> Tape<T>::backward(NodeId output, Tensor<T> seed) const {
  const NodeId loss = output;
  if (seed.shape() != node(output).value.shape())
    throw ShapeError("backward: seed shape " + to_string(seed.shape()) + " differs from node shape " +
                     to_string(node(output).value.shape()));
  std::vector<std::optional<Tensor<T>>> grads(static_cast<std::size_t>(loss) + 1);
  grads[loss] = std::move(seed);
  for (NodeId id = loss; id >= 0; --id) {
    if (!grads[id]) continue;
    const Node& n = nodes_[id];
    if (n.op.kind == OpKind::Leaf) continue;
    apply_backward(n, *grads[id], grads);
  }
  std::vector<Shape> shapes;
  shapes.reserve(nodes_.size());
  for (const auto& n : nodes_) shapes.push_back(n.value.shape());
  return Gradients<T>(std::move(grads), std::move(shapes));
}

template <class T>
void Tape<T>::apply_backward(const Node& n, const Tensor<T>& g, std::vector<std::optional<Tensor<T>>>& grads) const {
  const T fault = (fault_ && *fault_ == n.op.kind) ? T(1.5) : T(1);
  auto push = [&](std::size_t slot, Tensor<T> grad) {
    if (fault != T(1))
      for (auto& v : grad.data()) v *= fault;
    accumulate(grads[n.inputs[slot]], grad);
  };
  auto in = [&](std::size_t slot) -> const Tensor<T>& { return nodes_[n.inputs[slot]].value; };
  const Tensor<T>& y = n.value;

  switch (n.op.kind) {
    case OpKind::Leaf:
      return;
    case OpKind::Add:
      push(0, g);
      push(1, g);
      return;
    case OpKind::Sub:
      push(0, g);
      push(1, map_grad(g, g, [](T gi, T) { return -gi; }));
      return;
    case OpKind::Mul:
      push(0, map_grad(g, in(1), [](T gi, T b) { return gi * b; }));
      push(1, map_grad(g, in(0), [](T gi, T a) { return gi * a; }));
      return;
    case OpKind::Scale: {
      const T s = static_cast<T>(n.op.alpha);
      push(0, map_grad(g, g, [s](T gi, T) { return gi * s; }));
      return;
    }
    case OpKind::AddScalar:
    case OpKind::Reshape:
      push(0, Tensor<T>(in(0).shape(), g.vec()));
      return;
    case OpKind::AddBias: {
      const auto& xs = in(0).shape();
      const std::int64_t channels = xs[1];
      const std::int64_t plane = numel(xs) / (xs[0] * channels);
      Tensor<T> gb({channels});
      for (std::int64_t b = 0; b < xs[0]; ++b)
        for (std::int64_t c = 0; c < channels; ++c)
          for (std::int64_t p = 0; p < plane; ++p) gb[c] += g[(b * channels + c) * plane + p];
      push(0, g);
      push(1, std::move(gb));
      return;
    }
    case OpKind::MatMul: {
      const auto& a = in(0);
      const auto& b = in(1);
      const std::int64_t m = a.dim(0), k = a.dim(1), cols = b.dim(1);
      Tensor<T> ga(a.shape()), gb(b.shape());
      kernels::gemm<T>(false, true, m, k, cols, T(1), g.data().data(), b.data().data(), T(0), ga.data().data());
      kernels::gemm<T>(true, false, k, cols, m, T(1), a.data().data(), g.data().data(), T(0), gb.data().data());
      push(0, std::move(ga));
      push(1, std::move(gb));
      return;
    }
    case OpKind::Conv2d: {
      const auto& x = in(0);
      const auto& w = in(1);
      auto geo = conv_geometry(x.shape(), w.shape(), n.op.stride, n.op.pad, y.dim(2), y.dim(3));
      Tensor<T> gx(x.shape()), gw(w.shape()), gb(in(2).shape());
      kernels::conv2d_backward<T>(geo, x.data(), w.data(), g.data(), gx.data(), gw.data(), gb.data());
      push(0, std::move(gx));
      push(1, std::move(gw));
      push(2, std::move(gb));
      return;
    }
    case OpKind::Deconv2d: {
      const auto& x = in(0);
      const auto& w = in(1);
      auto geo = deconv_geometry(x.shape(), w.shape(), y.shape(), n.op.stride, n.op.pad);
      Tensor<T> gx(x.shape()), gw(w.shape()), gb(in(2).shape());
      kernels::deconv2d_backward<T>(geo, x.data(), w.data(), g.data(), gx.data(), gw.data(), gb.data());
      push(0, std::move(gx));
      push(1, std::move(gw));
      push(2, std::move(gb));
      return;
    }
    case OpKind::Relu:
      push(0, map_grad(g, in(0), [](T gi, T x) { return x > T(0) ? gi : T(0); }));
      return;
    case OpKind::LeakyRelu: {
      const T a = static_cast<T>(n.op.alpha);
      push(0, map_grad(g, in(0), [a](T gi, T x) { return x >= T(0) ? gi : a * gi; }));
      return;
    }
    case OpKind::Tanh:
      push(0, map_grad(g, y, [](T gi, T t) { return gi * (T(1) - t * t); }));
      return;
    case OpKind::Sigmoid:
      push(0, map_grad(g, y, [](T gi, T s) { return gi * s * (T(1) - s); }));
      return;
    case OpKind::Exp:
      push(0, map_grad(g, y, [](T gi, T e) { return gi * e; }));
      return;
    case OpKind::Log:
      push(0, map_grad(g, in(0), [](T gi, T x) { return gi / x; }));
      return;
    case OpKind::Square:
      push(0, map_grad(g, in(0), [](T gi, T x) { return T(2) * x * gi; }));
      return;
    case OpKind::Clamp: {
      const T lo = static_cast<T>(n.op.lo), hi = static_cast<T>(n.op.hi);
      push(0, map_grad(g, in(0), [lo, hi](T gi, T x) { return (x >= lo && x <= hi) ? gi : T(0); }));
      return;
    }
    case OpKind::Sum:
      push(0, Tensor<T>(in(0).shape(), g.item()));
      return;
    case OpKind::Mean: {
      const auto count = static_cast<T>(in(0).size());
      push(0, Tensor<T>(in(0).shape(), count > 0 ? g.item() / count : T(0)));
      return;
    }
    case OpKind::Concat: {
      const auto& as = in(0).shape();
      const auto& bs = in(1).shape();
      const std::int64_t axis = n.op.axis;
      std::int64_t outer = 1, inner = 1;
      for (std::int64_t i = 0; i < axis; ++i) outer *= as[i];
      for (std::size_t i = axis + 1; i < as.size(); ++i) inner *= as[i];
      const std::int64_t na = as[axis] * inner, nb = bs[axis] * inner;
      Tensor<T> ga(as), gb(bs);
      for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t i = 0; i < na; ++i) ga[o * na + i] = g[o * (na + nb) + i];
        for (std::int64_t i = 0; i < nb; ++i) gb[o * nb + i] = g[o * (na + nb) + na + i];
      }
      push(0, std::move(ga));
      push(1, std::move(gb));
      return;
    }
    case OpKind::BatchNorm: {
      const auto& x = in(0);
      const auto& gamma = in(1);
      const std::int64_t batch = x.dim(0), channels = x.dim(1);
      const std::int64_t plane = numel(x.shape()) / (batch * channels);
      const T count = static_cast<T>(batch * plane);
      const T* mean = n.aux.data();
      const T* invstd = n.aux.data() + channels;
      Tensor<T> gx(x.shape()), gg(gamma.shape()), gbeta(gamma.shape());
      for (std::int64_t c = 0; c < channels; ++c) {
        T sum_g = 0, sum_gx = 0;
        for (std::int64_t b = 0; b < batch; ++b)
          for (std::int64_t p = 0; p < plane; ++p) {
            const std::size_t i = (b * channels + c) * plane + p;
            const T xhat = (x[i] - mean[c]) * invstd[c];
            sum_g += g[i];
            sum_gx += g[i] * xhat;
          }
        gg[c] = sum_gx;
        gbeta[c] = sum_g;
        const T scale = gamma[c] * invstd[c];
        for (std::int64_t b = 0; b < batch; ++b)
          for (std::int64_t p = 0; p < plane; ++p) {
            const std::size_t i = (b * channels + c) * plane + p;
            if (n.op.batch_stats) {
              const T xhat = (x[i] - mean[c]) * invstd[c];
              gx[i] = scale * (g[i] - sum_g / count - xhat * sum_gx / count);
            } else {
              gx[i] = scale * g[i];
            }
          }
      }
      push(0, std::move(gx));
      push(1, std::move(gg));
      push(2, std::move(gbeta));
      return;
    }
  }
}

template class Gradients<float>;
template class Gradients<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace vigan
