// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/ops.hpp"

#include <cmath>

#include "vigan/kernels.hpp"

namespace vigan {

namespace {

template <class T>
Tape<T>& same_tape(const Var<T>& a, const Var<T>& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
  return a.tape();
}

template <class T>
Shape checked(const OpDesc& op, std::initializer_list<const Var<T>*> in) {
  std::vector<Shape> shapes;
  for (const auto* v : in) shapes.push_back(v->shape());
  return infer_shape(op, shapes);
}

template <class T, class F>
Var<T> unary(const Var<T>& x, OpDesc op, F&& fn) {
  const Shape out_shape = checked(op, {&x});
  const auto& xv = x.value();
  Tensor<T> out(out_shape);
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fn(xv[i]);
  return {&x.tape(), x.tape().record(std::move(op), {x.id()}, std::move(out))};
}

template <class T, class F>
Var<T> binary(const Var<T>& a, const Var<T>& b, OpKind kind, F&& fn) {
  Tape<T>& tape = same_tape(a, b);
  OpDesc op = OpDesc::of(kind);
  const Shape out_shape = checked(op, {&a, &b});
  Tensor<T> out(out_shape);
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(av[i], bv[i]);
  return {&tape, tape.record(std::move(op), {a.id(), b.id()}, std::move(out))};
}

}  // namespace

template <class T>
Var<T> constant(Tape<T>& tape, Tensor<T> value) {
  return {&tape, tape.leaf(std::move(value))};
}

template <class T>
Var<T> detach(const Var<T>& x) {
  return constant(x.tape(), x.value());
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return binary(a, b, OpKind::Add, [](T x, T y) { return x + y; });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return binary(a, b, OpKind::Sub, [](T x, T y) { return x - y; });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return binary(a, b, OpKind::Mul, [](T x, T y) { return x * y; });
}

template <class T>
Var<T> elementwise(const Var<T>& a, const Var<T>& b, ElementwiseKind kind) {
  switch (kind) {
    case ElementwiseKind::Add:
      return add(a, b);
    case ElementwiseKind::Sub:
      return sub(a, b);
    case ElementwiseKind::Mul:
      return mul(a, b);
  }
  throw std::invalid_argument("unknown elementwise kind");
}

template <class T>
Var<T> scale(const Var<T>& x, double factor) {
  OpDesc op = OpDesc::of(OpKind::Scale);
  op.alpha = factor;
  const T s = static_cast<T>(factor);
  return unary(x, std::move(op), [s](T v) { return v * s; });
}

template <class T>
Var<T> add_scalar(const Var<T>& x, double value) {
  OpDesc op = OpDesc::of(OpKind::AddScalar);
  op.alpha = value;
  const T s = static_cast<T>(value);
  return unary(x, std::move(op), [s](T v) { return v + s; });
}

template <class T>
Var<T> add_bias(const Var<T>& x, const Var<T>& b) {
  Tape<T>& tape = same_tape(x, b);
  OpDesc op = OpDesc::of(OpKind::AddBias);
  const Shape shape = checked(op, {&x, &b});
  const std::int64_t channels = shape[1];
  const std::int64_t plane = numel(shape) / (shape[0] * channels);
  Tensor<T> out = x.value();
  const auto& bv = b.value();
  for (std::int64_t n = 0; n < shape[0]; ++n)
    for (std::int64_t c = 0; c < channels; ++c)
      for (std::int64_t p = 0; p < plane; ++p) out[(n * channels + c) * plane + p] += bv[c];
  return {&tape, tape.record(std::move(op), {x.id(), b.id()}, std::move(out))};
}

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = same_tape(a, b);
  OpDesc op = OpDesc::of(OpKind::MatMul);
  const Shape shape = checked(op, {&a, &b});
  Tensor<T> out(shape);
  kernels::gemm<T>(false, false, shape[0], shape[1], a.shape()[1], T(1), a.value().data().data(),
                   b.value().data().data(), T(0), out.data().data());
  return {&tape, tape.record(std::move(op), {a.id(), b.id()}, std::move(out))};
}

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::int64_t stride, std::int64_t pad) {
  Tape<T>& tape = same_tape(x, w);
  same_tape(x, bias);
  OpDesc op = OpDesc::of(OpKind::Conv2d);
  op.stride = stride;
  op.pad = pad;
  const Shape shape = checked(op, {&x, &w, &bias});
  kernels::ConvGeometry g;
  g.batch = x.shape()[0];
  g.in_channels = x.shape()[1];
  g.in_h = x.shape()[2];
  g.in_w = x.shape()[3];
  g.out_channels = shape[1];
  g.out_h = shape[2];
  g.out_w = shape[3];
  g.kh = w.shape()[2];
  g.kw = w.shape()[3];
  g.stride = stride;
  g.pad = pad;
  Tensor<T> out(shape);
  kernels::conv2d_forward<T>(g, x.value().data(), w.value().data(), bias.value().data(), out.data());
  return {&tape, tape.record(std::move(op), {x.id(), w.id(), bias.id()}, std::move(out))};
}

template <class T>
Var<T> deconv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, std::int64_t stride, std::int64_t pad) {
  Tape<T>& tape = same_tape(x, w);
  same_tape(x, bias);
  OpDesc op = OpDesc::of(OpKind::Deconv2d);
  op.stride = stride;
  op.pad = pad;
  const Shape shape = checked(op, {&x, &w, &bias});
  kernels::ConvGeometry g;
  g.batch = x.shape()[0];
  g.out_channels = w.shape()[0];
  g.in_channels = w.shape()[1];
  g.kh = w.shape()[2];
  g.kw = w.shape()[3];
  g.out_h = x.shape()[2];
  g.out_w = x.shape()[3];
  g.in_h = shape[2];
  g.in_w = shape[3];
  g.stride = stride;
  g.pad = pad;
  Tensor<T> out(shape);
  kernels::deconv2d_forward<T>(g, x.value().data(), w.value().data(), bias.value().data(), out.data());
  return {&tape, tape.record(std::move(op), {x.id(), w.id(), bias.id()}, std::move(out))};
}

template <class T>
Var<T> relu(const Var<T>& x) {
  return unary(x, OpDesc::of(OpKind::Relu), [](T v) { return v > T(0) ? v : T(0); });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, double alpha) {
  OpDesc op = OpDesc::of(OpKind::LeakyRelu);
  op.alpha = alpha;
  const T a = static_cast<T>(alpha);
  return unary(x, std::move(op), [a](T v) { return v >= T(0) ? v : a * v; });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  return unary(x, OpDesc::of(OpKind::Tanh), [](T v) { return std::tanh(v); });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  return unary(x, OpDesc::of(OpKind::Sigmoid), [](T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  });
}

template <class T>
Var<T> activation(const Var<T>& x, Activation act) {
  switch (act.kind) {
    case ActivationKind::None:
      return x;
    case ActivationKind::Relu:
      return relu(x);
    case ActivationKind::LeakyRelu:
      return leaky_relu(x, act.alpha);
    case ActivationKind::Tanh:
      return tanh(x);
    case ActivationKind::Sigmoid:
      return sigmoid(x);
  }
  throw std::invalid_argument("unknown activation");
}

template <class T>
Var<T> exp(const Var<T>& x) {
  return unary(x, OpDesc::of(OpKind::Exp), [](T v) { return std::exp(v); });
}

template <class T>
Var<T> log(const Var<T>& x) {
  return unary(x, OpDesc::of(OpKind::Log), [](T v) { return std::log(v); });
}

template <class T>
Var<T> square(const Var<T>& x) {
  return unary(x, OpDesc::of(OpKind::Square), [](T v) { return v * v; });
}

template <class T>
Var<T> clamp(const Var<T>& x, double lo, double hi) {
  OpDesc op = OpDesc::of(OpKind::Clamp);
  op.lo = lo;
  op.hi = hi;
  const T l = static_cast<T>(lo), h = static_cast<T>(hi);
  return unary(x, std::move(op), [l, h](T v) { return v < l ? l : (v > h ? h : v); });
}

template <class T>
Var<T> sum(const Var<T>& x) {
  OpDesc op = OpDesc::of(OpKind::Sum);
  const Shape shape = checked(op, {&x});
  T s = 0;
  for (T v : x.value().data()) s += v;
  return {&x.tape(), x.tape().record(std::move(op), {x.id()}, Tensor<T>(shape, s))};
}

template <class T>
Var<T> mean(const Var<T>& x) {
  OpDesc op = OpDesc::of(OpKind::Mean);
  const Shape shape = checked(op, {&x});
  T s = 0;
  for (T v : x.value().data()) s += v;
  const auto n = x.value().size();
  return {&x.tape(), x.tape().record(std::move(op), {x.id()}, Tensor<T>(shape, n ? s / static_cast<T>(n) : T(0)))};
}

template <class T>
Var<T> reduce(const Var<T>& x, ReduceKind kind) {
  return kind == ReduceKind::Sum ? sum(x) : mean(x);
}

template <class T>
Var<T> concat(const Var<T>& a, const Var<T>& b, std::int64_t axis) {
  Tape<T>& tape = same_tape(a, b);
  OpDesc op = OpDesc::of(OpKind::Concat);
  op.axis = axis;
  const Shape shape = checked(op, {&a, &b});
  std::int64_t outer = 1, inner = 1;
  for (std::int64_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::int64_t na = a.shape()[axis] * inner, nb = b.shape()[axis] * inner;
  Tensor<T> out(shape);
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < na; ++i) out[o * (na + nb) + i] = av[o * na + i];
    for (std::int64_t i = 0; i < nb; ++i) out[o * (na + nb) + na + i] = bv[o * nb + i];
  }
  return {&tape, tape.record(std::move(op), {a.id(), b.id()}, std::move(out))};
}

template <class T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  OpDesc op = OpDesc::of(OpKind::Reshape);
  op.target = shape;
  checked(op, {&x});
  return {&x.tape(), x.tape().record(std::move(op), {x.id()}, x.value().reshaped(std::move(shape)))};
}

template <class T>
Var<T> flatten(const Var<T>& x) {
  const Shape& s = x.shape();
  if (s.empty()) throw ShapeError("flatten of a scalar");
  return reshape(x, Shape{s[0], numel(s) / std::max<std::int64_t>(s[0], 1)});
}

template <class T>
BatchNormResult<T> batchnorm_train(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps) {
  Tape<T>& tape = same_tape(x, gamma);
  same_tape(x, beta);
  OpDesc op = OpDesc::of(OpKind::BatchNorm);
  op.batch_stats = true;
  op.eps = eps;
  const Shape shape = checked(op, {&x, &gamma, &beta});
  const std::int64_t batch = shape[0], channels = shape[1];
  if (batch < 2) throw ShapeError("batchnorm: batch size " + std::to_string(batch) + " in train mode");
  const std::int64_t plane = numel(shape) / (batch * channels);
  const T count = static_cast<T>(batch * plane);
  const auto& xv = x.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  std::vector<T> mean_v(channels), var_v(channels), aux(2 * channels);
  Tensor<T> out(shape);
  for (std::int64_t c = 0; c < channels; ++c) {
    T s = 0;
    for (std::int64_t n = 0; n < batch; ++n)
      for (std::int64_t p = 0; p < plane; ++p) s += xv[(n * channels + c) * plane + p];
    const T m = s / count;
    T ss = 0;
    for (std::int64_t n = 0; n < batch; ++n)
      for (std::int64_t p = 0; p < plane; ++p) {
        const T d = xv[(n * channels + c) * plane + p] - m;
        ss += d * d;
      }
    const T var = ss / count;
    const T invstd = T(1) / std::sqrt(var + static_cast<T>(eps));
    mean_v[c] = m;
    var_v[c] = var;
    aux[c] = m;
    aux[channels + c] = invstd;
    for (std::int64_t n = 0; n < batch; ++n)
      for (std::int64_t p = 0; p < plane; ++p) {
        const std::size_t i = (n * channels + c) * plane + p;
        out[i] = gv[c] * (xv[i] - m) * invstd + bv[c];
      }
  }
  NodeId id = tape.record(std::move(op), {x.id(), gamma.id(), beta.id()}, std::move(out), std::move(aux));
  return {Var<T>(&tape, id), std::move(mean_v), std::move(var_v)};
}

template <class T>
Var<T> batchnorm_eval(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Tensor<T>& running_mean,
                      const Tensor<T>& running_var, double eps) {
  Tape<T>& tape = same_tape(x, gamma);
  same_tape(x, beta);
  OpDesc op = OpDesc::of(OpKind::BatchNorm);
  op.batch_stats = false;
  op.eps = eps;
  const Shape shape = checked(op, {&x, &gamma, &beta});
  const std::int64_t batch = shape[0], channels = shape[1];
  if (running_mean.size() != static_cast<std::size_t>(channels) ||
      running_var.size() != static_cast<std::size_t>(channels))
    throw ShapeError("batchnorm: running statistics do not match " + std::to_string(channels) + " channels");
  const std::int64_t plane = batch ? numel(shape) / (batch * channels) : 0;
  const auto& xv = x.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  std::vector<T> aux(2 * channels);
  Tensor<T> out(shape);
  for (std::int64_t c = 0; c < channels; ++c) {
    const T m = running_mean[c];
    const T invstd = T(1) / std::sqrt(running_var[c] + static_cast<T>(eps));
    aux[c] = m;
    aux[channels + c] = invstd;
    for (std::int64_t n = 0; n < batch; ++n)
      for (std::int64_t p = 0; p < plane; ++p) {
        const std::size_t i = (n * channels + c) * plane + p;
        out[i] = gv[c] * (xv[i] - m) * invstd + bv[c];
      }
  }
  return {&tape, tape.record(std::move(op), {x.id(), gamma.id(), beta.id()}, std::move(out), std::move(aux))};
}

#define VIGAN_INSTANTIATE(T)                                                                                   \
  template Var<T> constant<T>(Tape<T>&, Tensor<T>);                                                           \
  template Var<T> detach<T>(const Var<T>&);                                                                   \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> elementwise<T>(const Var<T>&, const Var<T>&, ElementwiseKind);                              \
  template Var<T> scale<T>(const Var<T>&, double);                                                            \
  template Var<T> add_scalar<T>(const Var<T>&, double);                                                       \
  template Var<T> add_bias<T>(const Var<T>&, const Var<T>&);                                                  \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                                    \
  template Var<T> conv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::int64_t, std::int64_t);         \
  template Var<T> deconv2d<T>(const Var<T>&, const Var<T>&, const Var<T>&, std::int64_t, std::int64_t);       \
  template Var<T> relu<T>(const Var<T>&);                                                                     \
  template Var<T> leaky_relu<T>(const Var<T>&, double);                                                       \
  template Var<T> tanh<T>(const Var<T>&);                                                                     \
  template Var<T> sigmoid<T>(const Var<T>&);                                                                  \
  template Var<T> activation<T>(const Var<T>&, Activation);                                                   \
  template Var<T> exp<T>(const Var<T>&);                                                                      \
  template Var<T> log<T>(const Var<T>&);                                                                      \
  template Var<T> square<T>(const Var<T>&);                                                                   \
  template Var<T> clamp<T>(const Var<T>&, double, double);                                                    \
  template Var<T> sum<T>(const Var<T>&);                                                                      \
  template Var<T> mean<T>(const Var<T>&);                                                                     \
  template Var<T> reduce<T>(const Var<T>&, ReduceKind);                                                       \
  template Var<T> concat<T>(const Var<T>&, const Var<T>&, std::int64_t);                                      \
  template Var<T> reshape<T>(const Var<T>&, Shape);                                                           \
  template Var<T> flatten<T>(const Var<T>&);                                                                  \
  template BatchNormResult<T> batchnorm_train<T>(const Var<T>&, const Var<T>&, const Var<T>&, double);        \
  template Var<T> batchnorm_eval<T>(const Var<T>&, const Var<T>&, const Var<T>&, const Tensor<T>&,            \
                                    const Tensor<T>&, double);

VIGAN_INSTANTIATE(float)
VIGAN_INSTANTIATE(double)

#undef VIGAN_INSTANTIATE

}  // namespace vigan
