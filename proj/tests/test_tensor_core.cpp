// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "vigan/gradcheck.hpp"
#include "vigan/kernels.hpp"
#include "vigan/ops.hpp"
#include "vigan/rng.hpp"

using namespace vigan;

namespace {

Tensor<double> randn(Rng& rng, Shape s) {
  Tensor<double> t(std::move(s));
  fill_normal<double>(rng, t.data());
  return t;
}

// Direct-sum convolution, no im2col.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int stride,
                          int pad) {
  const auto B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto O = w.dim(0), K = w.dim(2);
  const auto OH = (H + 2 * pad - K) / stride + 1, OW = (W + 2 * pad - K) / stride + 1;
  Tensor<double> y({B, O, OH, OW});
  for (std::int64_t n = 0; n < B; ++n)
    for (std::int64_t o = 0; o < O; ++o)
      for (std::int64_t i = 0; i < OH; ++i)
        for (std::int64_t j = 0; j < OW; ++j) {
          double s = b[o];
          for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t ki = 0; ki < K; ++ki)
              for (std::int64_t kj = 0; kj < K; ++kj) {
                const auto r = i * stride - pad + ki, q = j * stride - pad + kj;
                if (r < 0 || r >= H || q < 0 || q >= W) continue;
                s += x[((n * C + c) * H + r) * W + q] * w[((o * C + c) * K + ki) * K + kj];
              }
          y[((n * O + o) * OH + i) * OW + j] = s;
        }
  return y;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("tensor construction and shape checks") {
  Tensor<float> t({2, 3}, 1.5f);
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK(t[5] == 1.5f);
  CHECK(numel({2, 3, 4}) == 24);
  CHECK(to_string({2, 3}) == "[2,3]");
  CHECK_THROWS_AS(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
  CHECK(Tensor<double>::scalar(2.5).item() == 2.5);
  CHECK_THROWS(t.item());
  Tensor<float> bad({2}, std::vector<float>{1, NAN});
  CHECK_FALSE(bad.all_finite());
  CHECK(t.all_finite());
}

TEST_CASE("gemm matches a triple loop for every transpose combination") {
  Rng rng(3);
  const std::int64_t m = 3, n = 4, k = 5;
  for (bool ta : {false, true}) {
    for (bool tb : {false, true}) {
      auto a = randn(rng, ta ? Shape{k, m} : Shape{m, k});
      auto b = randn(rng, tb ? Shape{n, k} : Shape{k, n});
      auto c = randn(rng, {m, n});
      auto expect = c;
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
          double s = 0;
          for (std::int64_t p = 0; p < k; ++p) s += (ta ? a[p * m + i] : a[i * k + p]) * (tb ? b[j * k + p] : b[p * n + j]);
          expect[i * n + j] = 2.0 * s + 0.5 * c[i * n + j];
        }
      kernels::gemm<double>(ta, tb, m, n, k, 2.0, a.data().data(), b.data().data(), 0.5, c.data().data());
      for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d equals direct summation") {
  Rng rng(5);
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      auto x = randn(rng, {2, 3, 7, 7});
      auto w = randn(rng, {4, 3, 3, 3});
      auto b = randn(rng, {4});
      Tape<double> tape;
      auto y = conv2d(constant(tape, x), constant(tape, w), constant(tape, b), stride, pad).value();
      auto expect = naive_conv(x, w, b, stride, pad);
      REQUIRE(y.shape() == expect.shape());
      for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
  Rng rng(8);
  auto x = randn(rng, {2, 2, 8, 8});
  auto w = randn(rng, {3, 2, 4, 4});
  auto y = randn(rng, {2, 3, 4, 4});
  Tape<double> tape;
  auto zero3 = constant(tape, Tensor<double>::zeros({3}));
  auto zero2 = constant(tape, Tensor<double>::zeros({2}));
  auto cx = conv2d(constant(tape, x), constant(tape, w), zero3, 2, 1).value();
  auto dy = deconv2d(constant(tape, y), constant(tape, w), zero2, 2, 1).value();
  REQUIRE(cx.shape() == y.shape());
  REQUIRE(dy.shape() == x.shape());
  CHECK(dot(cx, y) == doctest::Approx(dot(x, dy)).epsilon(1e-12));
}

TEST_CASE("deconv doubles the spatial size with kernel 4, stride 2, pad 1") {
  Tape<float> tape;
  auto x = constant(tape, Tensor<float>({1, 5, 4, 4}, 0.1f));
  auto w = constant(tape, Tensor<float>({5, 2, 4, 4}, 0.1f));
  auto b = constant(tape, Tensor<float>({2}, 0.0f));
  CHECK(deconv2d(x, w, b, 2, 1).shape() == Shape{1, 2, 8, 8});
}

TEST_CASE("elementwise values") {
  Tape<double> tape;
  auto a = constant(tape, Tensor<double>::from({-2, -0.5, 0.5, 2}, {4}));
  CHECK(relu(a).value().vec() == std::vector<double>{0, 0, 0.5, 2});
  CHECK(leaky_relu(a, 0.2).value().vec() == std::vector<double>{-0.4, -0.1, 0.5, 2});
  CHECK(clamp(a, -1, 1).value().vec() == std::vector<double>{-1, -0.5, 0.5, 1});
  CHECK(square(a).value().vec() == std::vector<double>{4, 0.25, 0.25, 4});
  CHECK(sigmoid(a).value()[3] == doctest::Approx(1 / (1 + std::exp(-2.0))));
  CHECK(tanh(a).value()[0] == doctest::Approx(std::tanh(-2.0)));
  CHECK(sum(a).value().item() == doctest::Approx(0.0));
  CHECK(mean(square(a)).value().item() == doctest::Approx(2.125));
  auto c = concat(reshape(a, Shape{2, 2}), reshape(a, Shape{2, 2}), 1);
  CHECK(c.shape() == Shape{2, 4});
  CHECK(c.value().vec() == std::vector<double>{-2, -0.5, -2, -0.5, 0.5, 2, 0.5, 2});
}

TEST_CASE("shape mismatches are rejected at record time") {
  Tape<float> tape;
  auto a = constant(tape, Tensor<float>({2, 3}));
  auto b = constant(tape, Tensor<float>({3, 2}));
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(concat(a, b, 1), ShapeError);
}

TEST_CASE("fan-out accumulates gradients") {
  Tape<double> tape;
  auto x = constant(tape, Tensor<double>::from({3.0}, {1}));
  // y = x*x + x  ->  dy/dx = 2x + 1
  auto y = sum(add(mul(x, x), x));
  auto g = tape.backward(y.id());
  CHECK(g.of(x.id())[0] == doctest::Approx(7.0));
}

TEST_CASE("detach blocks the gradient") {
  Tape<double> tape;
  auto x = constant(tape, Tensor<double>::from({2.0}, {1}));
  auto y = sum(add(mul(x, detach(x)), x));
  auto g = tape.backward(y.id());
  CHECK(g.of(x.id())[0] == doctest::Approx(3.0));
}

TEST_CASE("seeded backward is a vector-Jacobian product") {
  Tape<double> tape;
  auto x = constant(tape, Tensor<double>::from({1, 2, 3}, {3}));
  auto y = square(x);
  auto g = tape.backward(y.id(), Tensor<double>::from({1, 0, -1}, {3}));
  CHECK(g.of(x.id()).vec() == std::vector<double>{2, 0, -6});
}

TEST_CASE("every differentiable op name round-trips") {
  for (OpKind k : differentiable_ops()) CHECK(op_from_name(op_name(k)) == k);
  CHECK_FALSE(op_from_name("not_an_op").has_value());
}

TEST_CASE("property: relative error is symmetric with a floor") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(relative_error(1.0, 2.0) == doctest::Approx(0.5));
  CHECK(relative_error(0.0, 1e-6) == doctest::Approx(1e-3));
}

TEST_CASE("op gradients agree with central differences") {
  SuiteOptions o;
  o.module = "ops";
  for (const auto& r : run_gradcheck_suite(o)) {
    INFO(r.name << " max error " << r.max_error);
    CHECK(r.passed());
    CHECK(r.points == 25);
  }
}

TEST_CASE("injected backward fault is detected") {
  for (const char* name : {"matmul", "conv2d", "sigmoid", "batchnorm"}) {
    SuiteOptions o;
    o.module = name;
    o.fault = op_from_name(name);
    REQUIRE(o.fault.has_value());
    bool any_failed = false;
    for (const auto& r : run_gradcheck_suite(o)) any_failed = any_failed || !r.passed();
    CHECK_MESSAGE(any_failed, name);
  }
}
