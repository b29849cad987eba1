// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/kernels.hpp"

#include <cblas.h>

#include <algorithm>

namespace vigan::kernels {

namespace {

CBLAS_TRANSPOSE trans(bool t) { return t ? CblasTrans : CblasNoTrans; }

// x: [B, C, H, W] -> col: [C*kh*kw, B*out_h*out_w]
template <class T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const std::int64_t plane = g.out_h * g.out_w;
  const std::int64_t n = g.batch * plane;
  for (std::int64_t c = 0; c < g.in_channels; ++c) {
    for (std::int64_t i = 0; i < g.kh; ++i) {
      for (std::int64_t j = 0; j < g.kw; ++j) {
        T* row = col + ((c * g.kh + i) * g.kw + j) * n;
        for (std::int64_t b = 0; b < g.batch; ++b) {
          const T* src = x + (b * g.in_channels + c) * g.in_h * g.in_w;
          T* dst = row + b * plane;
          for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
            const std::int64_t ih = oh * g.stride - g.pad + i;
            T* drow = dst + oh * g.out_w;
            if (ih < 0 || ih >= g.in_h) {
              std::fill(drow, drow + g.out_w, T(0));
              continue;
            }
            const T* srow = src + ih * g.in_w;
            for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
              const std::int64_t iw = ow * g.stride - g.pad + j;
              drow[ow] = (iw >= 0 && iw < g.in_w) ? srow[iw] : T(0);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col; x must be zeroed by the caller.
template <class T>
void col2im(const ConvGeometry& g, const T* col, T* x) {
  const std::int64_t plane = g.out_h * g.out_w;
  const std::int64_t n = g.batch * plane;
  for (std::int64_t c = 0; c < g.in_channels; ++c) {
    for (std::int64_t i = 0; i < g.kh; ++i) {
      for (std::int64_t j = 0; j < g.kw; ++j) {
        const T* row = col + ((c * g.kh + i) * g.kw + j) * n;
        for (std::int64_t b = 0; b < g.batch; ++b) {
          T* dst = x + (b * g.in_channels + c) * g.in_h * g.in_w;
          const T* src = row + b * plane;
          for (std::int64_t oh = 0; oh < g.out_h; ++oh) {
            const std::int64_t ih = oh * g.stride - g.pad + i;
            if (ih < 0 || ih >= g.in_h) continue;
            T* drow = dst + ih * g.in_w;
            const T* srow = src + oh * g.out_w;
            for (std::int64_t ow = 0; ow < g.out_w; ++ow) {
              const std::int64_t iw = ow * g.stride - g.pad + j;
              if (iw >= 0 && iw < g.in_w) drow[iw] += srow[ow];
            }
          }
        }
      }
    }
  }
}

// [B, C, P] <-> [C, B*P]
template <class T>
void batch_to_channel_major(const T* src, T* dst, std::int64_t batch, std::int64_t channels, std::int64_t plane) {
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t c = 0; c < channels; ++c)
      std::copy_n(src + (b * channels + c) * plane, plane, dst + c * batch * plane + b * plane);
}

template <class T>
void channel_major_to_batch(const T* src, T* dst, std::int64_t batch, std::int64_t channels, std::int64_t plane) {
  for (std::int64_t c = 0; c < channels; ++c)
    for (std::int64_t b = 0; b < batch; ++b)
      std::copy_n(src + c * batch * plane + b * plane, plane, dst + (b * channels + c) * plane);
}

template <class T>
void add_channel_bias(T* y, std::span<const T> bias, std::int64_t batch, std::int64_t channels, std::int64_t plane) {
  if (bias.empty()) return;
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t c = 0; c < channels; ++c) {
      T* p = y + (b * channels + c) * plane;
      const T v = bias[c];
      for (std::int64_t i = 0; i < plane; ++i) p[i] += v;
    }
}

template <class T>
void channel_sums(const T* dy, std::span<T> out, std::int64_t batch, std::int64_t channels, std::int64_t plane) {
  std::fill(out.begin(), out.end(), T(0));
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t c = 0; c < channels; ++c) {
      const T* p = dy + (b * channels + c) * plane;
      T s = 0;
      for (std::int64_t i = 0; i < plane; ++i) s += p[i];
      out[c] += s;
    }
}

}  // namespace

template <>
void gemm<float>(bool ta, bool tb, std::int64_t m, std::int64_t n, std::int64_t k, float alpha, const float* a,
                 const float* b, float beta, float* c) {
  if (m == 0 || n == 0) return;
  cblas_sgemm(CblasRowMajor, trans(ta), trans(tb), static_cast<int>(m), static_cast<int>(n), static_cast<int>(k),
              alpha, a, static_cast<int>(ta ? m : k), b, static_cast<int>(tb ? k : n), beta, c, static_cast<int>(n));
}

template <>
void gemm<double>(bool ta, bool tb, std::int64_t m, std::int64_t n, std::int64_t k, double alpha, const double* a,
                  const double* b, double beta, double* c) {
  if (m == 0 || n == 0) return;
  cblas_dgemm(CblasRowMajor, trans(ta), trans(tb), static_cast<int>(m), static_cast<int>(n), static_cast<int>(k),
              alpha, a, static_cast<int>(ta ? m : k), b, static_cast<int>(tb ? k : n), beta, c, static_cast<int>(n));
}

template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                    std::span<T> y) {
  const std::int64_t ckk = g.in_channels * g.kh * g.kw;
  const std::int64_t plane = g.out_h * g.out_w;
  const std::int64_t n = g.batch * plane;
  std::vector<T> col(static_cast<std::size_t>(ckk * n));
  im2col(g, x.data(), col.data());
  std::vector<T> out(static_cast<std::size_t>(g.out_channels * n));
  gemm<T>(false, false, g.out_channels, n, ckk, T(1), w.data(), col.data(), T(0), out.data());
  channel_major_to_batch(out.data(), y.data(), g.batch, g.out_channels, plane);
  add_channel_bias(y.data(), bias, g.batch, g.out_channels, plane);
}

template <class T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> dy,
                     std::span<T> dx, std::span<T> dw, std::span<T> dbias) {
  const std::int64_t ckk = g.in_channels * g.kh * g.kw;
  const std::int64_t plane = g.out_h * g.out_w;
  const std::int64_t n = g.batch * plane;
  std::vector<T> dy_cm(static_cast<std::size_t>(g.out_channels * n));
  batch_to_channel_major(dy.data(), dy_cm.data(), g.batch, g.out_channels, plane);
  if (!dw.empty()) {
    std::vector<T> col(static_cast<std::size_t>(ckk * n));
    im2col(g, x.data(), col.data());
    gemm<T>(false, true, g.out_channels, ckk, n, T(1), dy_cm.data(), col.data(), T(0), dw.data());
  }
  if (!dbias.empty()) channel_sums(dy.data(), dbias, g.batch, g.out_channels, plane);
  if (!dx.empty()) {
    std::vector<T> dcol(static_cast<std::size_t>(ckk * n));
    gemm<T>(true, false, ckk, n, g.out_channels, T(1), w.data(), dy_cm.data(), T(0), dcol.data());
    std::fill(dx.begin(), dx.end(), T(0));
    col2im(g, dcol.data(), dx.data());
  }
}

template <class T>
void deconv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                      std::span<T> y) {
  const std::int64_t ckk = g.in_channels * g.kh * g.kw;
  const std::int64_t plane = g.out_h * g.out_w;
  const std::int64_t n = g.batch * plane;
  std::vector<T> x_cm(static_cast<std::size_t>(g.out_channels * n));
  batch_to_channel_major(x.data(), x_cm.data(), g.batch, g.out_channels, plane);
  std::vector<T> col(static_cast<std::size_t>(ckk * n));
  gemm<T>(true, false, ckk, n, g.out_channels, T(1), w.data(), x_cm.data(), T(0), col.data());
  std::fill(y.begin(), y.end(), T(0));
  col2im(g, col.data(), y.data());
  add_channel_bias(y.data(), bias, g.batch, g.in_channels, g.in_h * g.in_w);
}

template <class T>
void deconv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> dy,
                       std::span<T> dx, std::span<T> dw, std::span<T> dbias) {
  const std::int64_t ckk = g.in_channels * g.kh * g.kw;
  const std::int64_t plane = g.out_h * g.out_w;
  const std::int64_t n = g.batch * plane;
  std::vector<T> dcol(static_cast<std::size_t>(ckk * n));
  im2col(g, dy.data(), dcol.data());
  if (!dx.empty()) {
    std::vector<T> dx_cm(static_cast<std::size_t>(g.out_channels * n));
    gemm<T>(false, false, g.out_channels, n, ckk, T(1), w.data(), dcol.data(), T(0), dx_cm.data());
    channel_major_to_batch(dx_cm.data(), dx.data(), g.batch, g.out_channels, plane);
  }
  if (!dw.empty()) {
    std::vector<T> x_cm(static_cast<std::size_t>(g.out_channels * n));
    batch_to_channel_major(x.data(), x_cm.data(), g.batch, g.out_channels, plane);
    gemm<T>(false, true, g.out_channels, ckk, n, T(1), x_cm.data(), dcol.data(), T(0), dw.data());
  }
  if (!dbias.empty()) channel_sums(dy.data(), dbias, g.batch, g.in_channels, g.in_h * g.in_w);
}

#define VIGAN_INSTANTIATE(T)                                                                                     \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,                  \
                                  std::span<const T>, std::span<T>);                                             \
  template void conv2d_backward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,                 \
                                   std::span<const T>, std::span<T>, std::span<T>, std::span<T>);               \
  template void deconv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,                \
                                    std::span<const T>, std::span<T>);                                           \
  template void deconv2d_backward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,               \
                                     std::span<const T>, std::span<T>, std::span<T>, std::span<T>);

VIGAN_INSTANTIATE(float)
VIGAN_INSTANTIATE(double)

#undef VIGAN_INSTANTIATE

}  // namespace vigan::kernels
