// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

// Raw numeric kernels shared by the tape operations. All buffers are
// row-major and sized by the caller.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace vigan::kernels {

/// C = alpha * op(A) * op(B) + beta * C, row-major.
template <class T>
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k, T alpha, const T* a,
          const T* b, T beta, T* c);

struct ConvGeometry {
  std::int64_t batch = 0;
  std::int64_t in_channels = 0;
  std::int64_t in_h = 0, in_w = 0;
  std::int64_t out_channels = 0;
  std::int64_t out_h = 0, out_w = 0;
  std::int64_t kh = 0, kw = 0;
  std::int64_t stride = 1;
  std::int64_t pad = 0;
};

// Convolution geometry: the "image" side has in_* extents, the "grid" side
// has out_* extents. For transposed convolution the roles swap: its input
// lives on the grid and its output on the image side.

template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                    std::span<T> y);

template <class T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> dy,
                     std::span<T> dx, std::span<T> dw, std::span<T> dbias);

/// Transposed convolution: x lives on the grid side [B, out_channels, out_h,
/// out_w] of g and y on the image side [B, in_channels, in_h, in_w]. The
/// weight has the conv layout [out_channels, in_channels, kh, kw].
template <class T>
void deconv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> bias,
                      std::span<T> y);

template <class T>
void deconv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> dy,
                       std::span<T> dx, std::span<T> dw, std::span<T> dbias);

}  // namespace vigan::kernels
