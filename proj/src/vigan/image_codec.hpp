// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "vigan/tensor.hpp"

namespace vigan {

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImageTooLarge : public CodecError {
 public:
  using CodecError::CodecError;
};

inline constexpr std::int64_t kMaxImageSide = 4096;

/// [-1, 1] -> [0, 255], rounding half up; out-of-range values saturate.
std::uint8_t pixel_to_byte(float v);
float byte_to_pixel(std::uint8_t b);

/// image is [C, H, W] with C in {1, 3}; grayscale or RGB PNG respectively.
std::vector<std::uint8_t> encode_png(const Tensor<float>& image);

/// Decodes any PNG into [channels, H, W] in [-1, 1].
Tensor<float> decode_png(std::span<const std::uint8_t> bytes, std::int64_t channels);

/// Center-crops to a square and resizes bilinearly to size x size.
Tensor<float> crop_and_resize(const Tensor<float>& image, std::int64_t size);

/// Row-major tiling of [N, C, H, W] images with `gap`-pixel separators of
/// value +1 (white). cols = ceil(sqrt(N)) unless given.
Tensor<float> tile_grid(const Tensor<float>& images, std::int64_t gap = 2, std::int64_t cols = 0);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace vigan
