// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/image_codec.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

namespace vigan {

std::uint8_t pixel_to_byte(float v) {
  const double scaled = (static_cast<double>(v) + 1.0) * 127.5;
  const double r = std::floor(scaled + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

float byte_to_pixel(std::uint8_t b) { return static_cast<float>(b / 127.5 - 1.0); }

std::vector<std::uint8_t> encode_png(const Tensor<float>& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
    throw CodecError("encode_png: expected [1|3, H, W], got " + to_string(image.shape()));
  const std::int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(c * h * w));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t k = 0; k < c; ++k) pixels[(y * w + x) * c + k] = pixel_to_byte(image[(k * h + y) * w + x]);

  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = c == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels.data(), 0, nullptr))
    throw CodecError(std::string("encode_png: ") + img.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels.data(), 0, nullptr))
    throw CodecError(std::string("encode_png: ") + img.message);
  out.resize(size);
  return out;
}

Tensor<float> decode_png(std::span<const std::uint8_t> bytes, std::int64_t channels) {
  if (channels != 1 && channels != 3) throw CodecError("decode_png: channels must be 1 or 3");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw CodecError(std::string("malformed PNG: ") + img.message);
  if (img.width > kMaxImageSide || img.height > kMaxImageSide) {
    png_image_free(&img);
    throw ImageTooLarge("PNG of " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                        " exceeds the " + std::to_string(kMaxImageSide) + " pixel limit");
  }
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr))
    throw CodecError(std::string("malformed PNG: ") + img.message);
  const std::int64_t h = img.height, w = img.width;
  Tensor<float> out({channels, h, w});
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t k = 0; k < channels; ++k)
        out[(k * h + y) * w + x] = byte_to_pixel(pixels[(y * w + x) * channels + k]);
  return out;
}

Tensor<float> crop_and_resize(const Tensor<float>& image, std::int64_t size) {
  const std::int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const std::int64_t side = std::min(h, w);
  const std::int64_t y0 = (h - side) / 2, x0 = (w - side) / 2;
  Tensor<float> out({c, size, size});
  if (side == size) {
    for (std::int64_t k = 0; k < c; ++k)
      for (std::int64_t y = 0; y < size; ++y)
        for (std::int64_t x = 0; x < size; ++x) out[(k * size + y) * size + x] = image[(k * h + y0 + y) * w + x0 + x];
    return out;
  }
  const double ratio = static_cast<double>(side) / static_cast<double>(size);
  auto at = [&](std::int64_t k, std::int64_t y, std::int64_t x) {
    y = std::clamp<std::int64_t>(y, 0, side - 1);
    x = std::clamp<std::int64_t>(x, 0, side - 1);
    return static_cast<double>(image[(k * h + y0 + y) * w + x0 + x]);
  };
  for (std::int64_t k = 0; k < c; ++k)
    for (std::int64_t y = 0; y < size; ++y)
      for (std::int64_t x = 0; x < size; ++x) {
        const double sy = (y + 0.5) * ratio - 0.5, sx = (x + 0.5) * ratio - 0.5;
        const auto iy = static_cast<std::int64_t>(std::floor(sy)), ix = static_cast<std::int64_t>(std::floor(sx));
        const double fy = sy - iy, fx = sx - ix;
        const double v = (1 - fy) * ((1 - fx) * at(k, iy, ix) + fx * at(k, iy, ix + 1)) +
                         fy * ((1 - fx) * at(k, iy + 1, ix) + fx * at(k, iy + 1, ix + 1));
        out[(k * size + y) * size + x] = static_cast<float>(v);
      }
  return out;
}

Tensor<float> tile_grid(const Tensor<float>& images, std::int64_t gap, std::int64_t cols) {
  if (images.rank() != 4 || images.dim(0) < 1) throw ShapeError("tile_grid: expected [N,C,H,W], got " + to_string(images.shape()));
  const std::int64_t n = images.dim(0), c = images.dim(1), h = images.dim(2), w = images.dim(3);
  if (cols <= 0) cols = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(n)) - 1e-9));
  cols = std::min(cols, n);
  const std::int64_t rows = (n + cols - 1) / cols;
  const std::int64_t gh = rows * h + (rows - 1) * gap, gw = cols * w + (cols - 1) * gap;
  Tensor<float> out({c, gh, gw}, 1.0f);
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t oy = (i / cols) * (h + gap), ox = (i % cols) * (w + gap);
    for (std::int64_t k = 0; k < c; ++k)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
          out[(k * gh + oy + y) * gw + ox + x] = images[((i * c + k) * h + y) * w + x];
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace vigan
