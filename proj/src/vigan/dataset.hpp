// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vigan/tensor.hpp"

namespace vigan {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sample {
  Tensor<float> image;            // [C, H, W] in [-1, 1]
  std::vector<float> attributes;  // in [0, 1]
};

/// Two glyphs on one grid: class of the first in the left half, class of
/// the second in the right half.
struct GlyphDatasetConfig {
  std::int64_t grid_size = 32;
  std::int64_t glyph_size = 12;
  std::int64_t classes_per_slot = 4;
  std::int64_t n_samples = 2000;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const GlyphDatasetConfig&, const GlyphDatasetConfig&) = default;
};

inline constexpr std::int64_t kGlyphClasses = 10;

/// glyph_size x glyph_size bitmap of a class, 1 on strokes, 0 elsewhere.
std::vector<std::uint8_t> glyph_bitmap(std::int64_t cls, std::int64_t glyph_size);

struct GlyphPlacement {
  std::int64_t cls1 = 0, cls2 = 0;
  std::int64_t x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

Sample render_two_glyph(const GlyphDatasetConfig& config, const GlyphPlacement& placement);

std::vector<Sample> generate_two_glyph(const GlyphDatasetConfig& config);
/// Placements drawn by generate_two_glyph, in the same order.
std::vector<GlyphPlacement> two_glyph_placements(const GlyphDatasetConfig& config);

/// Reads dir/attributes.csv (header id,a_0,...,a_{k-1}) and dir/images/NNNN.png.
std::vector<Sample> load_folder(const std::string& dir, std::int64_t size, std::int64_t channels);

/// Writes samples in the folder format read by load_folder; ids are 0..n-1.
void export_folder(const std::vector<Sample>& samples, const std::string& dir);

std::string image_file_name(std::int64_t id);

/// Dataset source descriptor as it appears in a training config.
struct DatasetSource {
  std::string kind = "glyph";  // "glyph" or "folder"
  GlyphDatasetConfig glyph;
  std::string folder;
  std::int64_t holdout = 200;  // trailing samples reserved for evaluation

  friend bool operator==(const DatasetSource&, const DatasetSource&) = default;
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> heldout;
};

/// glyph: n_samples training samples plus `holdout` more from the same
/// stream; folder: the last `holdout` rows are held out.
DatasetSplit load_dataset(const DatasetSource& source, std::int64_t image_size, std::int64_t channels);

}  // namespace vigan
