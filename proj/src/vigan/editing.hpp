// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

// Read-only model snapshot and the operations served to clients: encode,
// generate, sample grids and attribute edits. All forwards run in eval mode.

#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vigan/checkpoint.hpp"
#include "vigan/dataset.hpp"
#include "vigan/trainer.hpp"

namespace vigan {

/// Request-level validation failure (unknown group, value out of range...).
class EditError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LoadedModel {
  TrainConfig config;
  Model model;
  ParamStore<float> params;
  std::int64_t step = 0;
  std::optional<DatasetSplit> data;  // absent when the dataset cannot be loaded
  std::string data_error;            // why `data` is absent
  AttributePool pool;

  LoadedModel(const Checkpoint& ckpt, bool load_data);

  std::int64_t dataset_size() const;
  const Sample& dataset_sample(std::int64_t index) const;  // train rows first, then held-out
};

std::shared_ptr<const LoadedModel> load_model(const std::string& ckpt_path, bool load_data = true);

/// Config summary, attribute groups and per-attribute labels.
nlohmann::json model_info(const LoadedModel& m);

/// Decodes a PNG, center-crops and resizes to the model's input.
Tensor<float> prepare_image(const LoadedModel& m, std::span<const std::uint8_t> png);

struct EncodeResult {
  std::vector<float> mu;
  std::vector<float> logvar;
  std::vector<float> c_hat;  // recognizer probabilities
};

EncodeResult encode_image(const LoadedModel& m, const Tensor<float>& image);

/// z defaults to a N(0, I) draw from `seed`, or from entropy without one.
Tensor<float> generate_image(const LoadedModel& m, const std::vector<float>& c,
                             const std::optional<std::vector<float>>& z, std::optional<std::uint64_t> seed);

/// n prior samples (z from the seed, c from the training attribute pool)
/// tiled row-major.
Tensor<float> sample_grid(const LoadedModel& m, std::int64_t n, std::uint64_t seed);

struct EditRequest {
  std::optional<Tensor<float>> image;  // [C, H, W]
  std::optional<std::int64_t> dataset_index;
  std::vector<std::pair<std::string, double>> set;  // group name or attribute index -> value
  std::optional<std::uint64_t> seed;                // sample z instead of using mu
};

struct EditResult {
  Tensor<float> original;
  Tensor<float> reconstruction;
  Tensor<float> edited;
  std::vector<float> c_base;
  std::vector<float> c_effective;

  /// original | reconstruction | edited
  Tensor<float> triptych() const;
};

/// Applies `set` to `base`. A group name selects a class and replaces the
/// whole group; an index inside a group accepts 1 (select) or 0 (clear),
/// and every touched group must end one-hot; ungrouped indices take any
/// value in [0, 1].
std::vector<float> apply_assignments(const ModelConfig& cfg, std::vector<float> base,
                                     const std::vector<std::pair<std::string, double>>& set);

EditResult edit(const LoadedModel& m, const EditRequest& request);

/// "slot1=2" or "3=0.5"
std::pair<std::string, double> parse_assignment(const std::string& text);

}  // namespace vigan
