// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "vigan/dataset.hpp"
#include "vigan/model.hpp"
#include "vigan/objectives.hpp"
#include "vigan/optimizer.hpp"

namespace vigan {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TrainConfig {
  std::int64_t batch_size = 32;
  std::int64_t total_steps = 1000;
  std::uint64_t seed = 1;
  LossWeights weights;
  ModelConfig model = ModelConfig::desk_scale();
  OptimizerConfig optim;
  BatchNormConfig bn;
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
  std::int64_t eval_every = 0;        // 0: evaluate at the end only
  std::int64_t sample_every = 0;      // 0: no periodic sample grids
  DatasetSource dataset;

  void validate() const;
};

bool operator==(const BatchNormConfig& a, const BatchNormConfig& b);
bool operator==(const TrainConfig& a, const TrainConfig& b);

/// Fields that must agree between a checkpoint and a config resuming it;
/// empty when compatible, otherwise the first differing field.
std::string resume_mismatch(const TrainConfig& a, const TrainConfig& b);

nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const ModelConfig& config);

/// Strict parse: unknown keys and wrong types are errors naming the field;
/// lambda1 and lambda2 are mandatory.
TrainConfig train_config_from_json(const nlohmann::json& j);
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& path = "model");

/// Parses text; syntax errors report line and column.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);

}  // namespace vigan
