// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vigan/checkpoint.hpp"
#include "vigan/config.hpp"
#include "vigan/dataset.hpp"
#include "vigan/rng.hpp"

namespace vigan {

struct Batch {
  Tensor<float> images;      // [B, C, H, W]
  Tensor<float> attributes;  // [B, c_dim]
};

Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices);

/// Indices of the samples used by training step `step` (1-based). Each
/// epoch is a fresh permutation derived from (seed, epoch); a trailing
/// remainder smaller than a batch is dropped.
std::vector<std::size_t> batch_indices(std::size_t n, std::int64_t batch_size, std::uint64_t seed,
                                       std::int64_t step);

/// Training attribute vectors, sampled uniformly for the generation path.
using AttributePool = std::vector<std::vector<float>>;
AttributePool attribute_pool(const std::vector<Sample>& samples);

struct PriorSample {
  Tensor<float> z;  // [B, z_dim] ~ N(0, I)
  Tensor<float> c;  // [B, c_dim] rows copied from the pool
};

PriorSample sample_prior(std::int64_t batch_size, std::int64_t z_dim, const AttributePool& pool, Rng& rng);

/// Everything one training run mutates.
struct TrainState {
  TrainConfig config;
  Model model;
  ParamStore<float> params;
  Optimizers<float> optim;
  std::int64_t step = 0;
  Rng rng;

  explicit TrainState(const TrainConfig& config);
  explicit TrainState(const Checkpoint& ckpt);
  Checkpoint checkpoint() const;
};

/// Hooks for audits: sub-step order, discriminator and recognizer inputs.
class StepObserver {
 public:
  virtual ~StepObserver() = default;
  /// After the update of sub-step "enc", "gen", "rec" or "dis".
  virtual void on_substep(std::string_view /*name*/, const TrainState& /*state*/) {}
  virtual void on_discriminator_inputs(std::int64_t /*real*/, std::int64_t /*generated*/,
                                       std::int64_t /*reconstructed*/) {}
  /// `source` is "real" for dataset images.
  virtual void on_recognizer_inputs(std::string_view /*source*/, std::int64_t /*count*/) {}
};

struct StepOptions {
  bool enc = true;
  bool gen = true;
  bool rec = true;
  bool dis = true;
  StepObserver* observer = nullptr;
};

/// Encoder, generator, recognizer, discriminator updates, in that order,
/// each with a fresh forward pass. Throws NumericError listing every loss
/// component computed so far when one is not finite.
LossReport train_step(TrainState& state, const Batch& batch, const AttributePool& pool, const StepOptions& options = {});

struct EvalOptions {
  bool identity_edit = false;  // keep c unchanged instead of switching classes
  std::int64_t batch_size = 50;
};

struct EvalMetrics {
  double recog_accuracy = 0;
  double edit_fidelity = 0;
  double preservation = 0;
  double recon_error = 0;
};

/// Held-out metrics in eval mode. Edits use z = mu and overwrite one
/// attribute group with every other class of that group.
EvalMetrics evaluate(const Model& model, const ParamStore<float>& params, const std::vector<Sample>& heldout,
                     const EvalOptions& options = {});

struct RunOptions {
  std::string out_dir;
  std::optional<std::string> resume;  // checkpoint path
  std::function<void(const std::string&)> log;
};

struct RunResult {
  Checkpoint final;
  std::vector<LossReport> reports;  // steps run by this call
  std::optional<EvalMetrics> eval;  // last evaluation
};

/// Writes metrics.log (one JSON record per step), timing.log, eval.log,
/// step_NNNNNN.ckpt every checkpoint_every steps, final.ckpt and, when
/// sample_every is set, samples/step_NNNNNN.png.
RunResult run(const TrainConfig& config, const DatasetSplit& data, const RunOptions& options);

std::string metrics_record(std::int64_t step, const LossReport& r);

}  // namespace vigan
