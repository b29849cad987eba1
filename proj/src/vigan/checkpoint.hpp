// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoint: "VIGN", u32 version, u64 header length, JSON header,
// little-endian f32 tensor payload, CRC32 of everything before it.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vigan/config.hpp"
#include "vigan/optimizer.hpp"

namespace vigan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointCorrupt : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointConfigMismatch : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct Checkpoint {
  TrainConfig config;
  ParamStore<float> params;
  Optimizers<float> optim;
  std::int64_t step = 0;
  std::string rng_state;  // textual engine state
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes to a temporary file first, then renames over `path`.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Throws CheckpointConfigMismatch naming the field when `config` cannot
/// continue the run stored in `ckpt`.
void check_resumable(const Checkpoint& ckpt, const TrainConfig& config);

}  // namespace vigan
