// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

// Eval-mode forward passes on plain tensors. Batchnorm uses running
// statistics, so results do not depend on how inputs are batched.

#pragma once

#include "vigan/model.hpp"

namespace vigan {

struct Encoded {
  Tensor<float> mu;      // [B, z_dim]
  Tensor<float> logvar;  // [B, z_dim]
};

Encoded encode_images(const Model& model, const ParamStore<float>& params, const Tensor<float>& images);
Tensor<float> generate_images(const Model& model, const ParamStore<float>& params, const Tensor<float>& z,
                              const Tensor<float>& c);
/// Recognizer probabilities [B, c_dim].
Tensor<float> recognize_images(const Model& model, const ParamStore<float>& params, const Tensor<float>& images);

/// Throws std::invalid_argument when `params` lacks a tensor the model
/// needs, has an extra one, or a shape differs.
void check_param_layout(const Model& model, const ParamStore<float>& params);

/// Rows [begin, end) of a tensor along axis 0.
Tensor<float> slice_rows(const Tensor<float>& t, std::int64_t begin, std::int64_t end);

/// Index of the largest of v[offset .. offset + size).
std::int64_t argmax(std::span<const float> v, std::int64_t offset, std::int64_t size);

}  // namespace vigan
