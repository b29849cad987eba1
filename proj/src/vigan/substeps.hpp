// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

// The four minimized objectives as tape graphs. The trainer evaluates them
// in f32; the gradient checker evaluates the same graphs in f64.

#pragma once

#include "vigan/objectives.hpp"

namespace vigan {

template <class T>
struct SubstepInputs {
  Tensor<T> images;      // [B, C, H, W]
  Tensor<T> attributes;  // [B, c_dim]
  Tensor<T> eps;         // [B, z_dim] reparameterization noise
  Tensor<T> prior_z;     // [B, z_dim], generation path
  Tensor<T> prior_c;     // [B, c_dim], generation path
};

/// Example counts seen by the recognizer and discriminator objectives.
struct SubstepTrace {
  std::int64_t rec_real = 0;
  std::int64_t dis_real = 0;
  std::int64_t dis_generated = 0;
  std::int64_t dis_reconstructed = 0;
};

/// Prior term plus feature reconstruction; gradients reach enc/ through the
/// generator and critic trunk.
template <class T>
Var<T> encoder_objective(Forward<T>& f, const Model& m, const SubstepInputs<T>& in, LossReport& report);

/// Reconstruction path from a detached encoder sample plus generation path
/// from the prior.
template <class T>
Var<T> generator_objective(Forward<T>& f, const Model& m, const SubstepInputs<T>& in, const LossWeights& w,
                           LossReport& report);

/// Recognition of real images; trunk activations enter as constants.
template <class T>
Var<T> recognizer_objective(Forward<T>& f, const Model& m, const SubstepInputs<T>& in, LossReport& report,
                            SubstepTrace* trace = nullptr);

/// Real, generated and reconstructed sets, each of batch size; fakes are
/// constants.
template <class T>
Var<T> discriminator_objective(Forward<T>& f, const Model& m, const SubstepInputs<T>& in, LossReport& report,
                               SubstepTrace* trace = nullptr);

}  // namespace vigan
