// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "vigan/layers.hpp"

namespace vigan {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // global-norm clip, 0 disables

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Adam moments for every trainable parameter under one namespace.
template <class T>
struct AdamState {
  std::string ns;  // e.g. "enc/"
  AdamConfig config;
  std::int64_t t = 0;
  std::map<std::string, Tensor<T>> m;
  std::map<std::string, Tensor<T>> v;
};

template <class T>
AdamState<T> make_adam(std::string ns, AdamConfig config, const ParamStore<T>& params);

/// One bias-corrected Adam update. `grads` must cover exactly the
/// trainable parameters of state.ns; a non-finite gradient rejects the whole
/// step before any parameter changes.
template <class T>
void adam_step(ParamStore<T>& params, const std::map<std::string, Tensor<T>>& grads, AdamState<T>& state);

struct OptimizerConfig {
  AdamConfig enc{0.001};
  AdamConfig gen{0.001};
  AdamConfig dis{0.0002};
  AdamConfig rec{0.0002};

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

template <class T>
struct Optimizers {
  AdamState<T> enc;
  AdamState<T> gen;
  AdamState<T> rec;
  AdamState<T> dis;
};

template <class T>
Optimizers<T> make_optimizers(const OptimizerConfig& config, const ParamStore<T>& params);

}  // namespace vigan
