// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/optimizer.hpp"

#include <cmath>

namespace vigan {

template <class T>
AdamState<T> make_adam(std::string ns, AdamConfig config, const ParamStore<T>& params) {
  if (!(config.lr > 0) || !(config.beta1 >= 0 && config.beta1 < 1) || !(config.beta2 >= 0 && config.beta2 < 1) ||
      !(config.eps > 0) || !(config.clip_norm >= 0))
    throw std::invalid_argument("invalid Adam hyperparameters for " + ns);
  AdamState<T> s;
  s.ns = std::move(ns);
  s.config = config;
  for (const auto& name : params.param_names(s.ns)) {
    const auto& shape = params.param(name).shape();
    s.m.emplace(name, Tensor<T>::zeros(shape));
    s.v.emplace(name, Tensor<T>::zeros(shape));
  }
  return s;
}

template <class T>
void adam_step(ParamStore<T>& params, const std::map<std::string, Tensor<T>>& grads, AdamState<T>& state) {
  if (grads.size() != state.m.size())
    throw std::invalid_argument("adam " + state.ns + ": got " + std::to_string(grads.size()) + " gradients for " +
                                std::to_string(state.m.size()) + " parameters");
  double sq_norm = 0;
  for (const auto& [name, g] : grads) {
    auto it = state.m.find(name);
    if (it == state.m.end()) throw std::invalid_argument("adam " + state.ns + ": unexpected gradient for " + name);
    if (g.shape() != it->second.shape()) throw ShapeError("adam: gradient shape mismatch for " + name);
    for (T v : g.data()) {
      if (!std::isfinite(v)) throw NumericError("adam " + state.ns + ": non-finite gradient for " + name);
      sq_norm += static_cast<double>(v) * static_cast<double>(v);
    }
  }
  const auto& c = state.config;
  double clip = 1.0;
  if (c.clip_norm > 0) {
    const double norm = std::sqrt(sq_norm);
    if (norm > c.clip_norm) clip = c.clip_norm / norm;
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (const auto& [name, g] : grads) {
    auto& theta = params.params.at(name);
    auto& m = state.m.at(name);
    auto& v = state.v.at(name);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = static_cast<double>(g[i]) * clip;
      const double mi = c.beta1 * static_cast<double>(m[i]) + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * static_cast<double>(v[i]) + (1.0 - c.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = static_cast<double>(m[i]) / bc1;
      const double v_hat = static_cast<double>(v[i]) / bc2;
      theta[i] = static_cast<T>(static_cast<double>(theta[i]) - c.lr * m_hat / (std::sqrt(v_hat) + c.eps));
    }
  }
}

template <class T>
Optimizers<T> make_optimizers(const OptimizerConfig& config, const ParamStore<T>& params) {
  return {make_adam<T>("enc/", config.enc, params), make_adam<T>("gen/", config.gen, params),
          make_adam<T>("rec/", config.rec, params), make_adam<T>("dis/", config.dis, params)};
}

template AdamState<float> make_adam<float>(std::string, AdamConfig, const ParamStore<float>&);
template AdamState<double> make_adam<double>(std::string, AdamConfig, const ParamStore<double>&);
template void adam_step<float>(ParamStore<float>&, const std::map<std::string, Tensor<float>>&, AdamState<float>&);
template void adam_step<double>(ParamStore<double>&, const std::map<std::string, Tensor<double>>&,
                                AdamState<double>&);
template Optimizers<float> make_optimizers<float>(const OptimizerConfig&, const ParamStore<float>&);
template Optimizers<double> make_optimizers<double>(const OptimizerConfig&, const ParamStore<double>&);

}  // namespace vigan
