// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vigan/ops.hpp"

namespace vigan {

/// Trainable parameters plus persistent per-layer state (batchnorm running
/// statistics). Names are slash-delimited paths such as "enc/conv1/w";
/// std::map keeps iteration lexicographic.
template <class T>
struct ParamStore {
  std::map<std::string, Tensor<T>> params;
  std::map<std::string, Tensor<T>> state;

  const Tensor<T>& param(const std::string& name) const;
  const Tensor<T>& stat(const std::string& name) const;
  std::vector<std::string> param_names(const std::string& prefix = "") const;
  std::int64_t count(const std::string& prefix = "") const;

  template <class U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [k, v] : params) out.params.emplace(k, v.template cast<U>());
    for (const auto& [k, v] : state) out.state.emplace(k, v.template cast<U>());
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.params == b.params && a.state == b.state;
  }
};

class MissingParameter : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

enum class LayerKind { Dense, Conv, Deconv, BatchNorm, Activation };

/// One row of an architecture table, e.g. "4 x 4 x 128 conv, stride 2,
/// leaky relu, batchnorm". Normalization, when present, sits between the
/// linear map and the activation.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Dense;
  std::int64_t out = 0;  // output features or channels
  std::int64_t kernel = 4;
  std::int64_t stride = 2;
  std::int64_t pad = 1;
  Shape out_shape;  // dense only: per-sample reshape of the output, e.g. {448, 4, 4}
  bool batchnorm = false;
  Activation act;
};

/// A named stack of layers applied to per-sample inputs of `input_shape`.
struct NetworkSpec {
  std::string ns;  // "enc/gen/..." style prefix, without trailing slash
  Shape input_shape;
  std::vector<LayerSpec> layers;
};

void validate(const LayerSpec& spec);

/// Per-sample output shape of each layer, starting from `input`.
Shape layer_output_shape(const LayerSpec& spec, const Shape& input);
Shape network_output_shape(const NetworkSpec& net);
std::int64_t param_count(const NetworkSpec& net);

/// Weights ~ N(0, 0.02^2) truncated at two standard deviations, zero biases,
/// unit batchnorm scale, zero shift, running mean 0 and variance 1. Each
/// tensor draws from its own stream derived from (seed, name).
template <class T>
ParamStore<T> init_params(const std::vector<NetworkSpec>& nets, std::uint64_t seed);

enum class Mode { Train, Eval };

struct BatchNormConfig {
  double momentum = 0.9;
  double eps = 1e-5;
};

/// Binds parameters of a store onto a tape for one forward computation.
/// In train mode batchnorm uses batch statistics; running statistics are
/// written to `stats_sink` for layers whose name matches one of the
/// configured prefixes.
template <class T>
class Forward {
 public:
  Forward(Tape<T>& tape, const ParamStore<T>& params, Mode mode, BatchNormConfig bn = {})
      : tape_(tape), params_(params), mode_(mode), bn_(bn) {}

  Var<T> param(const std::string& name);
  Tape<T>& tape() { return tape_; }
  const ParamStore<T>& params() const { return params_; }
  Mode mode() const { return mode_; }
  const BatchNormConfig& bn() const { return bn_; }
  const std::map<std::string, NodeId>& bound() const { return bound_; }

  void record_stats_into(ParamStore<T>* sink, std::vector<std::string> prefixes) {
    sink_ = sink;
    sink_prefixes_ = std::move(prefixes);
  }
  void update_running_stats(const std::string& layer, const std::vector<T>& mean, const std::vector<T>& var);

 private:
  Tape<T>& tape_;
  const ParamStore<T>& params_;
  Mode mode_;
  BatchNormConfig bn_;
  std::map<std::string, NodeId> bound_;
  ParamStore<T>* sink_ = nullptr;
  std::vector<std::string> sink_prefixes_;
};

/// Gradients of every trainable parameter under `prefix`; parameters that
/// were not used in the forward get zeros.
template <class T>
std::map<std::string, Tensor<T>> param_grads(const Forward<T>& fwd, const Gradients<T>& grads,
                                             const std::string& prefix);

template <class T>
Var<T> dense_forward(Forward<T>& f, const Var<T>& x, const std::string& name);
template <class T>
Var<T> batchnorm_forward(Forward<T>& f, const Var<T>& x, const std::string& name);
template <class T>
Var<T> layer_forward(Forward<T>& f, const Var<T>& x, const LayerSpec& spec, const std::string& ns);
/// x carries a leading batch axis in front of net.input_shape.
template <class T>
Var<T> sequential_forward(Forward<T>& f, const Var<T>& x, const NetworkSpec& net);

extern template struct ParamStore<float>;
extern template struct ParamStore<double>;
extern template class Forward<float>;
extern template class Forward<double>;

}  // namespace vigan
