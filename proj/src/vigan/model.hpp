// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

// The four networks: encoder q(z|x), generator G(z, c), discriminator D(x)
// and recognizer Q(c|x). The discriminator and recognizer share one
// convolutional trunk and differ only in their heads.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vigan/layers.hpp"

namespace vigan {

/// Contiguous attribute indices that encode one categorical choice.
struct AttributeGroup {
  std::string name;
  std::int64_t offset = 0;
  std::int64_t size = 0;

  friend bool operator==(const AttributeGroup&, const AttributeGroup&) = default;
};

struct ModelConfig {
  std::int64_t image_size = 32;
  std::int64_t channels = 1;
  std::int64_t z_dim = 32;
  std::int64_t c_dim = 8;
  std::vector<std::int64_t> conv_channels{16, 32, 64};  // encoder and critic trunk
  std::int64_t enc_hidden = 128;
  std::int64_t gen_base_channels = 64;  // width of the 4x4 grid the generator starts from
  std::vector<std::int64_t> deconv_channels{32, 16};  // hidden deconvs; a final one maps to `channels`
  std::int64_t rec_hidden = 128;
  double leaky_slope = 0.2;
  double logvar_min = -8.0;
  double logvar_max = 8.0;
  std::vector<AttributeGroup> groups;

  /// 64x64 layout: z 256, convs 64/128/256, deconvs 256/128/64.
  static ModelConfig full_scale(std::int64_t channels, std::int64_t c_dim);
  /// 32x32 single-channel layout used for CPU training.
  static ModelConfig desk_scale();

  void validate() const;
  std::int64_t feature_dim() const;
  std::int64_t trunk_grid() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Two one-hot groups "slot1" and "slot2" of `classes` each.
std::vector<AttributeGroup> two_slot_groups(std::int64_t classes);

inline constexpr double kProbEps = 1e-7;

struct Model {
  ModelConfig config;
  NetworkSpec encoder;     // enc: conv stack + hidden FC
  NetworkSpec enc_mu;      // enc/mu head
  NetworkSpec enc_logvar;  // enc/logvar head
  NetworkSpec generator;   // gen
  NetworkSpec trunk;       // dis/trunk, shared with the recognizer
  NetworkSpec dis_head;    // dis/out
  NetworkSpec rec_head;    // rec

  explicit Model(ModelConfig cfg);

  std::vector<NetworkSpec> networks() const;
  template <class T>
  ParamStore<T> init(std::uint64_t seed) const {
    return init_params<T>(networks(), seed);
  }
};

template <class T>
struct EncoderOutput {
  Var<T> mu;
  Var<T> logvar;  // log sigma^2, clamped
};

template <class T>
struct CriticOutput {
  Var<T> features;  // flattened trunk activations [B, feature_dim]
  Var<T> p_real;    // [B, 1], clamped to (eps, 1 - eps)
  Var<T> q;         // [B, c_dim], clamped to (eps, 1 - eps)
};

template <class T>
EncoderOutput<T> encode(Forward<T>& f, const Model& m, const Var<T>& x);

/// z = mu + exp(logvar / 2) * eps
template <class T>
Var<T> reparameterize(const EncoderOutput<T>& out, const Var<T>& eps);

template <class T>
Var<T> generate(Forward<T>& f, const Model& m, const Var<T>& z, const Var<T>& c);

template <class T>
Var<T> critic_trunk(Forward<T>& f, const Model& m, const Var<T>& x);
template <class T>
Var<T> discriminator_head(Forward<T>& f, const Model& m, const Var<T>& features);
template <class T>
Var<T> recognizer_head(Forward<T>& f, const Model& m, const Var<T>& features);

/// Trunk evaluated once, both heads on top of the same activations.
template <class T>
CriticOutput<T> critic(Forward<T>& f, const Model& m, const Var<T>& x);

/// Discriminator only: p_real and features, q left empty.
template <class T>
CriticOutput<T> discriminate(Forward<T>& f, const Model& m, const Var<T>& x);

template <class T>
Var<T> recognize(Forward<T>& f, const Model& m, const Var<T>& x);

}  // namespace vigan
