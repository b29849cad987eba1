// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/model.hpp"

#include <cmath>

namespace vigan {

namespace {

LayerSpec conv_row(std::string name, std::int64_t out, bool bn, double slope) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::Conv;
  s.out = out;
  s.batchnorm = bn;
  s.act = {ActivationKind::LeakyRelu, slope};
  return s;
}

LayerSpec dense_row(std::string name, std::int64_t out, bool bn, Activation act) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::Dense;
  s.out = out;
  s.batchnorm = bn;
  s.act = act;
  return s;
}

template <class T>
void check_image(const Model& m, const Var<T>& x, const char* who) {
  const auto& c = m.config;
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != c.channels || s[2] != c.image_size || s[3] != c.image_size) {
    throw ShapeError(std::string(who) + ": wrong image shape " + to_string(s) + ", expected [B," +
                     std::to_string(c.channels) + "," + std::to_string(c.image_size) + "," +
                     std::to_string(c.image_size) + "]");
  }
}

template <class T>
Var<T> probability(const Var<T>& logits) {
  return clamp(sigmoid(logits), kProbEps, 1.0 - kProbEps);
}

}  // namespace

ModelConfig ModelConfig::full_scale(std::int64_t channels, std::int64_t c_dim) {
  ModelConfig c;
  c.image_size = 64;
  c.channels = channels;
  c.z_dim = 256;
  c.c_dim = c_dim;
  c.conv_channels = {64, 128, 256};
  c.enc_hidden = 512;
  c.gen_base_channels = 448;
  c.deconv_channels = {256, 128, 64};
  c.rec_hidden = 128;
  return c;
}

ModelConfig ModelConfig::desk_scale() {
  ModelConfig c;
  c.groups = two_slot_groups(4);
  return c;
}

std::vector<AttributeGroup> two_slot_groups(std::int64_t classes) {
  return {{"slot1", 0, classes}, {"slot2", classes, classes}};
}

void ModelConfig::validate() const {
  auto bad = [](const std::string& why) { throw std::invalid_argument("model config: " + why); };
  if (z_dim < 1 || c_dim < 1) bad("z_dim and c_dim must be >= 1");
  if (channels != 1 && channels != 3) bad("channels must be 1 or 3");
  if (conv_channels.empty()) bad("at least one conv layer is required");
  for (auto w : conv_channels)
    if (w < 1) bad("conv widths must be positive");
  for (auto w : deconv_channels)
    if (w < 1) bad("deconv widths must be positive");
  if (enc_hidden < 1 || gen_base_channels < 1 || rec_hidden < 1) bad("layer widths must be positive");
  const std::int64_t down = std::int64_t{1} << conv_channels.size();
  if (image_size < down || image_size % down != 0)
    bad("image_size " + std::to_string(image_size) + " is not a multiple of 2^" +
        std::to_string(conv_channels.size()));
  const std::int64_t up = 4 * (std::int64_t{1} << (deconv_channels.size() + 1));
  if (up != image_size) bad("generator upsamples 4x4 to " + std::to_string(up) + ", not " + std::to_string(image_size));
  if (!std::isfinite(leaky_slope) || leaky_slope < 0) bad("leaky_slope must be finite and non-negative");
  if (!(logvar_min < logvar_max)) bad("logvar_min must be below logvar_max");
  std::vector<bool> used(static_cast<std::size_t>(c_dim), false);
  for (const auto& g : groups) {
    if (g.name.empty() || g.size < 2 || g.offset < 0 || g.offset + g.size > c_dim)
      bad("attribute group '" + g.name + "' out of range");
    for (std::int64_t i = g.offset; i < g.offset + g.size; ++i) {
      if (used[i]) bad("attribute groups overlap at index " + std::to_string(i));
      used[i] = true;
    }
  }
}

std::int64_t ModelConfig::trunk_grid() const { return image_size >> conv_channels.size(); }

std::int64_t ModelConfig::feature_dim() const { return conv_channels.back() * trunk_grid() * trunk_grid(); }

Model::Model(ModelConfig cfg) : config(std::move(cfg)) {
  config.validate();
  const auto& c = config;
  const double a = c.leaky_slope;

  auto conv_stack = [&](NetworkSpec& net) {
    net.input_shape = {c.channels, c.image_size, c.image_size};
    for (std::size_t i = 0; i < c.conv_channels.size(); ++i)
      net.layers.push_back(conv_row("conv" + std::to_string(i + 1), c.conv_channels[i], i > 0, a));
  };

  encoder.ns = "enc";
  conv_stack(encoder);
  encoder.layers.push_back(dense_row("fc", c.enc_hidden, true, {ActivationKind::LeakyRelu, a}));

  enc_mu.ns = "enc";
  enc_mu.input_shape = {c.enc_hidden};
  enc_mu.layers.push_back(dense_row("mu", c.z_dim, false, {}));
  enc_logvar.ns = "enc";
  enc_logvar.input_shape = {c.enc_hidden};
  enc_logvar.layers.push_back(dense_row("logvar", c.z_dim, false, {}));

  generator.ns = "gen";
  generator.input_shape = {c.z_dim + c.c_dim};
  LayerSpec fc = dense_row("fc", c.gen_base_channels * 16, true, {ActivationKind::Relu});
  fc.out_shape = {c.gen_base_channels, 4, 4};
  generator.layers.push_back(fc);
  for (std::size_t i = 0; i < c.deconv_channels.size(); ++i) {
    LayerSpec d;
    d.name = "deconv" + std::to_string(i + 1);
    d.kind = LayerKind::Deconv;
    d.out = c.deconv_channels[i];
    d.batchnorm = i == 0;
    d.act = {ActivationKind::Relu};
    generator.layers.push_back(d);
  }
  LayerSpec last;
  last.name = "deconv" + std::to_string(c.deconv_channels.size() + 1);
  last.kind = LayerKind::Deconv;
  last.out = c.channels;
  last.act = {ActivationKind::Tanh};
  generator.layers.push_back(last);

  trunk.ns = "dis/trunk";
  conv_stack(trunk);

  dis_head.ns = "dis";
  dis_head.input_shape = {c.feature_dim()};
  dis_head.layers.push_back(dense_row("out", 1, false, {}));

  rec_head.ns = "rec";
  rec_head.input_shape = {c.feature_dim()};
  rec_head.layers.push_back(dense_row("fc", c.rec_hidden, true, {ActivationKind::LeakyRelu, a}));
  rec_head.layers.push_back(dense_row("out", c.c_dim, false, {}));
}

std::vector<NetworkSpec> Model::networks() const {
  return {encoder, enc_mu, enc_logvar, generator, trunk, dis_head, rec_head};
}

template <class T>
EncoderOutput<T> encode(Forward<T>& f, const Model& m, const Var<T>& x) {
  check_image(m, x, "encode");
  Var<T> h = sequential_forward(f, x, m.encoder);
  Var<T> mu = sequential_forward(f, h, m.enc_mu);
  Var<T> logvar = clamp(sequential_forward(f, h, m.enc_logvar), m.config.logvar_min, m.config.logvar_max);
  return {mu, logvar};
}

template <class T>
Var<T> reparameterize(const EncoderOutput<T>& out, const Var<T>& eps) {
  return add(out.mu, mul(exp(scale(out.logvar, 0.5)), eps));
}

template <class T>
Var<T> generate(Forward<T>& f, const Model& m, const Var<T>& z, const Var<T>& c) {
  const auto& cfg = m.config;
  if (z.shape().size() != 2 || z.shape()[1] != cfg.z_dim || c.shape().size() != 2 || c.shape()[1] != cfg.c_dim ||
      z.shape()[0] != c.shape()[0]) {
    throw ShapeError("generate: z " + to_string(z.shape()) + " and c " + to_string(c.shape()) +
                     " do not match z_dim " + std::to_string(cfg.z_dim) + ", c_dim " + std::to_string(cfg.c_dim));
  }
  return sequential_forward(f, concat(z, c, 1), m.generator);
}

template <class T>
Var<T> critic_trunk(Forward<T>& f, const Model& m, const Var<T>& x) {
  check_image(m, x, "critic");
  return flatten(sequential_forward(f, x, m.trunk));
}

template <class T>
Var<T> discriminator_head(Forward<T>& f, const Model& m, const Var<T>& features) {
  return probability(sequential_forward(f, features, m.dis_head));
}

template <class T>
Var<T> recognizer_head(Forward<T>& f, const Model& m, const Var<T>& features) {
  return probability(sequential_forward(f, features, m.rec_head));
}

template <class T>
CriticOutput<T> critic(Forward<T>& f, const Model& m, const Var<T>& x) {
  Var<T> feats = critic_trunk(f, m, x);
  return {feats, discriminator_head(f, m, feats), recognizer_head(f, m, feats)};
}

template <class T>
CriticOutput<T> discriminate(Forward<T>& f, const Model& m, const Var<T>& x) {
  Var<T> feats = critic_trunk(f, m, x);
  return {feats, discriminator_head(f, m, feats), {}};
}

template <class T>
Var<T> recognize(Forward<T>& f, const Model& m, const Var<T>& x) {
  return recognizer_head(f, m, critic_trunk(f, m, x));
}

#define VIGAN_INSTANTIATE(T)                                                                   \
  template EncoderOutput<T> encode<T>(Forward<T>&, const Model&, const Var<T>&);              \
  template Var<T> reparameterize<T>(const EncoderOutput<T>&, const Var<T>&);                  \
  template Var<T> generate<T>(Forward<T>&, const Model&, const Var<T>&, const Var<T>&);       \
  template Var<T> critic_trunk<T>(Forward<T>&, const Model&, const Var<T>&);                  \
  template Var<T> discriminator_head<T>(Forward<T>&, const Model&, const Var<T>&);            \
  template Var<T> recognizer_head<T>(Forward<T>&, const Model&, const Var<T>&);               \
  template CriticOutput<T> critic<T>(Forward<T>&, const Model&, const Var<T>&);               \
  template CriticOutput<T> discriminate<T>(Forward<T>&, const Model&, const Var<T>&);         \
  template Var<T> recognize<T>(Forward<T>&, const Model&, const Var<T>&);

VIGAN_INSTANTIATE(float)
VIGAN_INSTANTIATE(double)

#undef VIGAN_INSTANTIATE

}  // namespace vigan
