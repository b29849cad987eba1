// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/editing.hpp"

#include <charconv>
#include <cmath>
#include <random>

#include "vigan/image_codec.hpp"
#include "vigan/inference.hpp"

namespace vigan {

using nlohmann::json;

namespace {

Tensor<float> batch_of_one(const Tensor<float>& image) {
  Shape s{1};
  s.insert(s.end(), image.shape().begin(), image.shape().end());
  return image.reshaped(s);
}

Tensor<float> row_tensor(const std::vector<float>& v) {
  return Tensor<float>({1, static_cast<std::int64_t>(v.size())}, v);
}

Tensor<float> first_image(const Tensor<float>& batch) {
  return batch.reshaped(Shape(batch.shape().begin() + 1, batch.shape().end()));
}

const AttributeGroup* group_of(const ModelConfig& cfg, std::int64_t index) {
  for (const auto& g : cfg.groups)
    if (index >= g.offset && index < g.offset + g.size) return &g;
  return nullptr;
}

std::optional<std::int64_t> parse_index(const std::string& key) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), v);
  if (ec != std::errc() || ptr != key.data() + key.size()) return std::nullopt;
  return v;
}

}  // namespace

LoadedModel::LoadedModel(const Checkpoint& ckpt, bool load_data)
    : config(ckpt.config), model(ckpt.config.model), params(ckpt.params), step(ckpt.step) {
  check_param_layout(model, params);
  if (!load_data) return;
  try {
    data = load_dataset(config.dataset, config.model.image_size, config.model.channels);
    pool = attribute_pool(data->train);
  } catch (const std::exception& e) {
    data.reset();
    data_error = e.what();
  }
}

std::int64_t LoadedModel::dataset_size() const {
  return data ? static_cast<std::int64_t>(data->train.size() + data->heldout.size()) : 0;
}

const Sample& LoadedModel::dataset_sample(std::int64_t index) const {
  if (!data) throw EditError("dataset unavailable: " + data_error);
  if (index < 0 || index >= dataset_size())
    throw EditError("dataset index " + std::to_string(index) + " out of range [0, " + std::to_string(dataset_size()) +
                    ")");
  const auto i = static_cast<std::size_t>(index);
  return i < data->train.size() ? data->train[i] : data->heldout[i - data->train.size()];
}

std::shared_ptr<const LoadedModel> load_model(const std::string& ckpt_path, bool load_data) {
  return std::make_shared<const LoadedModel>(load_checkpoint(ckpt_path), load_data);
}

json model_info(const LoadedModel& m) {
  const auto& cfg = m.config.model;
  json groups = json::array();
  for (const auto& g : cfg.groups) groups.push_back({{"name", g.name}, {"offset", g.offset}, {"size", g.size}});
  json attributes = json::array();
  for (std::int64_t i = 0; i < cfg.c_dim; ++i) {
    const AttributeGroup* g = group_of(cfg, i);
    if (g) {
      attributes.push_back({{"index", i},
                            {"name", g->name + "=" + std::to_string(i - g->offset)},
                            {"group", g->name},
                            {"kind", "one_hot"}});
    } else {
      attributes.push_back({{"index", i}, {"name", "a_" + std::to_string(i)}, {"group", nullptr}, {"kind", "binary"}});
    }
  }
  return {{"image_size", cfg.image_size},
          {"channels", cfg.channels},
          {"z_dim", cfg.z_dim},
          {"c_dim", cfg.c_dim},
          {"step", m.step},
          {"groups", groups},
          {"attributes", attributes},
          {"dataset_size", m.dataset_size()}};
}

Tensor<float> prepare_image(const LoadedModel& m, std::span<const std::uint8_t> png) {
  return crop_and_resize(decode_png(png, m.config.model.channels), m.config.model.image_size);
}

EncodeResult encode_image(const LoadedModel& m, const Tensor<float>& image) {
  const Tensor<float> x = batch_of_one(image);
  const Encoded e = encode_images(m.model, m.params, x);
  const Tensor<float> q = recognize_images(m.model, m.params, x);
  return {e.mu.vec(), e.logvar.vec(), q.vec()};
}

Tensor<float> generate_image(const LoadedModel& m, const std::vector<float>& c,
                             const std::optional<std::vector<float>>& z, std::optional<std::uint64_t> seed) {
  const auto& cfg = m.config.model;
  if (static_cast<std::int64_t>(c.size()) != cfg.c_dim)
    throw EditError("c has " + std::to_string(c.size()) + " entries, model c_dim is " + std::to_string(cfg.c_dim));
  for (float v : c)
    if (!(v >= 0.0f && v <= 1.0f)) throw EditError("attribute values must lie in [0, 1]");
  std::vector<float> zv;
  if (z) {
    if (static_cast<std::int64_t>(z->size()) != cfg.z_dim)
      throw EditError("z has " + std::to_string(z->size()) + " entries, model z_dim is " + std::to_string(cfg.z_dim));
    for (float v : *z)
      if (!std::isfinite(v)) throw EditError("z must be finite");
    zv = *z;
  } else {
    Rng rng(seed ? *seed : (static_cast<std::uint64_t>(std::random_device{}()) << 32 | std::random_device{}()));
    zv.resize(static_cast<std::size_t>(cfg.z_dim));
    fill_normal<float>(rng, zv);
  }
  return first_image(generate_images(m.model, m.params, row_tensor(zv), row_tensor(c)));
}

Tensor<float> sample_grid(const LoadedModel& m, std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw EditError("sample count must be >= 1");
  if (m.pool.empty()) throw EditError("sampling needs the training attribute pool; dataset unavailable: " + m.data_error);
  Rng rng(seed);
  const PriorSample p = sample_prior(n, m.config.model.z_dim, m.pool, rng);
  return tile_grid(generate_images(m.model, m.params, p.z, p.c));
}

std::vector<float> apply_assignments(const ModelConfig& cfg, std::vector<float> c,
                                     const std::vector<std::pair<std::string, double>>& set) {
  std::vector<const AttributeGroup*> touched;
  std::vector<std::pair<const AttributeGroup*, std::int64_t>> selected;
  auto select = [&](const AttributeGroup& g, std::int64_t cls) {
    for (const auto& [sg, scls] : selected)
      if (sg == &g && scls != cls) throw EditError("conflicting selections in group '" + g.name + "'");
    selected.emplace_back(&g, cls);
    for (std::int64_t i = 0; i < g.size; ++i) c[g.offset + i] = i == cls ? 1.0f : 0.0f;
  };
  for (const auto& [key, value] : set) {
    if (!std::isfinite(value)) throw EditError("value for '" + key + "' is not finite");
    if (auto index = parse_index(key)) {
      if (*index < 0 || *index >= cfg.c_dim)
        throw EditError("attribute index " + key + " out of range [0, " + std::to_string(cfg.c_dim) + ")");
      if (value < 0.0 || value > 1.0) throw EditError("value " + std::to_string(value) + " for attribute " + key +
                                                      " outside [0, 1]");
      if (const AttributeGroup* g = group_of(cfg, *index)) {
        if (value == 1.0) {
          select(*g, *index - g->offset);
        } else if (value == 0.0) {
          c[*index] = 0.0f;
          touched.push_back(g);
        } else {
          throw EditError("attribute " + key + " belongs to one-hot group '" + g->name + "' and accepts only 0 or 1");
        }
      } else {
        c[*index] = static_cast<float>(value);
      }
      continue;
    }
    const AttributeGroup* g = nullptr;
    for (const auto& cand : cfg.groups)
      if (cand.name == key) g = &cand;
    if (!g) throw EditError("unknown attribute group '" + key + "'");
    if (value != std::floor(value) || value < 0 || value >= static_cast<double>(g->size))
      throw EditError("class " + std::to_string(value) + " does not exist in group '" + key + "' (0.." +
                      std::to_string(g->size - 1) + ")");
    select(*g, static_cast<std::int64_t>(value));
  }
  for (const AttributeGroup* g : touched) {
    int ones = 0;
    for (std::int64_t i = 0; i < g->size; ++i) ones += c[g->offset + i] == 1.0f;
    if (ones != 1) throw EditError("group '" + g->name + "' must keep exactly one active class");
  }
  return c;
}

EditResult edit(const LoadedModel& m, const EditRequest& req) {
  const auto& cfg = m.config.model;
  if (req.image.has_value() == req.dataset_index.has_value())
    throw EditError("an edit needs exactly one of an image or a dataset index");
  EditResult out;
  if (req.dataset_index) {
    const Sample& s = m.dataset_sample(*req.dataset_index);
    out.original = s.image;
    out.c_base = s.attributes;
  } else {
    out.original = *req.image;
    if (out.original.shape() != Shape{cfg.channels, cfg.image_size, cfg.image_size})
      throw EditError("image shape " + to_string(out.original.shape()) + " does not match the model input");
    // Recognized attributes, with each one-hot group snapped to its argmax.
    out.c_base = encode_image(m, out.original).c_hat;
    for (const auto& g : cfg.groups) {
      const std::int64_t k = argmax(out.c_base, g.offset, g.size);
      for (std::int64_t i = 0; i < g.size; ++i) out.c_base[g.offset + i] = i == k ? 1.0f : 0.0f;
    }
  }
  out.c_effective = apply_assignments(cfg, out.c_base, req.set);

  const Encoded e = encode_images(m.model, m.params, batch_of_one(out.original));
  Tensor<float> z = e.mu;
  if (req.seed) {
    Rng rng(*req.seed);
    std::vector<float> eps(z.size());
    fill_normal<float>(rng, eps);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += std::exp(0.5f * e.logvar[i]) * eps[i];
  }
  out.reconstruction = first_image(generate_images(m.model, m.params, z, row_tensor(out.c_base)));
  out.edited = first_image(generate_images(m.model, m.params, z, row_tensor(out.c_effective)));
  return out;
}

Tensor<float> EditResult::triptych() const {
  const Shape& s = original.shape();
  std::vector<float> all;
  for (const auto* t : {&original, &reconstruction, &edited}) all.insert(all.end(), t->data().begin(), t->data().end());
  return tile_grid(Tensor<float>({3, s[0], s[1], s[2]}, std::move(all)), 2, 3);
}

std::pair<std::string, double> parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size())
    throw EditError("expected KEY=VALUE, got '" + text + "'");
  const std::string value = text.substr(eq + 1);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) throw EditError("value '" + value + "' in '" + text + "' is not a number");
  return {text.substr(0, eq), v};
}

}  // namespace vigan
