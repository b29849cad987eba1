// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace vigan {

using nlohmann::json;

namespace {

// Reads fields from one JSON object, remembering which keys were consumed
// so that leftovers can be reported as unknown.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class V>
  void opt(const std::string& key, V& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    out = read<V>(j_.at(key), where(key));
  }

  template <class V>
  void req(const std::string& key, V& out) {
    if (!j_.contains(key)) fail(where(key), "missing required field");
    opt(key, out);
  }

  const json* sub(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) fail(where(k), "unknown key");
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& why) {
    throw ConfigError("field '" + field + "': " + why);
  }

 private:
  template <class V>
  static V read(const json& v, const std::string& field) {
    if constexpr (std::is_same_v<V, bool>) {
      if (!v.is_boolean()) fail(field, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<V, std::uint64_t>) {
      if (!v.is_number_unsigned()) fail(field, "expected a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<V>) {
      if (!v.is_number_integer()) fail(field, "expected an integer");
      return v.get<V>();
    } else if constexpr (std::is_floating_point_v<V>) {
      if (!v.is_number()) fail(field, "expected a number");
      return v.get<V>();
    } else if constexpr (std::is_same_v<V, std::string>) {
      if (!v.is_string()) fail(field, "expected a string");
      return v.get<std::string>();
    } else {
      if (!v.is_array()) fail(field, "expected an array of integers");
      V out;
      for (const auto& e : v) {
        if (!e.is_number_integer()) fail(field, "expected an array of integers");
        out.push_back(e.get<typename V::value_type>());
      }
      return out;
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json adam_json(const AdamConfig& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}, {"clip_norm", a.clip_norm}};
}

AdamConfig adam_from(const json& j, const std::string& path, AdamConfig a) {
  Fields f(j, path);
  f.opt("lr", a.lr);
  f.opt("beta1", a.beta1);
  f.opt("beta2", a.beta2);
  f.opt("eps", a.eps);
  f.opt("clip_norm", a.clip_norm);
  f.finish();
  return a;
}

// Runs a validate() and rethrows its message as a ConfigError.
template <class Fn>
void checked(const std::string& what, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("field 'batch_size': must be >= 2 (batchnorm needs batch statistics)");
  if (total_steps < 1) throw ConfigError("field 'total_steps': must be >= 1");
  if (checkpoint_every < 0 || eval_every < 0 || sample_every < 0)
    throw ConfigError("checkpoint_every, eval_every and sample_every must be >= 0");
  checked("loss weights", [&] { weights.validate(); });
  checked("model", [&] { model.validate(); });
  for (const auto* a : {&optim.enc, &optim.gen, &optim.dis, &optim.rec})
    if (!(a->lr > 0) || !(a->beta1 >= 0 && a->beta1 < 1) || !(a->beta2 >= 0 && a->beta2 < 1) || !(a->eps > 0) ||
        !(a->clip_norm >= 0))
      throw ConfigError("optimizer: invalid Adam hyperparameters");
  if (!(bn.momentum >= 0 && bn.momentum < 1) || !(bn.eps > 0))
    throw ConfigError("batchnorm: momentum must be in [0, 1) and eps positive");
  if (dataset.kind == "glyph") {
    checked("dataset.glyph", [&] { dataset.glyph.validate(); });
    if (dataset.glyph.grid_size != model.image_size)
      throw ConfigError("field 'dataset.glyph.grid_size': must equal model.image_size");
    if (2 * dataset.glyph.classes_per_slot != model.c_dim)
      throw ConfigError("field 'model.c_dim': glyph datasets need c_dim = 2 * classes_per_slot");
    if (dataset.glyph.n_samples < batch_size)
      throw ConfigError("field 'dataset.glyph.n_samples': fewer samples than one batch");
  } else if (dataset.kind == "folder") {
    if (dataset.folder.empty()) throw ConfigError("field 'dataset.folder': required for folder datasets");
  } else {
    throw ConfigError("field 'dataset.kind': expected \"glyph\" or \"folder\"");
  }
  if (dataset.holdout < 0) throw ConfigError("field 'dataset.holdout': must be >= 0");
}

bool operator==(const BatchNormConfig& a, const BatchNormConfig& b) {
  return a.momentum == b.momentum && a.eps == b.eps;
}

bool operator==(const TrainConfig& a, const TrainConfig& b) {
  return a.batch_size == b.batch_size && a.total_steps == b.total_steps && a.seed == b.seed &&
         a.weights == b.weights && a.model == b.model && a.optim == b.optim && a.bn == b.bn &&
         a.checkpoint_every == b.checkpoint_every && a.eval_every == b.eval_every &&
         a.sample_every == b.sample_every && a.dataset == b.dataset;
}

std::string resume_mismatch(const TrainConfig& a, const TrainConfig& b) {
  if (!(a.model == b.model)) return "model";
  if (a.batch_size != b.batch_size) return "batch_size";
  if (a.seed != b.seed) return "seed";
  if (!(a.weights == b.weights)) return "lambda1/lambda2";
  if (!(a.optim == b.optim)) return "optimizer";
  if (!(a.bn == b.bn)) return "batchnorm";
  if (!(a.dataset == b.dataset)) return "dataset";
  return {};
}

json to_json(const ModelConfig& m) {
  json groups = json::array();
  for (const auto& g : m.groups) groups.push_back({{"name", g.name}, {"offset", g.offset}, {"size", g.size}});
  return {{"image_size", m.image_size},
          {"channels", m.channels},
          {"z_dim", m.z_dim},
          {"c_dim", m.c_dim},
          {"conv_channels", m.conv_channels},
          {"enc_hidden", m.enc_hidden},
          {"gen_base_channels", m.gen_base_channels},
          {"deconv_channels", m.deconv_channels},
          {"rec_hidden", m.rec_hidden},
          {"leaky_slope", m.leaky_slope},
          {"logvar_min", m.logvar_min},
          {"logvar_max", m.logvar_max},
          {"groups", groups}};
}

json to_json(const TrainConfig& c) {
  const auto& g = c.dataset.glyph;
  return {{"batch_size", c.batch_size},
          {"total_steps", c.total_steps},
          {"seed", c.seed},
          {"lambda1", c.weights.lambda1},
          {"lambda2", c.weights.lambda2},
          {"checkpoint_every", c.checkpoint_every},
          {"eval_every", c.eval_every},
          {"sample_every", c.sample_every},
          {"model", to_json(c.model)},
          {"optimizer",
           {{"enc", adam_json(c.optim.enc)},
            {"gen", adam_json(c.optim.gen)},
            {"dis", adam_json(c.optim.dis)},
            {"rec", adam_json(c.optim.rec)}}},
          {"batchnorm", {{"momentum", c.bn.momentum}, {"eps", c.bn.eps}}},
          {"dataset",
           {{"kind", c.dataset.kind},
            {"folder", c.dataset.folder},
            {"holdout", c.dataset.holdout},
            {"glyph",
             {{"grid_size", g.grid_size},
              {"glyph_size", g.glyph_size},
              {"classes_per_slot", g.classes_per_slot},
              {"n_samples", g.n_samples},
              {"seed", g.seed}}}}}};
}

ModelConfig model_config_from_json(const json& j, const std::string& path) {
  ModelConfig m = ModelConfig::desk_scale();
  Fields f(j, path);
  f.opt("image_size", m.image_size);
  f.opt("channels", m.channels);
  f.opt("z_dim", m.z_dim);
  f.opt("c_dim", m.c_dim);
  f.opt("conv_channels", m.conv_channels);
  f.opt("enc_hidden", m.enc_hidden);
  f.opt("gen_base_channels", m.gen_base_channels);
  f.opt("deconv_channels", m.deconv_channels);
  f.opt("rec_hidden", m.rec_hidden);
  f.opt("leaky_slope", m.leaky_slope);
  f.opt("logvar_min", m.logvar_min);
  f.opt("logvar_max", m.logvar_max);
  if (const json* groups = f.sub("groups")) {
    const std::string gpath = f.where("groups");
    if (!groups->is_array()) Fields::fail(gpath, "expected an array");
    m.groups.clear();
    for (std::size_t i = 0; i < groups->size(); ++i) {
      Fields gf((*groups)[i], gpath + "[" + std::to_string(i) + "]");
      AttributeGroup g;
      gf.req("name", g.name);
      gf.req("offset", g.offset);
      gf.req("size", g.size);
      gf.finish();
      m.groups.push_back(g);
    }
  }
  f.finish();
  return m;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  Fields f(j, "");
  f.opt("batch_size", c.batch_size);
  f.opt("total_steps", c.total_steps);
  f.opt("seed", c.seed);
  f.req("lambda1", c.weights.lambda1);
  f.req("lambda2", c.weights.lambda2);
  f.opt("checkpoint_every", c.checkpoint_every);
  f.opt("eval_every", c.eval_every);
  f.opt("sample_every", c.sample_every);
  if (const json* m = f.sub("model")) c.model = model_config_from_json(*m, "model");
  if (const json* o = f.sub("optimizer")) {
    Fields of(*o, "optimizer");
    if (const json* a = of.sub("enc")) c.optim.enc = adam_from(*a, "optimizer.enc", c.optim.enc);
    if (const json* a = of.sub("gen")) c.optim.gen = adam_from(*a, "optimizer.gen", c.optim.gen);
    if (const json* a = of.sub("dis")) c.optim.dis = adam_from(*a, "optimizer.dis", c.optim.dis);
    if (const json* a = of.sub("rec")) c.optim.rec = adam_from(*a, "optimizer.rec", c.optim.rec);
    of.finish();
  }
  if (const json* b = f.sub("batchnorm")) {
    Fields bf(*b, "batchnorm");
    bf.opt("momentum", c.bn.momentum);
    bf.opt("eps", c.bn.eps);
    bf.finish();
  }
  if (const json* d = f.sub("dataset")) {
    Fields df(*d, "dataset");
    df.opt("kind", c.dataset.kind);
    df.opt("folder", c.dataset.folder);
    df.opt("holdout", c.dataset.holdout);
    if (const json* g = df.sub("glyph")) {
      Fields gf(*g, "dataset.glyph");
      gf.opt("grid_size", c.dataset.glyph.grid_size);
      gf.opt("glyph_size", c.dataset.glyph.glyph_size);
      gf.opt("classes_per_slot", c.dataset.glyph.classes_per_slot);
      gf.opt("n_samples", c.dataset.glyph.n_samples);
      gf.opt("seed", c.dataset.glyph.seed);
      gf.finish();
    }
    df.finish();
  }
  f.finish();
  c.validate();
  return c;
}

TrainConfig parse_train_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset -> line and column.
    const std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < at; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": syntax error");
  }
  return train_config_from_json(j);
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream os;
  os << in.rdbuf();
  try {
    return parse_train_config(os.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace vigan
