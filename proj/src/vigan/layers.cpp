// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/layers.hpp"

#include <random>

#include "vigan/rng.hpp"

namespace vigan {

namespace {

constexpr double kInitStd = 0.02;

template <class T>
Tensor<T> truncated_normal(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, kInitStd);
  Tensor<T> t(shape);
  for (auto& v : t.data()) {
    double s;
    do {
      s = dist(rng);
    } while (std::abs(s) > 2.0 * kInitStd);
    v = static_cast<T>(s);
  }
  return t;
}

std::string join(const std::string& ns, const std::string& name) { return ns.empty() ? name : ns + "/" + name; }

bool has_prefix(const std::string& s, const std::string& prefix) { return s.compare(0, prefix.size(), prefix) == 0; }

}  // namespace

template <class T>
const Tensor<T>& ParamStore<T>::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw MissingParameter("missing parameter " + name);
  return it->second;
}

template <class T>
const Tensor<T>& ParamStore<T>::stat(const std::string& name) const {
  auto it = state.find(name);
  if (it == state.end()) throw MissingParameter("missing layer state " + name);
  return it->second;
}

template <class T>
std::vector<std::string> ParamStore<T>::param_names(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : params)
    if (has_prefix(k, prefix)) out.push_back(k);
  return out;
}

template <class T>
std::int64_t ParamStore<T>::count(const std::string& prefix) const {
  std::int64_t n = 0;
  for (const auto& [k, v] : params)
    if (has_prefix(k, prefix)) n += static_cast<std::int64_t>(v.size());
  return n;
}

void validate(const LayerSpec& spec) {
  auto bad = [&](const std::string& why) { throw std::invalid_argument("layer " + spec.name + ": " + why); };
  if (spec.name.empty()) bad("empty name");
  switch (spec.kind) {
    case LayerKind::Dense:
      if (spec.out <= 0) bad("output width must be positive");
      if (!spec.out_shape.empty() && numel(spec.out_shape) != spec.out) bad("out_shape does not hold out features");
      break;
    case LayerKind::Conv:
    case LayerKind::Deconv:
      if (spec.out <= 0 || spec.kernel <= 0 || spec.stride <= 0 || spec.pad < 0) bad("non-positive dims");
      break;
    case LayerKind::BatchNorm:
    case LayerKind::Activation:
      break;
  }
}

Shape layer_output_shape(const LayerSpec& spec, const Shape& in) {
  validate(spec);
  switch (spec.kind) {
    case LayerKind::Dense:
      return spec.out_shape.empty() ? Shape{spec.out} : spec.out_shape;
    case LayerKind::Conv: {
      if (in.size() != 3) throw ShapeError("layer " + spec.name + ": conv expects [C,H,W], got " + to_string(in));
      if (spec.kernel > in[1] + 2 * spec.pad || spec.kernel > in[2] + 2 * spec.pad)
        throw ShapeError("layer " + spec.name + ": kernel larger than padded input " + to_string(in));
      return {spec.out, (in[1] + 2 * spec.pad - spec.kernel) / spec.stride + 1,
              (in[2] + 2 * spec.pad - spec.kernel) / spec.stride + 1};
    }
    case LayerKind::Deconv: {
      if (in.size() != 3) throw ShapeError("layer " + spec.name + ": deconv expects [C,H,W], got " + to_string(in));
      const std::int64_t h = (in[1] - 1) * spec.stride - 2 * spec.pad + spec.kernel;
      const std::int64_t w = (in[2] - 1) * spec.stride - 2 * spec.pad + spec.kernel;
      if (h <= 0 || w <= 0) throw ShapeError("layer " + spec.name + ": non-positive output extent");
      return {spec.out, h, w};
    }
    case LayerKind::BatchNorm:
    case LayerKind::Activation:
      return in;
  }
  return in;
}

Shape network_output_shape(const NetworkSpec& net) {
  Shape s = net.input_shape;
  for (const auto& layer : net.layers) s = layer_output_shape(layer, s);
  return s;
}

std::int64_t param_count(const NetworkSpec& net) {
  std::int64_t total = 0;
  Shape s = net.input_shape;
  for (const auto& layer : net.layers) {
    const Shape out = layer_output_shape(layer, s);
    switch (layer.kind) {
      case LayerKind::Dense:
        total += numel(s) * layer.out + layer.out;
        break;
      case LayerKind::Conv:
      case LayerKind::Deconv:
        total += s[0] * layer.out * layer.kernel * layer.kernel + layer.out;
        break;
      default:
        break;
    }
    if (layer.batchnorm || layer.kind == LayerKind::BatchNorm) total += 2 * out[0];
    s = out;
  }
  return total;
}

template <class T>
ParamStore<T> init_params(const std::vector<NetworkSpec>& nets, std::uint64_t seed) {
  ParamStore<T> store;
  auto weight = [&](const std::string& name, const Shape& shape) {
    if (store.params.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    store.params.emplace(name, truncated_normal<T>(shape, derive_seed(seed, name)));
  };
  auto zeros = [&](const std::string& name, const Shape& shape) {
    if (store.params.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    store.params.emplace(name, Tensor<T>::zeros(shape));
  };
  for (const auto& net : nets) {
    Shape s = net.input_shape;
    for (const auto& layer : net.layers) {
      const Shape out = layer_output_shape(layer, s);
      const std::string base = join(net.ns, layer.name);
      switch (layer.kind) {
        case LayerKind::Dense:
          weight(base + "/w", {numel(s), layer.out});
          zeros(base + "/b", {layer.out});
          break;
        case LayerKind::Conv:
          weight(base + "/w", {layer.out, s[0], layer.kernel, layer.kernel});
          zeros(base + "/b", {layer.out});
          break;
        case LayerKind::Deconv:
          weight(base + "/w", {s[0], layer.out, layer.kernel, layer.kernel});
          zeros(base + "/b", {layer.out});
          break;
        default:
          break;
      }
      if (layer.batchnorm || layer.kind == LayerKind::BatchNorm) {
        const Shape ch{out[0]};
        store.params.emplace(base + "/bn/gamma", Tensor<T>::ones(ch));
        store.params.emplace(base + "/bn/beta", Tensor<T>::zeros(ch));
        store.state.emplace(base + "/bn/mean", Tensor<T>::zeros(ch));
        store.state.emplace(base + "/bn/var", Tensor<T>::ones(ch));
      }
      s = out;
    }
  }
  return store;
}

template <class T>
Var<T> Forward<T>::param(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return Var<T>(&tape_, it->second);
  Var<T> v = constant(tape_, params_.param(name));
  bound_.emplace(name, v.id());
  return v;
}

template <class T>
void Forward<T>::update_running_stats(const std::string& layer, const std::vector<T>& mean,
                                      const std::vector<T>& var) {
  if (!sink_) return;
  bool match = false;
  for (const auto& p : sink_prefixes_) match = match || has_prefix(layer, p);
  if (!match) return;
  auto& rm = sink_->state.at(layer + "/mean");
  auto& rv = sink_->state.at(layer + "/var");
  const T m = static_cast<T>(bn_.momentum);
  for (std::size_t c = 0; c < mean.size(); ++c) {
    rm[c] = m * rm[c] + (T(1) - m) * mean[c];
    rv[c] = m * rv[c] + (T(1) - m) * var[c];
  }
}

template <class T>
std::map<std::string, Tensor<T>> param_grads(const Forward<T>& fwd, const Gradients<T>& grads,
                                             const std::string& prefix) {
  std::map<std::string, Tensor<T>> out;
  for (const auto& name : fwd.params().param_names(prefix)) {
    auto it = fwd.bound().find(name);
    out.emplace(name, it == fwd.bound().end() ? Tensor<T>::zeros(fwd.params().param(name).shape())
                                              : grads.of(it->second));
  }
  return out;
}

template <class T>
Var<T> dense_forward(Forward<T>& f, const Var<T>& x, const std::string& name) {
  Var<T> in = x.shape().size() == 2 ? x : flatten(x);
  return add_bias(matmul(in, f.param(name + "/w")), f.param(name + "/b"));
}

template <class T>
Var<T> batchnorm_forward(Forward<T>& f, const Var<T>& x, const std::string& name) {
  const std::string bn = name + "/bn";
  Var<T> gamma = f.param(bn + "/gamma");
  Var<T> beta = f.param(bn + "/beta");
  if (f.mode() == Mode::Eval) {
    return batchnorm_eval(x, gamma, beta, f.params().stat(bn + "/mean"), f.params().stat(bn + "/var"), f.bn().eps);
  }
  auto r = batchnorm_train(x, gamma, beta, f.bn().eps);
  f.update_running_stats(bn, r.batch_mean, r.batch_var);
  return r.y;
}

template <class T>
Var<T> layer_forward(Forward<T>& f, const Var<T>& x, const LayerSpec& spec, const std::string& ns) {
  const std::string base = join(ns, spec.name);
  Var<T> y = x;
  try {
    switch (spec.kind) {
      case LayerKind::Dense:
        y = dense_forward(f, x, base);
        if (!spec.out_shape.empty()) {
          Shape s{x.shape()[0]};
          s.insert(s.end(), spec.out_shape.begin(), spec.out_shape.end());
          y = reshape(y, s);
        }
        break;
      case LayerKind::Conv:
        y = conv2d(x, f.param(base + "/w"), f.param(base + "/b"), spec.stride, spec.pad);
        break;
      case LayerKind::Deconv:
        y = deconv2d(x, f.param(base + "/w"), f.param(base + "/b"), spec.stride, spec.pad);
        break;
      case LayerKind::BatchNorm:
      case LayerKind::Activation:
        break;
    }
    if (spec.batchnorm || spec.kind == LayerKind::BatchNorm) y = batchnorm_forward(f, y, base);
  } catch (const ShapeError& e) {
    throw ShapeError("layer " + base + ": " + e.what());
  }
  return activation(y, spec.act);
}

template <class T>
Var<T> sequential_forward(Forward<T>& f, const Var<T>& x, const NetworkSpec& net) {
  Var<T> h = x;
  for (const auto& layer : net.layers) h = layer_forward(f, h, layer, net.ns);
  return h;
}

template struct ParamStore<float>;
template struct ParamStore<double>;
template class Forward<float>;
template class Forward<double>;
template ParamStore<float> init_params<float>(const std::vector<NetworkSpec>&, std::uint64_t);
template ParamStore<double> init_params<double>(const std::vector<NetworkSpec>&, std::uint64_t);

#define VIGAN_INSTANTIATE(T)                                                                                       \
  template std::map<std::string, Tensor<T>> param_grads<T>(const Forward<T>&, const Gradients<T>&,                \
                                                           const std::string&);                                    \
  template Var<T> dense_forward<T>(Forward<T>&, const Var<T>&, const std::string&);                               \
  template Var<T> batchnorm_forward<T>(Forward<T>&, const Var<T>&, const std::string&);                           \
  template Var<T> layer_forward<T>(Forward<T>&, const Var<T>&, const LayerSpec&, const std::string&);             \
  template Var<T> sequential_forward<T>(Forward<T>&, const Var<T>&, const NetworkSpec&);

VIGAN_INSTANTIATE(float)
VIGAN_INSTANTIATE(double)

#undef VIGAN_INSTANTIATE

}  // namespace vigan
