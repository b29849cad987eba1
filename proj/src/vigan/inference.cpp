// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/inference.hpp"

#include <algorithm>

namespace vigan {

Encoded encode_images(const Model& model, const ParamStore<float>& params, const Tensor<float>& images) {
  Tape<float> tape;
  Forward<float> f(tape, params, Mode::Eval);
  auto out = encode(f, model, constant(tape, images));
  return {out.mu.value(), out.logvar.value()};
}

Tensor<float> generate_images(const Model& model, const ParamStore<float>& params, const Tensor<float>& z,
                              const Tensor<float>& c) {
  Tape<float> tape;
  Forward<float> f(tape, params, Mode::Eval);
  return generate(f, model, constant(tape, z), constant(tape, c)).value();
}

Tensor<float> recognize_images(const Model& model, const ParamStore<float>& params, const Tensor<float>& images) {
  Tape<float> tape;
  Forward<float> f(tape, params, Mode::Eval);
  return recognize(f, model, constant(tape, images)).value();
}

void check_param_layout(const Model& model, const ParamStore<float>& params) {
  const auto expected = model.init<float>(0);
  auto compare = [](const auto& want, const auto& have, const char* what) {
    for (const auto& [name, t] : want) {
      auto it = have.find(name);
      if (it == have.end()) throw std::invalid_argument(std::string("missing ") + what + " " + name);
      if (it->second.shape() != t.shape())
        throw std::invalid_argument(std::string(what) + " " + name + " has shape " + to_string(it->second.shape()) +
                                    ", model expects " + to_string(t.shape()));
    }
    for (const auto& [name, t] : have)
      if (!want.count(name)) throw std::invalid_argument(std::string("unexpected ") + what + " " + name);
  };
  compare(expected.params, params.params, "parameter");
  compare(expected.state, params.state, "state tensor");
}

Tensor<float> slice_rows(const Tensor<float>& t, std::int64_t begin, std::int64_t end) {
  if (t.rank() < 1 || begin < 0 || end > t.dim(0) || begin >= end)
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                     to_string(t.shape()));
  Shape s = t.shape();
  const std::int64_t row = t.size() / s[0];
  s[0] = end - begin;
  const auto d = t.data();
  return Tensor<float>(s, std::vector<float>(d.begin() + begin * row, d.begin() + end * row));
}

std::int64_t argmax(std::span<const float> v, std::int64_t offset, std::int64_t size) {
  const auto first = v.begin() + offset;
  return std::max_element(first, first + size) - first;
}

}  // namespace vigan
