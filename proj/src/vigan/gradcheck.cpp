// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vigan/substeps.hpp"

namespace vigan {

namespace {

using TensorD = Tensor<double>;
using VarD = Var<double>;

double dot(const TensorD& a, const TensorD& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TensorD normal(Rng& rng, Shape shape, double scale = 1.0) {
  TensorD t(std::move(shape));
  fill_normal<double>(rng, t.data());
  for (auto& v : t.data()) v *= scale;
  return t;
}

TensorD uniform(Rng& rng, Shape shape, double lo, double hi) {
  TensorD t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

// Magnitudes in [lo, 1] with random sign: keeps inputs off a kink at zero.
TensorD off_zero(Rng& rng, Shape shape, double lo = 0.1) {
  TensorD t = uniform(rng, std::move(shape), lo, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : t.data())
    if (sign(rng)) v = -v;
  return t;
}

TensorD binary(Rng& rng, Shape shape) {
  TensorD t(std::move(shape));
  std::bernoulli_distribution bit(0.5);
  for (auto& v : t.data()) v = bit(rng) ? 1.0 : 0.0;
  return t;
}

constexpr double kClampLo = -0.5, kClampHi = 0.5;

// Values at least 0.1 away from both clamp bounds.
TensorD off_bounds(Rng& rng, Shape shape) {
  TensorD t(std::move(shape));
  std::uniform_int_distribution<int> band(0, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : t.data()) {
    switch (band(rng)) {
      case 0: v = -1.0 + 0.4 * u(rng); break;
      case 1: v = -0.4 + 0.8 * u(rng); break;
      default: v = 0.6 + 0.4 * u(rng); break;
    }
  }
  return t;
}

struct Case {
  std::string name;
  std::string kind;  // "op" or "loss"
  std::size_t n_wrt;
  std::function<std::vector<TensorD>(Rng&)> draw;
  MultiFn fn;
};

std::vector<Case> op_cases() {
  std::vector<Case> c;
  auto pair = [](Shape a, Shape b) {
    return [a, b](Rng& r) { return std::vector<TensorD>{normal(r, a), normal(r, b)}; };
  };
  auto single = [](Shape a) {
    return [a](Rng& r) { return std::vector<TensorD>{normal(r, a)}; };
  };
  c.push_back({"add", "op", 2, pair({3, 4}, {3, 4}), [](auto&, auto& v) { return add(v[0], v[1]); }});
  c.push_back({"sub", "op", 2, pair({3, 4}, {3, 4}), [](auto&, auto& v) { return sub(v[0], v[1]); }});
  c.push_back({"mul", "op", 2, pair({3, 4}, {3, 4}), [](auto&, auto& v) { return mul(v[0], v[1]); }});
  c.push_back({"scale", "op", 1, single({3, 4}), [](auto&, auto& v) { return scale(v[0], -1.7); }});
  c.push_back({"add_scalar", "op", 1, single({3, 4}), [](auto&, auto& v) { return add_scalar(v[0], 0.3); }});
  c.push_back({"add_bias", "op", 2, pair({2, 3, 2, 2}, {3}), [](auto&, auto& v) { return add_bias(v[0], v[1]); }});
  c.push_back({"matmul", "op", 2, pair({3, 4}, {4, 2}), [](auto&, auto& v) { return matmul(v[0], v[1]); }});
  c.push_back({"conv2d", "op", 3,
               [](Rng& r) {
                 return std::vector<TensorD>{normal(r, {2, 2, 6, 6}), normal(r, {3, 2, 4, 4}), normal(r, {3})};
               },
               [](auto&, auto& v) { return conv2d(v[0], v[1], v[2], 2, 1); }});
  c.push_back({"deconv2d", "op", 3,
               [](Rng& r) {
                 return std::vector<TensorD>{normal(r, {2, 3, 3, 3}), normal(r, {3, 2, 4, 4}), normal(r, {2})};
               },
               [](auto&, auto& v) { return deconv2d(v[0], v[1], v[2], 2, 1); }});
  c.push_back({"relu", "op", 1, [](Rng& r) { return std::vector<TensorD>{off_zero(r, {3, 5})}; },
               [](auto&, auto& v) { return relu(v[0]); }});
  c.push_back({"leaky_relu", "op", 1, [](Rng& r) { return std::vector<TensorD>{off_zero(r, {3, 5})}; },
               [](auto&, auto& v) { return leaky_relu(v[0], 0.2); }});
  c.push_back({"tanh", "op", 1, single({3, 5}), [](auto&, auto& v) { return tanh(v[0]); }});
  c.push_back({"sigmoid", "op", 1, [](Rng& r) { return std::vector<TensorD>{normal(r, {3, 5}, 3.0)}; },
               [](auto&, auto& v) { return sigmoid(v[0]); }});
  c.push_back({"exp", "op", 1, [](Rng& r) { return std::vector<TensorD>{uniform(r, {3, 4}, -2, 2)}; },
               [](auto&, auto& v) { return exp(v[0]); }});
  c.push_back({"log", "op", 1, [](Rng& r) { return std::vector<TensorD>{uniform(r, {3, 4}, 0.5, 2)}; },
               [](auto&, auto& v) { return log(v[0]); }});
  c.push_back({"square", "op", 1, single({3, 4}), [](auto&, auto& v) { return square(v[0]); }});
  c.push_back({"clamp", "op", 1, [](Rng& r) { return std::vector<TensorD>{off_bounds(r, {4, 5})}; },
               [](auto&, auto& v) { return clamp(v[0], kClampLo, kClampHi); }});
  c.push_back({"sum", "op", 1, single({3, 4}), [](auto&, auto& v) { return sum(v[0]); }});
  c.push_back({"mean", "op", 1, single({3, 4}), [](auto&, auto& v) { return mean(v[0]); }});
  c.push_back({"concat", "op", 2, pair({2, 3, 2}, {2, 2, 2}), [](auto&, auto& v) { return concat(v[0], v[1], 1); }});
  c.push_back({"reshape", "op", 1, single({2, 6}), [](auto&, auto& v) { return reshape(v[0], Shape{3, 4}); }});
  // Train mode on [B, F] and [B, C, H, W]; eval mode against fixed statistics.
  c.push_back({"batchnorm", "op", 3,
               [](Rng& r) {
                 return std::vector<TensorD>{normal(r, {4, 3}, 2.0), uniform(r, {3}, 0.5, 1.5), normal(r, {3})};
               },
               [](auto&, auto& v) { return batchnorm_train(v[0], v[1], v[2], 1e-5).y; }});
  c.push_back({"batchnorm_spatial", "op", 3,
               [](Rng& r) {
                 return std::vector<TensorD>{normal(r, {3, 2, 2, 2}, 2.0), uniform(r, {2}, 0.5, 1.5), normal(r, {2})};
               },
               [](auto&, auto& v) { return batchnorm_train(v[0], v[1], v[2], 1e-5).y; }});
  c.push_back({"batchnorm_eval", "op", 3,
               [](Rng& r) {
                 return std::vector<TensorD>{normal(r, {2, 3, 2, 2}), uniform(r, {3}, 0.5, 1.5), normal(r, {3}),
                                             normal(r, {3}), uniform(r, {3}, 0.5, 2.0)};
               },
               [](auto&, auto& v) { return batchnorm_eval(v[0], v[1], v[2], v[3].value(), v[4].value(), 1e-5); }});
  return c;
}

std::vector<Case> loss_cases() {
  std::vector<Case> c;
  auto probs = [](Shape s) { return [s](Rng& r) { return std::vector<TensorD>{uniform(r, s, 0.05, 0.95)}; }; };
  c.push_back({"kl_prior", "loss", 2,
               [](Rng& r) { return std::vector<TensorD>{normal(r, {3, 4}), uniform(r, {3, 4}, -2, 2)}; },
               [](auto&, auto& v) { return kl_prior(EncoderOutput<double>{v[0], v[1]}); }});
  c.push_back({"recon_feature_loss", "loss", 1,
               [](Rng& r) { return std::vector<TensorD>{normal(r, {3, 5}), normal(r, {3, 5})}; },
               [](auto&, auto& v) { return recon_feature_loss(v[1], v[0]); }});
  c.push_back({"recog_loss", "loss", 1,
               [](Rng& r) { return std::vector<TensorD>{uniform(r, {3, 4}, 0.05, 0.95), binary(r, {3, 4})}; },
               [](auto&, auto& v) { return recog_loss(v[1], v[0]); }});
  c.push_back({"gen_adv_loss", "loss", 1, probs({4, 1}), [](auto&, auto& v) { return gen_adv_loss(v[0]); }});
  c.push_back({"dis_loss", "loss", 3,
               [](Rng& r) {
                 return std::vector<TensorD>{uniform(r, {4, 1}, 0.05, 0.95), uniform(r, {4, 1}, 0.05, 0.95),
                                             uniform(r, {4, 1}, 0.05, 0.95)};
               },
               [](auto&, auto& v) { return dis_loss(v[0], v[1], v[2]); }});
  c.push_back({"compose_enc_loss", "loss", 2,
               [](Rng& r) { return std::vector<TensorD>{normal(r, {}), normal(r, {})}; },
               [](auto&, auto& v) { return compose_enc_loss(v[0], v[1]); }});
  c.push_back({"compose_gen_loss", "loss", 5,
               [](Rng& r) {
                 std::vector<TensorD> out;
                 for (int i = 0; i < 5; ++i) out.push_back(normal(r, {}));
                 return out;
               },
               [](auto&, auto& v) { return compose_gen_loss(v[0], v[1], v[2], v[3], v[4], LossWeights{0.7, 1.3}); }});
  return c;
}

// Small enough for exhaustive per-parameter differences.
ModelConfig tiny_model() {
  ModelConfig m;
  m.image_size = 8;
  m.channels = 1;
  m.z_dim = 3;
  m.c_dim = 4;
  m.conv_channels = {3};
  m.enc_hidden = 5;
  m.gen_base_channels = 3;
  m.deconv_channels = {};
  m.rec_hidden = 4;
  m.groups = two_slot_groups(2);
  return m;
}

// Replaces the small initial weights with O(1) values so that gradients
// are well above the relative-error floor.
void randomize(ParamStore<double>& p, Rng& rng) {
  for (auto& [name, t] : p.params) {
    const bool gamma = name.size() >= 6 && name.compare(name.size() - 6, 6, "/gamma") == 0;
    fill_normal<double>(rng, t.data());
    for (auto& v : t.data()) v = gamma ? 1.0 + 0.2 * v : 0.5 * v;
  }
  for (auto& [name, t] : p.state) {
    const bool var = name.size() >= 4 && name.compare(name.size() - 4, 4, "/var") == 0;
    for (auto& v : t.data()) v = var ? 1.0 : 0.0;
  }
}

struct ObjectiveCase {
  std::string name;
  std::string ns;
  std::function<VarD(Forward<double>&, const Model&, const SubstepInputs<double>&)> build;
};

std::vector<ObjectiveCase> objective_cases() {
  return {
      {"objective/encoder", "enc/",
       [](Forward<double>& f, const Model& m, const SubstepInputs<double>& in) {
         LossReport r;
         return encoder_objective(f, m, in, r);
       }},
      {"objective/generator", "gen/",
       [](Forward<double>& f, const Model& m, const SubstepInputs<double>& in) {
         LossReport r;
         return generator_objective(f, m, in, LossWeights{0.7, 1.3}, r);
       }},
      {"objective/recognizer", "rec/",
       [](Forward<double>& f, const Model& m, const SubstepInputs<double>& in) {
         LossReport r;
         return recognizer_objective(f, m, in, r);
       }},
      {"objective/discriminator", "dis/",
       [](Forward<double>& f, const Model& m, const SubstepInputs<double>& in) {
         LossReport r;
         return discriminator_objective(f, m, in, r);
       }},
      // Whole forward chain, differentiated into the encoder.
      {"objective/pipeline", "enc/",
       [](Forward<double>& f, const Model& m, const SubstepInputs<double>& in) {
         const auto e = encode(f, m, constant(f.tape(), in.images));
         const VarD x =
             generate(f, m, reparameterize(e, constant(f.tape(), in.eps)), constant(f.tape(), in.attributes));
         const auto out = critic(f, m, x);
         return add(mean(square(x)), add(mean(out.p_real), mean(out.q)));
       }},
  };
}

SubstepInputs<double> tiny_inputs(const ModelConfig& m, Rng& rng) {
  constexpr std::int64_t b = 3;
  auto onehots = [&] {
    TensorD c({b, m.c_dim});
    for (const auto& g : m.groups) {
      std::uniform_int_distribution<std::int64_t> pick(0, g.size - 1);
      for (std::int64_t i = 0; i < b; ++i) c[i * m.c_dim + g.offset + pick(rng)] = 1.0;
    }
    return c;
  };
  SubstepInputs<double> in;
  in.images = uniform(rng, {b, m.channels, m.image_size, m.image_size}, -1, 1);
  in.attributes = onehots();
  in.eps = normal(rng, {b, m.z_dim});
  in.prior_z = normal(rng, {b, m.z_dim});
  in.prior_c = onehots();
  return in;
}

bool selected(const std::string& module, const std::string& name, const std::string& kind) {
  if (module == "all" || module == name) return true;
  if (module == "ops") return kind == "op";
  if (module == "losses") return kind == "loss";
  if (module == "objectives") return kind == "objective";
  // "batchnorm" also selects its spatial and eval variants.
  return module == "batchnorm" && kind == "op" && name.rfind("batchnorm_", 0) == 0;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / denom;
}

CheckStats check_inputs(const MultiFn& f, const std::vector<TensorD>& inputs, std::size_t n_wrt, Rng& rng,
                        const CheckOptions& options) {
  Tape<double> tape;
  tape.inject_fault(options.fault);
  std::vector<VarD> vars;
  for (const auto& t : inputs) vars.push_back(constant(tape, t));
  VarD y = f(tape, vars);
  TensorD seed = y.value().size() == 1 ? TensorD(y.shape(), 1.0) : normal(rng, y.shape());
  const Gradients<double> grads = tape.backward(y.id(), seed);

  auto projected = [&](const std::vector<TensorD>& in) {
    Tape<double> t;
    std::vector<VarD> v;
    for (const auto& x : in) v.push_back(constant(t, x));
    return dot(seed, f(t, v).value());
  };

  CheckStats stats;
  std::vector<TensorD> work = inputs;
  for (std::size_t k = 0; k < n_wrt; ++k) {
    const TensorD analytic = grads.of(vars[k].id());
    for (std::size_t i = 0; i < work[k].size(); ++i) {
      const double x0 = work[k][i];
      work[k][i] = x0 + options.h;
      const double fp = projected(work);
      work[k][i] = x0 - options.h;
      const double fm = projected(work);
      work[k][i] = x0;
      const double err = relative_error(analytic[i], (fp - fm) / (2 * options.h));
      stats.max_error = std::isnan(err) ? err : std::max(stats.max_error, err);
      if (std::isnan(stats.max_error)) return stats;
      ++stats.checks;
    }
  }
  return stats;
}

CheckStats check_params(const std::function<VarD(Forward<double>&)>& objective, ParamStore<double>& params,
                        const std::string& prefix, const CheckOptions& options) {
  std::map<std::string, TensorD> analytic;
  {
    Tape<double> tape;
    tape.inject_fault(options.fault);
    Forward<double> f(tape, params, Mode::Train);
    VarD loss = objective(f);
    analytic = param_grads(f, tape.backward(loss.id()), prefix);
  }
  auto value = [&] {
    Tape<double> tape;
    Forward<double> f(tape, params, Mode::Train);
    return objective(f).value().item();
  };
  CheckStats stats;
  for (const auto& [name, g] : analytic) {
    TensorD& p = params.params.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double x0 = p[i];
      p[i] = x0 + options.h;
      const double fp = value();
      p[i] = x0 - options.h;
      const double fm = value();
      p[i] = x0;
      const double err = relative_error(g[i], (fp - fm) / (2 * options.h));
      if (std::isnan(err)) return {err, stats.checks};
      stats.max_error = std::max(stats.max_error, err);
      ++stats.checks;
    }
  }
  return stats;
}

std::vector<std::string> gradcheck_case_names() {
  std::vector<std::string> out;
  for (const auto& c : op_cases()) out.push_back(c.name);
  for (const auto& c : loss_cases()) out.push_back(c.name);
  for (const auto& c : objective_cases()) out.push_back(c.name);
  return out;
}

std::vector<GradCheckResult> run_gradcheck_suite(const SuiteOptions& options) {
  const auto names = gradcheck_case_names();
  const bool known = options.module == "all" || options.module == "ops" || options.module == "losses" ||
                     options.module == "objectives" ||
                     std::find(names.begin(), names.end(), options.module) != names.end();
  if (!known) {
    std::string list;
    for (const auto& n : names) list += " " + n;
    throw std::invalid_argument("unknown gradcheck module '" + options.module + "'; expected all, ops, losses, objectives or one of:" + list);
  }
  const CheckOptions check{kGradStep, options.fault};
  std::vector<GradCheckResult> out;

  std::vector<Case> cases = op_cases();
  for (auto& c : loss_cases()) cases.push_back(std::move(c));
  for (const auto& c : cases) {
    if (!selected(options.module, c.name, c.kind)) continue;
    Rng rng(derive_seed(options.seed, c.name));
    GradCheckResult r{c.name, c.kind, 0, kOpTolerance, 0, 0};
    for (int p = 0; p < options.op_points; ++p) {
      const CheckStats s = check_inputs(c.fn, c.draw(rng), c.n_wrt, rng, check);
      r.max_error = std::isnan(s.max_error) ? s.max_error : std::max(r.max_error, s.max_error);
      r.checks += s.checks;
      ++r.points;
      if (std::isnan(r.max_error)) break;
    }
    out.push_back(r);
  }

  const Model model(tiny_model());
  for (const auto& c : objective_cases()) {
    if (!selected(options.module, c.name, "objective")) continue;
    Rng rng(derive_seed(options.seed, c.name));
    GradCheckResult r{c.name, "objective", 0, kObjectiveTolerance, 0, 0};
    for (int p = 0; p < options.objective_points; ++p) {
      ParamStore<double> params = model.init<double>(rng());
      randomize(params, rng);
      const SubstepInputs<double> in = tiny_inputs(model.config, rng);
      const CheckStats s =
          check_params([&](Forward<double>& f) { return c.build(f, model, in); }, params, c.ns, check);
      r.max_error = std::isnan(s.max_error) ? s.max_error : std::max(r.max_error, s.max_error);
      r.checks += s.checks;
      ++r.points;
      if (std::isnan(r.max_error)) break;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace vigan
