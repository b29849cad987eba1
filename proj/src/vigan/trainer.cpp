// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "vigan/image_codec.hpp"
#include "vigan/inference.hpp"
#include "vigan/substeps.hpp"

namespace vigan {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Tensor<float> normal(Rng& rng, Shape shape) {
  Tensor<float> t(std::move(shape));
  fill_normal<float>(rng, t.data());
  return t;
}

double value_of(const Var<float>& v) { return static_cast<double>(v.value().item()); }

void require_finite(const char* objective, double v, const LossReport& r) {
  if (!std::isfinite(v))
    throw NumericError(std::string("non-finite ") + objective + " objective, step aborted; " + r.describe());
}

std::string step_name(const char* prefix, std::int64_t step, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%06lld%s", prefix, static_cast<long long>(step), ext);
  return buf;
}

// One categorical choice for evaluation: a configured one-hot group, or a
// single ungrouped attribute read as on/off.
struct EvalGroup {
  std::int64_t offset;
  std::int64_t size;
  bool binary;

  std::int64_t classes() const { return binary ? 2 : size; }
  std::int64_t read(std::span<const float> v) const {
    return binary ? (v[offset] > 0.5f ? 1 : 0) : argmax(v, offset, size);
  }
  void write(std::span<float> v, std::int64_t cls) const {
    if (binary) {
      v[offset] = static_cast<float>(cls);
      return;
    }
    for (std::int64_t i = 0; i < size; ++i) v[offset + i] = i == cls ? 1.0f : 0.0f;
  }
};

std::vector<EvalGroup> eval_groups(const ModelConfig& cfg) {
  std::vector<EvalGroup> out;
  std::vector<bool> grouped(static_cast<std::size_t>(cfg.c_dim), false);
  for (const auto& g : cfg.groups) {
    out.push_back({g.offset, g.size, false});
    for (std::int64_t i = 0; i < g.size; ++i) grouped[g.offset + i] = true;
  }
  for (std::int64_t i = 0; i < cfg.c_dim; ++i)
    if (!grouped[i]) out.push_back({i, 1, true});
  return out;
}

std::span<const float> row(const Tensor<float>& t, std::int64_t i) {
  const std::int64_t w = t.size() / t.dim(0);
  return t.data().subspan(static_cast<std::size_t>(i * w), static_cast<std::size_t>(w));
}

}  // namespace

Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
  const auto& first = samples.at(indices.front());
  Shape img = first.image.shape();
  const auto c_dim = static_cast<std::int64_t>(first.attributes.size());
  const auto b = static_cast<std::int64_t>(indices.size());
  Shape batch_shape{b};
  batch_shape.insert(batch_shape.end(), img.begin(), img.end());
  std::vector<float> images, attrs;
  images.reserve(static_cast<std::size_t>(numel(batch_shape)));
  attrs.reserve(static_cast<std::size_t>(b * c_dim));
  for (auto i : indices) {
    const auto& s = samples.at(i);
    if (s.image.shape() != img || static_cast<std::int64_t>(s.attributes.size()) != c_dim)
      throw ShapeError("make_batch: sample " + std::to_string(i) + " differs in shape from the first sample");
    images.insert(images.end(), s.image.data().begin(), s.image.data().end());
    attrs.insert(attrs.end(), s.attributes.begin(), s.attributes.end());
  }
  return {Tensor<float>(std::move(batch_shape), std::move(images)), Tensor<float>({b, c_dim}, std::move(attrs))};
}

std::vector<std::size_t> batch_indices(std::size_t n, std::int64_t batch_size, std::uint64_t seed, std::int64_t step) {
  if (batch_size < 1 || step < 1) throw std::invalid_argument("batch_indices: batch_size and step must be >= 1");
  const auto b = static_cast<std::size_t>(batch_size);
  const std::size_t per_epoch = n / b;
  if (per_epoch == 0) throw std::invalid_argument("dataset of " + std::to_string(n) + " is smaller than one batch");
  const auto k = static_cast<std::size_t>(step - 1);
  const std::size_t epoch = k / per_epoch, slot = k % per_epoch;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(derive_seed(seed, "epoch"), static_cast<std::uint64_t>(epoch)));
  std::shuffle(perm.begin(), perm.end(), rng);
  return {perm.begin() + static_cast<std::ptrdiff_t>(slot * b), perm.begin() + static_cast<std::ptrdiff_t>((slot + 1) * b)};
}

AttributePool attribute_pool(const std::vector<Sample>& samples) {
  AttributePool pool;
  pool.reserve(samples.size());
  for (const auto& s : samples) pool.push_back(s.attributes);
  return pool;
}

PriorSample sample_prior(std::int64_t batch_size, std::int64_t z_dim, const AttributePool& pool, Rng& rng) {
  if (pool.empty()) throw std::invalid_argument("sample_prior: empty attribute pool");
  PriorSample out;
  out.z = normal(rng, {batch_size, z_dim});
  const auto c_dim = static_cast<std::int64_t>(pool.front().size());
  std::vector<float> c;
  c.reserve(static_cast<std::size_t>(batch_size * c_dim));
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (std::int64_t i = 0; i < batch_size; ++i) {
    const auto& a = pool[pick(rng)];
    c.insert(c.end(), a.begin(), a.end());
  }
  out.c = Tensor<float>({batch_size, c_dim}, std::move(c));
  return out;
}

TrainState::TrainState(const TrainConfig& cfg)
    : config(cfg),
      model(cfg.model),
      params(model.init<float>(cfg.seed)),
      optim(make_optimizers<float>(cfg.optim, params)),
      rng(derive_seed(cfg.seed, "train")) {
  config.validate();
}

TrainState::TrainState(const Checkpoint& ckpt)
    : config(ckpt.config), model(ckpt.config.model), params(ckpt.params), optim(ckpt.optim), step(ckpt.step) {
  check_param_layout(model, params);
  std::istringstream is(ckpt.rng_state);
  is >> rng;
  if (!is) throw CheckpointError("checkpoint RNG state is unreadable");
}

Checkpoint TrainState::checkpoint() const {
  std::ostringstream os;
  os << rng;
  return {config, params, optim, step, os.str()};
}

LossReport train_step(TrainState& s, const Batch& batch, const AttributePool& pool, const StepOptions& opt) {
  const Model& m = s.model;
  const std::int64_t b = batch.images.dim(0);
  const std::int64_t z_dim = m.config.z_dim;
  if (b < 2) throw ShapeError("train_step: batch of " + std::to_string(b) + "; batchnorm needs at least 2");
  if (batch.attributes.shape() != Shape{b, m.config.c_dim})
    throw ShapeError("train_step: attributes " + to_string(batch.attributes.shape()) + " do not pair with images " +
                     to_string(batch.images.shape()));
  LossReport r;
  SubstepTrace trace;

  // Fresh noise per sub-step, drawn in a fixed order from the state's stream.
  auto inputs = [&](bool with_prior) {
    SubstepInputs<float> in{batch.images, batch.attributes, normal(s.rng, {b, z_dim}), {}, {}};
    if (with_prior) {
      PriorSample p = sample_prior(b, z_dim, pool, s.rng);
      in.prior_z = std::move(p.z);
      in.prior_c = std::move(p.c);
    }
    return in;
  };
  // Runs one objective on a fresh tape, committing running statistics of
  // layers under `stats`, and updates only the `ns` namespace.
  auto update = [&](const char* name, const char* objective, std::vector<std::string> stats, const std::string& ns,
                    AdamState<float>& adam, auto&& build) {
    Tape<float> tape;
    Forward<float> f(tape, s.params, Mode::Train, s.config.bn);
    f.record_stats_into(&s.params, std::move(stats));
    Var<float> loss = build(f);
    require_finite(objective, value_of(loss), r);
    adam_step(s.params, param_grads(f, tape.backward(loss.id()), ns), adam);
    if (opt.observer) opt.observer->on_substep(name, s);
  };

  if (opt.enc) {
    const auto in = inputs(false);
    update("enc", "encoder", {"enc/"}, "enc/", s.optim.enc,
           [&](Forward<float>& f) { return encoder_objective(f, m, in, r); });
  }
  if (opt.gen) {
    const auto in = inputs(true);
    update("gen", "generator", {"gen/"}, "gen/", s.optim.gen,
           [&](Forward<float>& f) { return generator_objective(f, m, in, s.config.weights, r); });
  }
  if (opt.rec) {
    const SubstepInputs<float> in{batch.images, batch.attributes, {}, {}, {}};
    update("rec", "recognizer", {"dis/trunk/", "rec/"}, "rec/", s.optim.rec, [&](Forward<float>& f) {
      auto loss = recognizer_objective(f, m, in, r, &trace);
      if (opt.observer) opt.observer->on_recognizer_inputs("real", trace.rec_real);
      return loss;
    });
  }
  if (opt.dis) {
    const auto in = inputs(true);
    update("dis", "discriminator", {}, "dis/", s.optim.dis, [&](Forward<float>& f) {
      auto loss = discriminator_objective(f, m, in, r, &trace);
      if (opt.observer)
        opt.observer->on_discriminator_inputs(trace.dis_real, trace.dis_generated, trace.dis_reconstructed);
      return loss;
    });
  }
  return r;
}

EvalMetrics evaluate(const Model& model, const ParamStore<float>& params, const std::vector<Sample>& heldout,
                     const EvalOptions& options) {
  EvalMetrics out;
  if (heldout.empty()) return out;
  const auto groups = eval_groups(model.config);
  const std::int64_t n = static_cast<std::int64_t>(heldout.size());
  const std::int64_t step = std::max<std::int64_t>(1, options.batch_size);

  double recog_hits = 0, recog_total = 0;
  double fid_hits = 0, fid_total = 0;
  double keep_hits = 0, keep_total = 0;
  double sq_err = 0, px_total = 0;

  for (std::int64_t begin = 0; begin < n; begin += step) {
    const std::int64_t end = std::min(n, begin + step);
    std::vector<std::size_t> idx(static_cast<std::size_t>(end - begin));
    std::iota(idx.begin(), idx.end(), static_cast<std::size_t>(begin));
    const Batch batch = make_batch(heldout, idx);
    const std::int64_t b = end - begin;

    const Tensor<float> q_real = recognize_images(model, params, batch.images);
    const Tensor<float> mu = encode_images(model, params, batch.images).mu;
    const Tensor<float> recon = generate_images(model, params, mu, batch.attributes);
    for (std::size_t i = 0; i < recon.size(); ++i) {
      const double d = static_cast<double>(recon[i]) - batch.images[i];
      sq_err += d * d;
    }
    px_total += static_cast<double>(recon.size());

    for (std::int64_t i = 0; i < b; ++i)
      for (const auto& g : groups) {
        recog_hits += g.read(row(q_real, i)) == g.read(row(batch.attributes, i));
        recog_total += 1;
      }

    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& g = groups[gi];
      for (std::int64_t target = 0; target < g.classes(); ++target) {
        // Edited attribute rows; images whose label already equals the
        // target are skipped unless this is an identity edit.
        Tensor<float> c = batch.attributes;
        std::vector<bool> active(static_cast<std::size_t>(b));
        bool any = false;
        for (std::int64_t i = 0; i < b; ++i) {
          const std::int64_t label = g.read(row(batch.attributes, i));
          active[i] = options.identity_edit ? label == target : label != target;
          if (!options.identity_edit) g.write(c.data().subspan(i * c.dim(1), c.dim(1)), target);
          any = any || active[i];
        }
        if (!any) continue;
        const Tensor<float> q_edit = recognize_images(model, params, generate_images(model, params, mu, c));
        for (std::int64_t i = 0; i < b; ++i) {
          if (!active[i]) continue;
          fid_hits += g.read(row(q_edit, i)) == target;
          fid_total += 1;
          for (std::size_t hi = 0; hi < groups.size(); ++hi) {
            if (hi == gi) continue;
            keep_hits += groups[hi].read(row(q_edit, i)) == groups[hi].read(row(q_real, i));
            keep_total += 1;
          }
        }
      }
    }
  }
  const double nan = std::nan("");
  out.recog_accuracy = recog_total > 0 ? recog_hits / recog_total : nan;
  out.edit_fidelity = fid_total > 0 ? fid_hits / fid_total : nan;
  out.preservation = keep_total > 0 ? keep_hits / keep_total : nan;
  out.recon_error = sq_err / px_total;
  return out;
}

std::string metrics_record(std::int64_t step, const LossReport& r) {
  ordered_json j;
  j["step"] = step;
  j["l_prior"] = r.l_prior;
  j["l_recon"] = r.l_recon;
  j["l_recog"] = r.l_recog;
  j["l_gen_adv"] = r.l_gen_adv;
  j["l_dis"] = r.l_dis;
  j["l_enc"] = r.l_enc;
  j["l_gen"] = r.l_gen;
  return j.dump();
}

namespace {

// Keeps metrics records up to and including `step`, so a resumed run
// rewrites whatever an interrupted run logged after its last checkpoint.
void truncate_log(const fs::path& path, std::int64_t step) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::string line, kept;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("step")) continue;
    if (j["step"].get<std::int64_t>() <= step) kept += line + "\n";
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  out << kept;
}

std::ofstream open_log(const fs::path& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open " + path.string());
  return out;
}

void write_samples(const TrainState& s, const AttributePool& pool, const fs::path& path) {
  Rng rng(derive_seed(s.config.seed, "samples"));
  PriorSample p = sample_prior(16, s.model.config.z_dim, pool, rng);
  write_file(path.string(), encode_png(tile_grid(generate_images(s.model, s.params, p.z, p.c))));
}

std::string eval_record(std::int64_t step, const EvalMetrics& e) {
  ordered_json j;
  j["step"] = step;
  j["recog_accuracy"] = e.recog_accuracy;
  j["edit_fidelity"] = e.edit_fidelity;
  j["preservation"] = e.preservation;
  j["recon_error"] = e.recon_error;
  return j.dump();
}

}  // namespace

RunResult run(const TrainConfig& config, const DatasetSplit& data, const RunOptions& options) {
  config.validate();
  if (data.train.empty()) throw std::invalid_argument("run: training set is empty");
  const fs::path dir(options.out_dir);
  fs::create_directories(dir);
  const fs::path metrics_path = dir / "metrics.log";
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  std::optional<TrainState> state;
  if (options.resume) {
    Checkpoint ckpt = load_checkpoint(*options.resume);
    check_resumable(ckpt, config);
    state.emplace(ckpt);
    state->config = config;
    truncate_log(metrics_path, state->step);
    truncate_log(dir / "eval.log", state->step);
    log("resumed from " + *options.resume + " at step " + std::to_string(state->step));
  } else {
    state.emplace(config);
    for (const char* name : {"metrics.log", "timing.log", "eval.log"}) std::ofstream(dir / name, std::ios::trunc);
  }
  TrainState& s = *state;
  const AttributePool pool = attribute_pool(data.train);
  if (static_cast<std::int64_t>(pool.front().size()) != config.model.c_dim)
    throw std::invalid_argument("dataset has " + std::to_string(pool.front().size()) + " attributes, model c_dim is " +
                                std::to_string(config.model.c_dim));

  std::ofstream metrics = open_log(metrics_path);
  std::ofstream timing = open_log(dir / "timing.log");
  std::ofstream evals = open_log(dir / "eval.log");
  if (config.sample_every > 0) fs::create_directories(dir / "samples");

  RunResult result;
  std::int64_t last_eval = -1;
  auto run_eval = [&] {
    if (data.heldout.empty()) return;
    result.eval = evaluate(s.model, s.params, data.heldout);
    evals << eval_record(s.step, *result.eval) << "\n" << std::flush;
    last_eval = s.step;
    log("eval " + eval_record(s.step, *result.eval));
  };

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  while (s.step < config.total_steps) {
    const std::int64_t step = s.step + 1;
    const auto t0 = clock::now();
    const Batch batch = make_batch(data.train, batch_indices(data.train.size(), config.batch_size, config.seed, step));
    const LossReport r = train_step(s, batch, pool);
    s.step = step;
    result.reports.push_back(r);
    metrics << metrics_record(step, r) << "\n" << std::flush;
    if (!metrics) throw IoError("write failed for " + metrics_path.string());
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    const double total = std::chrono::duration<double>(clock::now() - start).count();
    timing << "{\"step\":" << step << ",\"seconds\":" << dt << ",\"elapsed\":" << total << "}\n" << std::flush;

    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0)
      save_checkpoint(s.checkpoint(), (dir / step_name("step_", step, ".ckpt")).string());
    if (config.sample_every > 0 && step % config.sample_every == 0)
      write_samples(s, pool, dir / "samples" / step_name("step_", step, ".png"));
    if (config.eval_every > 0 && step % config.eval_every == 0) run_eval();
    if (step % 50 == 0 || step == config.total_steps) log("step " + std::to_string(step) + " " + r.describe());
  }
  if (last_eval != s.step) run_eval();
  result.final = s.checkpoint();
  save_checkpoint(result.final, (dir / "final.ckpt").string());
  return result;
}

}  // namespace vigan
