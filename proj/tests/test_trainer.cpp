// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <array>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "vigan/image_codec.hpp"
#include "vigan/inference.hpp"
#include "vigan/trainer.hpp"

using namespace vigan;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny() { return load_train_config(std::string(VIGAN_SOURCE_DIR) + "/configs/tiny.json"); }

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vigan_test_trainer_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  const auto b = read_file(p.string());
  return {b.begin(), b.end()};
}

// Parameters (not running statistics) whose values differ.
std::set<std::string> changed(const ParamStore<float>& a, const ParamStore<float>& b) {
  std::set<std::string> out;
  for (const auto& [name, t] : a.params)
    if (!(t == b.params.at(name))) out.insert(name);
  return out;
}

bool all_under(const std::set<std::string>& names, const std::string& prefix) {
  for (const auto& n : names)
    if (n.rfind(prefix, 0) != 0) return false;
  return true;
}

struct Audit : StepObserver {
  std::vector<std::string> order;
  std::vector<std::set<std::string>> touched;
  std::vector<std::array<std::int64_t, 3>> dis_inputs;
  std::vector<std::pair<std::string, std::int64_t>> rec_inputs;
  ParamStore<float> last;

  void on_substep(std::string_view name, const TrainState& s) override {
    order.emplace_back(name);
    touched.push_back(changed(last, s.params));
    last = s.params;
  }
  void on_discriminator_inputs(std::int64_t r, std::int64_t g, std::int64_t c) override { dis_inputs.push_back({r, g, c}); }
  void on_recognizer_inputs(std::string_view src, std::int64_t n) override { rec_inputs.emplace_back(src, n); }
};

}  // namespace

TEST_CASE("one epoch uses every sample exactly once") {
  std::multiset<std::size_t> seen;
  for (std::int64_t step = 1; step <= 10; ++step) {
    const auto idx = batch_indices(40, 4, 7, step);
    CHECK(idx.size() == 4);
    seen.insert(idx.begin(), idx.end());
  }
  CHECK(seen.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) CHECK(seen.count(i) == 1);
  CHECK(batch_indices(40, 4, 7, 11) != batch_indices(40, 4, 7, 1));
  CHECK(batch_indices(40, 4, 7, 3) == batch_indices(40, 4, 7, 3));
  // A remainder smaller than a batch is dropped.
  std::set<std::size_t> partial;
  for (std::int64_t step = 1; step <= 3; ++step)
    for (auto i : batch_indices(14, 4, 1, step)) partial.insert(i);
  CHECK(partial.size() == 12);
  CHECK_THROWS_AS(batch_indices(3, 4, 1, 1), std::invalid_argument);
}

TEST_CASE("prior samples: standard normal z and c drawn from the pool") {
  const AttributePool pool = {{1, 0, 0, 1}, {0, 1, 1, 0}, {1, 0, 1, 0}};
  Rng rng(13);
  const std::int64_t n = 100000;
  const auto p = sample_prior(n, 1, pool, rng);
  double mean = 0, var = 0;
  for (float v : p.z.data()) mean += v / static_cast<double>(n);
  for (float v : p.z.data()) var += (v - mean) * (v - mean) / static_cast<double>(n - 1);
  CHECK(std::abs(mean) <= 0.02);
  CHECK(std::abs(var - 1.0) <= 0.05);
  std::set<std::vector<float>> members(pool.begin(), pool.end());
  std::map<std::vector<float>, int> freq;
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<float> r(p.c.data().begin() + i * 4, p.c.data().begin() + (i + 1) * 4);
    CHECK(members.count(r) == 1);
    ++freq[r];
  }
  for (const auto& [r, k] : freq) CHECK(std::abs(k - n / 3.0) < 4 * std::sqrt(n * (1 / 3.0) * (2 / 3.0)));
  CHECK_THROWS_AS(sample_prior(2, 1, {}, rng), std::invalid_argument);
}

TEST_CASE("sub-step order, inputs and parameter isolation") {
  const auto cfg = tiny();
  const auto data = load_dataset(cfg.dataset, cfg.model.image_size, cfg.model.channels);
  TrainState s(cfg);
  const auto pool = attribute_pool(data.train);
  Audit audit;
  audit.last = s.params;
  StepOptions opt;
  opt.observer = &audit;
  for (std::int64_t step = 1; step <= 3; ++step) {
    train_step(s, make_batch(data.train, batch_indices(data.train.size(), cfg.batch_size, cfg.seed, step)), pool, opt);
  }
  REQUIRE(audit.order.size() == 12);
  for (int k = 0; k < 3; ++k) {
    CHECK(audit.order[4 * k + 0] == "enc");
    CHECK(audit.order[4 * k + 1] == "gen");
    CHECK(audit.order[4 * k + 2] == "rec");
    CHECK(audit.order[4 * k + 3] == "dis");
    CHECK(all_under(audit.touched[4 * k + 0], "enc/"));
    CHECK(all_under(audit.touched[4 * k + 1], "gen/"));
    CHECK(all_under(audit.touched[4 * k + 2], "rec/"));
    CHECK(all_under(audit.touched[4 * k + 3], "dis/"));
    for (int j = 0; j < 4; ++j) CHECK_FALSE(audit.touched[4 * k + j].empty());
  }
  REQUIRE(audit.dis_inputs.size() == 3);
  for (const auto& d : audit.dis_inputs) CHECK(d == std::array<std::int64_t, 3>{4, 4, 4});
  REQUIRE(audit.rec_inputs.size() == 3);
  for (const auto& [src, n] : audit.rec_inputs) {
    CHECK(src == "real");
    CHECK(n == 4);
  }
}

TEST_CASE("disabling sub-steps confines updates to the enabled namespace") {
  const auto cfg = tiny();
  const auto data = load_dataset(cfg.dataset, cfg.model.image_size, cfg.model.channels);
  const auto pool = attribute_pool(data.train);
  const auto batch = make_batch(data.train, batch_indices(data.train.size(), cfg.batch_size, cfg.seed, 1));
  struct Case {
    StepOptions opt;
    const char* ns;
  };
  for (const auto& c : {Case{{true, false, false, false}, "enc/"}, Case{{false, true, false, false}, "gen/"},
                        Case{{false, false, true, false}, "rec/"}, Case{{false, false, false, true}, "dis/"}}) {
    TrainState s(cfg);
    const auto before = s.params;
    train_step(s, batch, pool, c.opt);
    const auto diff = changed(before, s.params);
    CHECK_FALSE(diff.empty());
    CHECK_MESSAGE(all_under(diff, c.ns), c.ns);
  }
}

TEST_CASE("malformed batches are rejected") {
  const auto cfg = tiny();
  TrainState s(cfg);
  const AttributePool pool = {{1, 0, 1, 0}};
  Batch one{Tensor<float>({1, 1, 16, 16}), Tensor<float>({1, 4})};
  CHECK_THROWS_AS(train_step(s, one, pool), ShapeError);
  Batch mismatch{Tensor<float>({2, 1, 16, 16}), Tensor<float>({2, 3})};
  CHECK_THROWS_AS(train_step(s, mismatch, pool), ShapeError);
}

TEST_CASE("same seed and config give an identical metrics log") {
  const auto cfg = tiny();
  const auto data = load_dataset(cfg.dataset, cfg.model.image_size, cfg.model.channels);
  const auto a = scratch("det_a"), b = scratch("det_b");
  run(cfg, data, {a.string(), std::nullopt, nullptr});
  run(cfg, data, {b.string(), std::nullopt, nullptr});
  CHECK(slurp(a / "metrics.log") == slurp(b / "metrics.log"));
  CHECK(read_file((a / "final.ckpt").string()) == read_file((b / "final.ckpt").string()));
}

TEST_CASE("resumed training continues the metrics log deterministically") {
  auto cfg = tiny();
  const auto data = load_dataset(cfg.dataset, cfg.model.image_size, cfg.model.channels);
  const auto straight = scratch("straight");
  cfg.checkpoint_every = 5;
  const auto full = run(cfg, data, {straight.string(), std::nullopt, nullptr});
  CHECK(full.reports.size() == 10);

  SUBCASE("from a run that stopped at the checkpoint") {
    auto first = cfg;
    first.total_steps = 5;
    const auto dir = scratch("halves");
    run(first, data, {dir.string(), std::nullopt, nullptr});
    const auto rest = run(cfg, data, {dir.string(), (dir / "final.ckpt").string(), nullptr});
    CHECK(rest.reports.size() == 5);
    CHECK(slurp(dir / "metrics.log") == slurp(straight / "metrics.log"));
    CHECK(read_file((dir / "final.ckpt").string()) == read_file((straight / "final.ckpt").string()));
  }
  SUBCASE("from a periodic checkpoint of a longer run") {
    const auto dir = scratch("rewind");
    run(cfg, data, {dir.string(), std::nullopt, nullptr});
    run(cfg, data, {dir.string(), (dir / "step_000005.ckpt").string(), nullptr});
    CHECK(slurp(dir / "metrics.log") == slurp(straight / "metrics.log"));
  }
  SUBCASE("with an incompatible config") {
    auto other = cfg;
    other.weights.lambda2 = 2;
    const auto dir = scratch("mismatch");
    CHECK_THROWS_AS(run(other, data, {dir.string(), (straight / "step_000005.ckpt").string(), nullptr}),
                    CheckpointConfigMismatch);
  }
}

TEST_CASE("identity edit fidelity equals recognizer accuracy on reconstructions") {
  auto cfg = tiny();
  const auto data = load_dataset(cfg.dataset, cfg.model.image_size, cfg.model.channels);
  TrainState s(cfg);
  const auto pool = attribute_pool(data.train);
  for (std::int64_t step = 1; step <= 5; ++step)
    train_step(s, make_batch(data.train, batch_indices(data.train.size(), cfg.batch_size, cfg.seed, step)), pool);

  EvalOptions opt;
  opt.identity_edit = true;
  opt.batch_size = 3;  // several partial batches
  const auto m = evaluate(s.model, s.params, data.heldout, opt);

  std::vector<std::size_t> all(data.heldout.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto batch = make_batch(data.heldout, all);
  const auto mu = encode_images(s.model, s.params, batch.images).mu;
  const auto q = recognize_images(s.model, s.params, generate_images(s.model, s.params, mu, batch.attributes));
  double hits = 0, total = 0;
  for (std::int64_t i = 0; i < batch.images.dim(0); ++i)
    for (const auto& g : cfg.model.groups) {
      hits += argmax(q.data().subspan(i * 4, 4), g.offset, g.size) ==
              argmax(batch.attributes.data().subspan(i * 4, 4), g.offset, g.size);
      total += 1;
    }
  CHECK(m.edit_fidelity == doctest::Approx(hits / total));
  CHECK(m.preservation == doctest::Approx(1.0));
}

TEST_CASE("evaluation metrics are fractions and recon error is a pixel MSE") {
  const auto cfg = tiny();
  const auto data = load_dataset(cfg.dataset, cfg.model.image_size, cfg.model.channels);
  TrainState s(cfg);
  const auto m = evaluate(s.model, s.params, data.heldout);
  for (double v : {m.recog_accuracy, m.edit_fidelity, m.preservation}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  std::vector<std::size_t> all(data.heldout.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto batch = make_batch(data.heldout, all);
  const auto rec =
      generate_images(s.model, s.params, encode_images(s.model, s.params, batch.images).mu, batch.attributes);
  double se = 0;
  for (std::size_t i = 0; i < rec.size(); ++i) se += std::pow(double(rec[i]) - batch.images[i], 2);
  CHECK(m.recon_error == doctest::Approx(se / rec.size()));
}

TEST_CASE("run writes the advertised artifacts") {
  auto cfg = tiny();
  cfg.total_steps = 4;
  cfg.sample_every = 2;
  cfg.eval_every = 2;
  const auto data = load_dataset(cfg.dataset, cfg.model.image_size, cfg.model.channels);
  const auto dir = scratch("artifacts");
  std::vector<std::string> lines;
  const auto r = run(cfg, data, {dir.string(), std::nullopt, [&](const std::string& l) { lines.push_back(l); }});
  for (const char* f : {"metrics.log", "timing.log", "eval.log", "final.ckpt", "samples/step_000002.png",
                        "samples/step_000004.png"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  CHECK(r.eval.has_value());
  CHECK(r.final.step == 4);
  CHECK_FALSE(lines.empty());
  const auto png = read_file((dir / "samples/step_000004.png").string());
  CHECK(decode_png(png, 1).dim(1) > 16);
}
