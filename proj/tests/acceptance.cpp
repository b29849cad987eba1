// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Arguments select criteria by number (default: all).
//
//   acceptance [--desk CONFIG] [--cli PATH] [N ...]

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "service.hpp"
#include "vigan/checkpoint.hpp"
#include "vigan/gradcheck.hpp"
#include "vigan/image_codec.hpp"
#include "vigan/objectives.hpp"
#include "vigan/optimizer.hpp"
#include "vigan/trainer.hpp"
#include "vigan/vigan.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vigan;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("vigan_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  const auto b = read_file(p.string());
  return {b.begin(), b.end()};
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

TrainConfig tiny() { return load_train_config(std::string(VIGAN_SOURCE_DIR) + "/configs/tiny.json"); }

struct Buffer {
  vigan_buffer b{nullptr, 0};
  ~Buffer() { vigan_buffer_free(&b); }
  std::string text() const { return {reinterpret_cast<const char*>(b.data), b.size}; }
  std::vector<std::uint8_t> bytes() const { return {b.data, b.data + b.size}; }
};

// 1: finite-difference gradient suite.
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  const auto results = run_gradcheck_suite();
  const double elapsed = seconds_since(t0);
  double op_err = 0, loss_err = 0;
  int failed = 0;
  std::string first_failure;
  for (const auto& r : results) {
    (r.kind == "op" ? op_err : loss_err) = std::max(r.kind == "op" ? op_err : loss_err, r.max_error);
    if (!r.passed()) {
      ++failed;
      if (first_failure.empty()) first_failure = " first failure " + r.name;
    }
  }
  const bool pass = !results.empty() && failed == 0 && elapsed < 120.0;
  return {pass, std::to_string(results.size()) + " cases, " + std::to_string(failed) + " failed, max op error " +
                    fmt(op_err) + " (< 1e-5), max loss/objective error " + fmt(loss_err) + " (< 1e-3), " +
                    fmt(elapsed) + " s (< 120)" + first_failure};
}

double kl_closed(const std::vector<double>& mu, const std::vector<double>& logvar) {
  Tape<double> tape;
  const auto d = static_cast<std::int64_t>(mu.size());
  return kl_prior(EncoderOutput<double>{constant(tape, Tensor<double>({1, d}, mu)),
                                        constant(tape, Tensor<double>({1, d}, logvar))})
      .value()
      .item();
}

// E_q[log q(z) - log p(z)] by sampling z ~ q.
double kl_sampled(const std::vector<double>& mu, const std::vector<double>& logvar, std::int64_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double acc = 0;
  for (std::int64_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double e = normal(rng);
      const double z = mu[i] + std::exp(0.5 * logvar[i]) * e;
      acc += -0.5 * e * e - 0.5 * logvar[i] + 0.5 * z * z;
    }
  return acc / static_cast<double>(n);
}

// 2: closed-form KL against Monte Carlo.
Outcome kl_oracle() {
  bool pass = std::abs(kl_closed({1, 0}, {0, 0}) - 0.5) < 1e-9 &&
              std::abs(kl_closed({0}, {std::log(4.0)}) - 0.806853) < 1e-6;
  std::mt19937_64 rng(20260101);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<std::pair<std::vector<double>, std::vector<double>>> cases = {{{1, 0}, {0, 0}}, {{0}, {std::log(4.0)}}};
  for (int i = 0; i < 10; ++i) cases.push_back({{u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}});
  double worst = 0;
  for (const auto& [mu, lv] : cases) worst = std::max(worst, std::abs(kl_closed(mu, lv) - kl_sampled(mu, lv, 1000000, rng)));
  pass = pass && worst < 0.01;
  return {pass, std::to_string(cases.size()) + " cases incl. 0.5 and 0.806853, max |closed - sampled| " + fmt(worst) +
                    " (< 0.01)"};
}

// 3: reparameterization statistics.
Outcome reparam_statistics() {
  Tape<double> tape;
  const std::int64_t n = 100000;
  Rng rng(31);
  Tensor<double> eps({n, 1});
  fill_normal<double>(rng, eps.data());
  const auto z = reparameterize(EncoderOutput<double>{constant(tape, Tensor<double>({n, 1}, 1.0)),
                                                      constant(tape, Tensor<double>({n, 1}, std::log(4.0)))},
                                constant(tape, eps))
                     .value();
  double mean = 0, var = 0;
  for (double v : z.data()) mean += v / static_cast<double>(n);
  for (double v : z.data()) var += (v - mean) * (v - mean) / static_cast<double>(n - 1);

  const auto mu = Tensor<double>::from({0.7, -2.5, 3.25}, {1, 3});
  const auto z0 = reparameterize(EncoderOutput<double>{constant(tape, mu),
                                                       constant(tape, Tensor<double>::from({0.3, -1.0, 2.0}, {1, 3}))},
                                 constant(tape, Tensor<double>::zeros({1, 3})))
                      .value();
  const bool exact = z0 == mu;
  const bool pass = std::abs(mean - 1.0) <= 0.02 && std::abs(var - 4.0) <= 0.1 && exact;
  return {pass, "mean " + fmt(mean) + " (1 +- 0.02), variance " + fmt(var) + " (4 +- 0.1), eps=0 gives mu " +
                    (exact ? "exactly" : "NOT exactly")};
}

// 4: Adam trace and default learning rates.
Outcome adam_oracle() {
  // theta_t on theta^2 from theta_0 = 1, computed with 50-digit decimals.
  const double expected[5] = {0.999000000005, 0.99800002621383436681, 0.99700009606514093434, 0.99600022692576347702,
                              0.99500043605239199898};
  ParamStore<double> p;
  p.params.emplace("enc/theta", Tensor<double>::from({1.0}, {1}));
  auto s = make_adam<double>("enc/", {0.001, 0.9, 0.999, 1e-8}, p);
  double worst = 0;
  for (double want : expected) {
    const double theta = p.param("enc/theta")[0];
    adam_step(p, {{"enc/theta", Tensor<double>::from({2 * theta}, {1})}}, s);
    worst = std::max(worst, std::abs(p.param("enc/theta")[0] - want));
  }
  const OptimizerConfig d;
  const bool lrs = d.enc.lr == 0.001 && d.gen.lr == 0.001 && d.dis.lr == 0.0002 && d.rec.lr == 0.0002;
  return {worst <= 1e-12 && lrs, "max trace error " + fmt(worst) + " (<= 1e-12), default lr enc/gen/dis/rec " +
                                     fmt(d.enc.lr) + "/" + fmt(d.gen.lr) + "/" + fmt(d.dis.lr) + "/" + fmt(d.rec.lr)};
}

double metric_at(const fs::path& log, std::int64_t step, const std::string& key) {
  std::ifstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    const auto j = json::parse(line);
    if (j["step"] == step) return j[key].get<double>();
  }
  throw std::runtime_error("no step " + std::to_string(step) + " in " + log.string());
}

// Edits a few held-out rows to another class of each group and counts how
// often the recognizer agrees with the request.
std::string edit_spot_check(const fs::path& checkpoint) {
  vigan_model* m = nullptr;
  if (vigan_model_load(checkpoint.string().c_str(), 1, &m) != VIGAN_OK) return "spot check: load failed";
  Buffer info;
  vigan_model_info(m, &info.b);
  const auto groups = json::parse(info.text())["groups"];
  const std::int64_t n = json::parse(info.text())["dataset_size"];
  int hits = 0, total = 0;
  for (std::int64_t row = n - 8; row < n; ++row)
    for (const auto& g : groups) {
      const int target = static_cast<int>((row + total) % g["size"].get<int>());
      const json req{{"dataset_index", row}, {"set", {{g["name"].get<std::string>(), target}}}};
      Buffer out;
      if (vigan_edit(m, req.dump().c_str(), nullptr, 0, nullptr, nullptr, &out.b) != VIGAN_OK) continue;
      const auto q = json::parse(out.text())["c_hat_edited"];
      const int off = g["offset"];
      int best = 0;
      for (int k = 1; k < g["size"].get<int>(); ++k)
        if (q[off + k].get<double>() > q[off + best].get<double>()) best = k;
      hits += best == target;
      ++total;
    }
  vigan_model_free(m);
  return "spot check " + std::to_string(hits) + "/" + std::to_string(total) + " edits recognized as requested";
}

// 5: desk-scale training.
Outcome desk_training(const std::string& config_path) {
  const auto cfg = load_train_config(config_path);
  const auto& mc = cfg.model;
  std::set<std::int64_t> sizes;
  for (const auto& g : mc.groups) sizes.insert(g.size);
  const bool setup = mc.image_size == 32 && sizes == std::set<std::int64_t>{4} && cfg.dataset.kind == "glyph" &&
                     cfg.dataset.glyph.n_samples == 2000 && cfg.total_steps >= 100;
  const auto dir = scratch("desk");
  const auto t0 = Clock::now();
  const auto data = load_dataset(cfg.dataset, mc.image_size, mc.channels);
  const auto result = run(cfg, data, {dir.string(), std::nullopt, nullptr});
  const double elapsed = seconds_since(t0);
  if (!result.eval) return {false, "no evaluation recorded"};
  const auto& e = *result.eval;
  const double r100 = metric_at(dir / "metrics.log", 100, "l_recon");
  const double rlast = metric_at(dir / "metrics.log", cfg.total_steps, "l_recon");
  const bool a = e.recog_accuracy >= 0.95, b = e.edit_fidelity >= 0.80, c = e.preservation >= 0.80,
             d = rlast <= 0.5 * r100, t = elapsed <= 600.0;
  const auto mark = [](bool ok) { return ok ? "ok" : "MISS"; };
  std::string detail = std::string("(a) accuracy ") + fmt(e.recog_accuracy) + " >= 0.95 " + mark(a) + "; (b) fidelity " +
                       fmt(e.edit_fidelity) + " >= 0.8 " + mark(b) + "; (c) preservation " + fmt(e.preservation) +
                       " >= 0.8 " + mark(c) + "; (d) recon loss step " + std::to_string(cfg.total_steps) + " / step 100 = " +
                       fmt(rlast) + " / " + fmt(r100) + " = " + fmt(rlast / r100) + " <= 0.5 " + mark(d) + "; " +
                       fmt(elapsed) + " s <= 600 " + mark(t) + "; " + edit_spot_check(dir / "final.ckpt");
  if (!setup) detail += "; config is not the desk setup";
  return {setup && a && b && c && d && t, detail};
}

std::set<std::string> changed(const ParamStore<float>& a, const ParamStore<float>& b) {
  std::set<std::string> out;
  for (const auto& [name, t] : a.params)
    if (!(t == b.params.at(name))) out.insert(name);
  return out;
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

// 6: per-step procedure audits.
Outcome procedure_audit() {
  const auto cfg = tiny();
  const auto data = load_dataset(cfg.dataset, cfg.model.image_size, cfg.model.channels);
  const auto pool = attribute_pool(data.train);
  TrainState state(cfg);
  const std::int64_t steps = 5;
  bool order_ok = true, dis_ok = true, rec_ok = true, isolated = true;
  const std::vector<std::string> expected = {"enc", "gen", "rec", "dis"};
  for (std::int64_t step = 1; step <= steps; ++step) {
    Audit audit;
    audit.last = state.params;
    train_step(state, make_batch(data.train, batch_indices(data.train.size(), cfg.batch_size, cfg.seed, step)), pool,
               {true, true, true, true, &audit});
    order_ok = order_ok && audit.order == expected;
    dis_ok = dis_ok && audit.dis_inputs.size() == 1 && audit.dis_inputs[0][0] == cfg.batch_size &&
             audit.dis_inputs[0][1] == cfg.batch_size && audit.dis_inputs[0][2] == cfg.batch_size;
    rec_ok = rec_ok && !audit.rec_inputs.empty();
    for (const auto& [src, n] : audit.rec_inputs) rec_ok = rec_ok && src == "real" && n == cfg.batch_size;
    for (std::size_t i = 0; i < audit.touched.size() && i < expected.size(); ++i)
      for (const auto& name : audit.touched[i]) isolated = isolated && name.rfind(expected[i] + "/", 0) == 0;
  }
  const auto yes = [](bool ok) { return ok ? "yes" : "NO"; };
  return {order_ok && dis_ok && rec_ok && isolated,
          std::to_string(steps) + " steps; order enc>gen>rec>dis " + yes(order_ok) + "; discriminator sees three sets of " +
              std::to_string(cfg.batch_size) + " " + yes(dis_ok) + "; recognizer sees only real images " + yes(rec_ok) +
              "; each sub-step updates only its own parameters " + yes(isolated)};
}

// 7: checkpoint persistence and deterministic resume.
Outcome persistence() {
  auto cfg = tiny();
  cfg.checkpoint_every = 5;
  const auto data = load_dataset(cfg.dataset, cfg.model.image_size, cfg.model.channels);
  const auto straight = scratch("straight");
  run(cfg, data, {straight.string(), std::nullopt, nullptr});

  const auto first = read_file((straight / "final.ckpt").string());
  const auto copy = straight / "copy.ckpt";
  save_checkpoint(load_checkpoint((straight / "final.ckpt").string()), copy.string());
  const bool identical = read_file(copy.string()) == first;

  std::vector<std::uint8_t> bad = first;
  bad[bad.size() / 2] ^= 0x01;
  bool corrupt_detected = false;
  try {
    parse_checkpoint(bad);
  } catch (const CheckpointCorrupt&) {
    corrupt_detected = true;
  }

  auto half = cfg;
  half.total_steps = cfg.total_steps / 2;
  const auto resumed = scratch("resumed");
  run(half, data, {resumed.string(), std::nullopt, nullptr});
  run(cfg, data, {resumed.string(), (resumed / "final.ckpt").string(), nullptr});
  const bool same_log = slurp(resumed / "metrics.log") == slurp(straight / "metrics.log");
  const bool same_final = read_file((resumed / "final.ckpt").string()) == first;
  const auto yes = [](bool ok) { return ok ? "yes" : "NO"; };
  return {identical && corrupt_detected && same_log && same_final,
          std::string("save>load>save byte-identical ") + yes(identical) + "; flipped byte rejected by CRC " +
              yes(corrupt_detected) + "; resumed metrics.log identical to uninterrupted run " + yes(same_log) +
              "; final checkpoints identical " + yes(same_final)};
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

// 8: /edit over HTTP against the CLI.
Outcome serve_equivalence(const std::string& cli) {
  auto cfg = tiny();
  cfg.total_steps = 60;
  const auto dir = scratch("serve");
  const auto data = load_dataset(cfg.dataset, cfg.model.image_size, cfg.model.channels);
  run(cfg, data, {dir.string(), std::nullopt, nullptr});
  const auto ckpt = (dir / "final.ckpt").string();

  vigan_model* model = nullptr;
  if (vigan_model_load(ckpt.c_str(), 1, &model) != VIGAN_OK) return {false, vigan_last_error()};
  vigan_tools::Service service(model);
  httplib::Server server;
  service.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);

  // Upload source: a held-out image the model never trained on.
  const auto upload = dir / "upload.png";
  write_file(upload.string(), encode_png(data.heldout.front().image));

  struct Case {
    json request;
    std::string args;
  };
  const std::vector<Case> cases = {
      {{{"dataset_index", 3}, {"set", {{"slot1", 1}}}}, "--index 3 --set slot1=1"},
      {{{"dataset_index", 7}, {"set", {{"slot2", 0}, {"0", 1}}}, {"seed", 42}}, "--index 7 --set slot2=0 --set 0=1 --seed 42"},
      {{{"image", vigan_tools::base64_encode(read_file(upload.string()))}, {"set", {{"slot2", 1}}}, {"seed", 5}},
       "--image " + quote(upload.string()) + " --set slot2=1 --seed 5"},
  };
  int matched = 0;
  std::string why;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto ed = dir / ("cli_" + std::to_string(i) + ".png");
    const auto tri = dir / ("cli_tri_" + std::to_string(i) + ".png");
    const std::string cmd = quote(cli) + " edit --checkpoint " + quote(ckpt) + " " + cases[i].args + " -o " +
                            quote(tri.string()) + " --edited-out " + quote(ed.string()) + " > /dev/null";
    if (std::system(cmd.c_str()) != 0) {
      why += " case " + std::to_string(i) + ": CLI failed";
      continue;
    }
    auto res = client.Post("/edit", cases[i].request.dump(), "application/json");
    if (!res || res->status != 200) {
      why += " case " + std::to_string(i) + ": HTTP " + (res ? std::to_string(res->status) : "error");
      continue;
    }
    const auto body = json::parse(res->body);
    const auto image = vigan_tools::base64_decode(body["image"].get<std::string>());
    const auto panel = vigan_tools::base64_decode(body["triptych"].get<std::string>());
    if (image && panel && *image == read_file(ed.string()) && *panel == read_file(tri.string()))
      ++matched;
    else
      why += " case " + std::to_string(i) + ": bytes differ";
  }
  server.stop();
  th.join();
  vigan_model_free(model);
  const bool pass = matched == static_cast<int>(cases.size());
  return {pass, std::to_string(matched) + "/" + std::to_string(cases.size()) +
                    " edits (dataset row, seeded posterior sample, uploaded image) byte-identical to the CLI" + why};
}

}  // namespace

int main(int argc, char** argv) {
  std::string desk = std::string(VIGAN_SOURCE_DIR) + "/configs/desk.json";
  std::string cli = VIGAN_CLI;
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--desk" && i + 1 < argc) {
      desk = argv[++i];
    } else if (a == "--cli" && i + 1 < argc) {
      cli = argv[++i];
    } else {
      const int n = std::atoi(a.c_str());
      if (n < 1 || n > 8) {
        std::cerr << "usage: acceptance [--desk CONFIG] [--cli PATH] [1-8 ...]\n";
        return 2;
      }
      selected.insert(n);
    }
  }

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"KL oracle", kl_oracle},
      {"reparameterization statistics", reparam_statistics},
      {"Adam oracle", adam_oracle},
      {"desk training", [&] { return desk_training(desk); }},
      {"procedure audits", procedure_audit},
      {"persistence", persistence},
      {"serve/library equivalence", [&] { return serve_equivalence(cli); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(n)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "CRITERION " << n << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": " << o.detail
              << " [" << fmt(seconds_since(t0)) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
