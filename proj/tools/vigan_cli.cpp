// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

// vigan: train, sample, edit, gradcheck, dataset, serve, sweep, eval, info.
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "service.hpp"
#include "vigan/vigan.h"

namespace {

using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Buffer {
  vigan_buffer b{nullptr, 0};
  ~Buffer() { vigan_buffer_free(&b); }
  std::string text() const { return {reinterpret_cast<const char*>(b.data), b.size}; }
};

struct ModelHandle {
  vigan_model* m = nullptr;
  ~ModelHandle() { vigan_model_free(m); }
};

int report(vigan_status s) {
  if (s == VIGAN_OK) return kExitOk;
  std::cerr << "error (" << vigan_status_name(s) << "): " << vigan_last_error() << "\n";
  return s == VIGAN_INVALID_ARGUMENT || s == VIGAN_CONFIG ? kExitUsage : kExitFailure;
}

bool read_bytes(const std::string& path, std::vector<std::uint8_t>& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  out.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return true;
}

bool write_bytes(const std::string& path, const vigan_buffer& b) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data), static_cast<std::streamsize>(b.size));
  return static_cast<bool>(out);
}

int write_or_fail(const std::string& path, const vigan_buffer& b) {
  if (write_bytes(path, b)) return kExitOk;
  std::cerr << "error (io): cannot write " << path << "\n";
  return kExitFailure;
}

void print_line(const char* line, void*) {
  std::cout << line << "\n" << std::flush;
}

std::optional<double> parse_number(const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

// KEY=VALUE assignments in command-line order.
bool build_set(const std::vector<std::string>& assignments, ordered_json& set) {
  set = ordered_json::object();
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    const auto value = eq == std::string::npos ? std::nullopt : parse_number(a.substr(eq + 1));
    if (eq == 0 || !value) {
      std::cerr << "error (invalid_argument): expected KEY=NUMBER, got '" << a << "'\n";
      return false;
    }
    set[a.substr(0, eq)] = *value;
  }
  return true;
}

struct TrainArgs {
  std::string config, out, resume;
};

struct SampleArgs {
  std::string checkpoint, out;
  std::int64_t n = 16;
  std::uint64_t seed = 0;
};

struct EditArgs {
  std::string checkpoint, image, out, edited_out, info_out;
  std::optional<std::int64_t> index;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> set;
};

struct GradcheckArgs {
  std::string module = "all", fault, json_out;
};

struct DatasetArgs {
  std::string config, out;
};

struct ServeArgs {
  std::string checkpoint, host = "127.0.0.1";
  int port = 8080;
  std::size_t max_body = 8 << 20;
  bool no_data = false;
};

struct SweepArgs {
  std::string config, out;
  std::vector<double> lambda1{1.0}, lambda2{1.0};
  std::optional<std::int64_t> steps;
};

struct EvalArgs {
  std::string checkpoint;
  bool identity = false;
};

int cmd_train(const TrainArgs& a) {
  Buffer result;
  const vigan_status s = vigan_train(a.config.c_str(), a.out.c_str(), a.resume.empty() ? nullptr : a.resume.c_str(),
                                     print_line, nullptr, &result.b);
  if (s == VIGAN_OK) std::cout << result.text() << "\n";
  return report(s);
}

int cmd_sample(const SampleArgs& a) {
  ModelHandle m;
  if (auto s = vigan_model_load(a.checkpoint.c_str(), 1, &m.m); s != VIGAN_OK) return report(s);
  Buffer png;
  if (auto s = vigan_sample_grid(m.m, a.n, a.seed, &png.b); s != VIGAN_OK) return report(s);
  return write_or_fail(a.out, png.b);
}

int cmd_edit(const EditArgs& a) {
  if (a.image.empty() == !a.index.has_value()) {
    std::cerr << "error (invalid_argument): give exactly one of --image or --index\n";
    return kExitUsage;
  }
  ordered_json req;
  if (a.index) req["dataset_index"] = *a.index;
  if (!build_set(a.set, req["set"])) return kExitUsage;
  if (a.seed) req["seed"] = *a.seed;

  std::vector<std::uint8_t> png;
  if (!a.image.empty() && !read_bytes(a.image, png)) {
    std::cerr << "error (io): cannot open " << a.image << "\n";
    return kExitFailure;
  }
  ModelHandle m;
  if (auto s = vigan_model_load(a.checkpoint.c_str(), a.index ? 1 : 0, &m.m); s != VIGAN_OK) return report(s);
  Buffer edited, panel, info;
  const vigan_status s = vigan_edit(m.m, req.dump().c_str(), a.image.empty() ? nullptr : png.data(), png.size(),
                                    a.edited_out.empty() ? nullptr : &edited.b, &panel.b, &info.b);
  if (s != VIGAN_OK) return report(s);
  if (int rc = write_or_fail(a.out, panel.b); rc != kExitOk) return rc;
  if (!a.edited_out.empty())
    if (int rc = write_or_fail(a.edited_out, edited.b); rc != kExitOk) return rc;
  if (!a.info_out.empty())
    if (int rc = write_or_fail(a.info_out, info.b); rc != kExitOk) return rc;
  std::cout << info.text() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const GradcheckArgs& a) {
  Buffer rep;
  int passed = 0;
  const vigan_status s =
      vigan_gradcheck(a.module.c_str(), a.fault.empty() ? nullptr : a.fault.c_str(), &rep.b, &passed);
  if (s != VIGAN_OK && s != VIGAN_CHECK_FAILED) return report(s);
  const auto results = ordered_json::parse(rep.text());
  for (const auto& r : results) {
    std::printf("%-26s %-9s max_rel_err %.3e  tol %.0e  checks %-5lld %s\n", r["name"].get<std::string>().c_str(),
                r["kind"].get<std::string>().c_str(), r["max_error"].get<double>(), r["tolerance"].get<double>(),
                static_cast<long long>(r["checks"].get<std::int64_t>()), r["passed"].get<bool>() ? "PASS" : "FAIL");
  }
  if (!a.json_out.empty())
    if (int rc = write_or_fail(a.json_out, rep.b); rc != kExitOk) return rc;
  std::printf("%s\n", passed ? "gradcheck: all passed" : "gradcheck: FAILED");
  return passed ? kExitOk : kExitFailure;
}

int cmd_dataset(const DatasetArgs& a) { return report(vigan_dataset_export(a.config.c_str(), a.out.c_str())); }

httplib::Server* g_server = nullptr;

int cmd_serve(const ServeArgs& a) {
  ModelHandle m;
  if (auto s = vigan_model_load(a.checkpoint.c_str(), a.no_data ? 0 : 1, &m.m); s != VIGAN_OK) return report(s);
  vigan_tools::Service service(m.m, {a.max_body});
  httplib::Server server;
  service.mount(server);
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->stop(); });
  std::signal(SIGTERM, [](int) { g_server->stop(); });
  std::cout << "listening on http://" << a.host << ":" << a.port << "\n" << std::flush;
  if (!server.listen(a.host, a.port)) {
    std::cerr << "error (io): cannot listen on " << a.host << ":" << a.port << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_sweep(const SweepArgs& a) {
  std::ifstream in(a.config);
  if (!in) {
    std::cerr << "error (io): cannot open " << a.config << "\n";
    return kExitFailure;
  }
  ordered_json base = ordered_json::parse(in, nullptr, false);
  if (!base.is_object()) {
    std::cerr << "error (config): " << a.config << " is not a JSON object\n";
    return kExitUsage;
  }
  if (a.steps) base["total_steps"] = *a.steps;
  ordered_json summary = ordered_json::array();
  int rc = kExitOk;
  for (double l1 : a.lambda1) {
    for (double l2 : a.lambda2) {
      ordered_json cfg = base;
      cfg["lambda1"] = l1;
      cfg["lambda2"] = l2;
      std::ostringstream name;
      name << "l1_" << l1 << "_l2_" << l2;
      const std::string dir = (std::filesystem::path(a.out) / name.str()).string();
      std::cout << "== " << name.str() << "\n" << std::flush;
      Buffer result;
      const vigan_status s =
          vigan_train_json(cfg.dump().c_str(), dir.c_str(), nullptr, print_line, nullptr, &result.b);
      ordered_json row;
      row["lambda1"] = l1;
      row["lambda2"] = l2;
      row["out_dir"] = dir;
      if (s == VIGAN_OK) {
        row["eval"] = ordered_json::parse(result.text())["eval"];
      } else {
        row["error"] = vigan_last_error();
        rc = report(s);
      }
      summary.push_back(row);
    }
  }
  std::filesystem::create_directories(a.out);
  std::ofstream((std::filesystem::path(a.out) / "sweep.json").string()) << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << "\n";
  return rc;
}

int cmd_eval(const EvalArgs& a) {
  ModelHandle m;
  if (auto s = vigan_model_load(a.checkpoint.c_str(), 1, &m.m); s != VIGAN_OK) return report(s);
  Buffer metrics;
  if (auto s = vigan_evaluate(m.m, a.identity ? 1 : 0, &metrics.b); s != VIGAN_OK) return report(s);
  std::cout << metrics.text() << "\n";
  return kExitOk;
}

int cmd_info(const std::string& checkpoint) {
  ModelHandle m;
  if (auto s = vigan_model_load(checkpoint.c_str(), 0, &m.m); s != VIGAN_OK) return report(s);
  Buffer info;
  if (auto s = vigan_model_info(m.m, &info.b); s != VIGAN_OK) return report(s);
  std::cout << ordered_json::parse(info.text()).dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ViGAN: attribute-conditioned image generation and editing"};
  app.set_version_flag("--version", std::string(vigan_version()));
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model from a JSON config");
  c_train->add_option("-c,--config", train.config, "Training config")->required()->check(CLI::ExistingFile);
  c_train->add_option("-o,--out", train.out, "Output directory")->required();
  c_train->add_option("--resume", train.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  SampleArgs sample;
  auto* c_sample = app.add_subcommand("sample", "Write a grid of prior samples");
  c_sample->add_option("--checkpoint", sample.checkpoint)->required()->check(CLI::ExistingFile);
  c_sample->add_option("-n,--count", sample.n, "Number of samples")->check(CLI::Range(1, 1024));
  c_sample->add_option("--seed", sample.seed);
  c_sample->add_option("-o,--out", sample.out, "Output PNG")->required();

  EditArgs edit;
  auto* c_edit = app.add_subcommand("edit", "Re-render an image with changed attributes");
  c_edit->add_option("--checkpoint", edit.checkpoint)->required()->check(CLI::ExistingFile);
  c_edit->add_option("--image", edit.image, "Source PNG");
  c_edit->add_option("--index", edit.index, "Source dataset row");
  c_edit->add_option("--set", edit.set, "GROUP=CLASS or INDEX=VALUE, repeatable")->take_all();
  c_edit->add_option("--seed", edit.seed, "Sample z from the posterior with this seed instead of using its mean");
  c_edit->add_option("-o,--out", edit.out, "original | reconstruction | edited panel PNG")->required();
  c_edit->add_option("--edited-out", edit.edited_out, "Edited image alone as PNG");
  c_edit->add_option("--info-out", edit.info_out, "Attribute vectors as JSON");

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  c_gc->add_option("--module", gc.module, "all, ops, losses, objectives or a case name");
  c_gc->add_option("--json", gc.json_out, "Write the report as JSON");
  c_gc->add_option("--inject-fault", gc.fault)->group("");

  DatasetArgs ds;
  auto* c_ds = app.add_subcommand("dataset", "Export the configured dataset in folder format");
  c_ds->add_option("-c,--config", ds.config)->required()->check(CLI::ExistingFile);
  c_ds->add_option("-o,--out", ds.out)->required();

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Serve encode/generate/edit over HTTP");
  c_serve->add_option("--checkpoint", serve.checkpoint)->required()->check(CLI::ExistingFile);
  c_serve->add_option("--host", serve.host);
  c_serve->add_option("--port", serve.port)->check(CLI::Range(0, 65535));
  c_serve->add_option("--max-body", serve.max_body, "Request size limit in bytes");
  c_serve->add_flag("--no-data", serve.no_data, "Do not load the dataset (disables dataset_index edits)");

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Train over a grid of lambda1 x lambda2");
  c_sweep->add_option("-c,--config", sweep.config)->required()->check(CLI::ExistingFile);
  c_sweep->add_option("-o,--out", sweep.out)->required();
  c_sweep->add_option("--lambda1", sweep.lambda1)->delimiter(',')->check(CLI::NonNegativeNumber);
  c_sweep->add_option("--lambda2", sweep.lambda2)->delimiter(',')->check(CLI::NonNegativeNumber);
  c_sweep->add_option("--steps", sweep.steps, "Override total_steps");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Held-out metrics of a checkpoint");
  c_eval->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  c_eval->add_flag("--identity", ev.identity, "Edit with unchanged attributes");

  std::string info_ckpt;
  auto* c_info = app.add_subcommand("info", "Print model and attribute metadata");
  c_info->add_option("--checkpoint", info_ckpt)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_train) return cmd_train(train);
    if (*c_sample) return cmd_sample(sample);
    if (*c_edit) return cmd_edit(edit);
    if (*c_gc) return cmd_gradcheck(gc);
    if (*c_ds) return cmd_dataset(ds);
    if (*c_serve) return cmd_serve(serve);
    if (*c_sweep) return cmd_sweep(sweep);
    if (*c_eval) return cmd_eval(ev);
    if (*c_info) return cmd_info(info_ckpt);
  } catch (const std::exception& e) {
    std::cerr << "error (internal): " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
