// Copyright 2026 The ViGAN Authors
// SPDX-License-Identifier: Apache-2.0

#include "vigan/vigan.h"

#include <cblas.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <mutex>
#include <new>
#include <span>
#include <string>

#include <json.hpp>

#include "vigan/checkpoint.hpp"
#include "vigan/config.hpp"
#include "vigan/dataset.hpp"
#include "vigan/editing.hpp"
#include "vigan/gradcheck.hpp"
#include "vigan/image_codec.hpp"
#include "vigan/trainer.hpp"

struct vigan_model {
  std::shared_ptr<const vigan::LoadedModel> impl;
};

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

thread_local std::string g_last_error;

void init_blas() {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

vigan_status fail(vigan_status s, const std::string& message) {
  g_last_error = message;
  return s;
}

// Maps the library's exception hierarchy onto status codes. Most-derived
// types first.
template <class F>
vigan_status guarded(F&& body) {
  g_last_error.clear();
  try {
    init_blas();
    return body();
  } catch (const vigan::ImageTooLarge& e) {
    return fail(VIGAN_IMAGE_TOO_LARGE, e.what());
  } catch (const vigan::CodecError& e) {
    return fail(VIGAN_IMAGE, e.what());
  } catch (const vigan::CheckpointCorrupt& e) {
    return fail(VIGAN_CHECKPOINT_CORRUPT, e.what());
  } catch (const vigan::CheckpointVersionError& e) {
    return fail(VIGAN_CHECKPOINT_VERSION, e.what());
  } catch (const vigan::CheckpointConfigMismatch& e) {
    return fail(VIGAN_CHECKPOINT_CONFIG, e.what());
  } catch (const vigan::CheckpointError& e) {
    return fail(VIGAN_CHECKPOINT_CORRUPT, e.what());
  } catch (const vigan::ConfigError& e) {
    return fail(VIGAN_CONFIG, e.what());
  } catch (const vigan::DatasetError& e) {
    return fail(VIGAN_DATASET, e.what());
  } catch (const vigan::NumericError& e) {
    return fail(VIGAN_NUMERIC, e.what());
  } catch (const vigan::ShapeError& e) {
    return fail(VIGAN_SHAPE, e.what());
  } catch (const vigan::IoError& e) {
    return fail(VIGAN_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(VIGAN_IO, e.what());
  } catch (const json::exception& e) {
    return fail(VIGAN_INVALID_ARGUMENT, std::string("malformed JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    return fail(VIGAN_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(VIGAN_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(VIGAN_INTERNAL, e.what());
  } catch (...) {
    return fail(VIGAN_INTERNAL, "unknown error");
  }
}

void put(vigan_buffer* out, std::span<const std::uint8_t> bytes) {
  if (!out) return;
  out->data = nullptr;
  out->size = 0;
  if (bytes.empty()) return;
  auto* p = static_cast<std::uint8_t*>(std::malloc(bytes.size()));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, bytes.data(), bytes.size());
  out->data = p;
  out->size = bytes.size();
}

void put(vigan_buffer* out, const std::string& text) {
  put(out, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void clear(vigan_buffer* out) {
  if (out) *out = vigan_buffer{nullptr, 0};
}

void require(const void* p, const char* what) {
  if (!p) throw std::invalid_argument(std::string(what) + " must not be null");
}

ordered_json eval_json(const vigan::EvalMetrics& e) {
  ordered_json j;
  j["recog_accuracy"] = e.recog_accuracy;
  j["edit_fidelity"] = e.edit_fidelity;
  j["preservation"] = e.preservation;
  j["recon_error"] = e.recon_error;
  return j;
}

vigan_status train(const vigan::TrainConfig& config, const char* out_dir, const char* resume, vigan_log_fn log,
                   void* user, vigan_buffer* result_json) {
  require(out_dir, "out_dir");
  const vigan::DatasetSplit data = vigan::load_dataset(config.dataset, config.model.image_size, config.model.channels);
  vigan::RunOptions opts;
  opts.out_dir = out_dir;
  if (resume) opts.resume = std::string(resume);
  if (log) opts.log = [log, user](const std::string& line) { log(line.c_str(), user); };
  const vigan::RunResult r = vigan::run(config, data, opts);
  ordered_json j;
  j["step"] = r.final.step;
  j["checkpoint"] = (std::filesystem::path(out_dir) / "final.ckpt").string();
  j["eval"] = r.eval ? eval_json(*r.eval) : ordered_json(nullptr);
  put(result_json, j.dump());
  return VIGAN_OK;
}

std::span<const std::uint8_t> bytes_of(const std::uint8_t* p, std::size_t n) {
  if (!p && n > 0) throw std::invalid_argument("png is null but png_size is nonzero");
  return {p, n};
}

// Set entries in document order.
std::vector<std::pair<std::string, double>> parse_set(const ordered_json& set) {
  std::vector<std::pair<std::string, double>> out;
  if (set.is_null()) return out;
  if (!set.is_object()) throw vigan::EditError("'set' must be an object");
  for (const auto& [key, value] : set.items()) {
    if (!value.is_number()) throw vigan::EditError("'set." + key + "' must be a number");
    out.emplace_back(key, value.get<double>());
  }
  return out;
}

std::uint64_t parse_seed(const ordered_json& j) {
  if (!j.is_number_unsigned()) throw vigan::EditError("'seed' must be a non-negative integer");
  return j.get<std::uint64_t>();
}

}  // namespace

extern "C" {

const char* vigan_last_error(void) { return g_last_error.c_str(); }

const char* vigan_status_name(vigan_status status) {
  switch (status) {
    case VIGAN_OK: return "ok";
    case VIGAN_INVALID_ARGUMENT: return "invalid_argument";
    case VIGAN_IO: return "io";
    case VIGAN_CONFIG: return "config";
    case VIGAN_CHECKPOINT_CORRUPT: return "checkpoint_corrupt";
    case VIGAN_CHECKPOINT_VERSION: return "checkpoint_version";
    case VIGAN_CHECKPOINT_CONFIG: return "checkpoint_config";
    case VIGAN_DATASET: return "dataset";
    case VIGAN_IMAGE: return "image";
    case VIGAN_IMAGE_TOO_LARGE: return "image_too_large";
    case VIGAN_NUMERIC: return "numeric";
    case VIGAN_SHAPE: return "shape";
    case VIGAN_CHECK_FAILED: return "check_failed";
    case VIGAN_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* vigan_version(void) { return "0.1.0"; }

void vigan_buffer_free(vigan_buffer* buffer) {
  if (!buffer) return;
  std::free(buffer->data);
  buffer->data = nullptr;
  buffer->size = 0;
}

vigan_status vigan_train(const char* config_path, const char* out_dir, const char* resume, vigan_log_fn log,
                         void* user, vigan_buffer* result_json) {
  clear(result_json);
  return guarded([&] {
    require(config_path, "config_path");
    return train(vigan::load_train_config(config_path), out_dir, resume, log, user, result_json);
  });
}

vigan_status vigan_train_json(const char* config_json, const char* out_dir, const char* resume, vigan_log_fn log,
                              void* user, vigan_buffer* result_json) {
  clear(result_json);
  return guarded([&] {
    require(config_json, "config_json");
    return train(vigan::parse_train_config(config_json), out_dir, resume, log, user, result_json);
  });
}

vigan_status vigan_gradcheck(const char* module, const char* fault, vigan_buffer* report_json, int* passed) {
  clear(report_json);
  if (passed) *passed = 0;
  return guarded([&] {
    vigan::SuiteOptions opts;
    if (module) opts.module = module;
    if (fault) {
      opts.fault = vigan::op_from_name(fault);
      if (!opts.fault) throw std::invalid_argument(std::string("unknown op '") + fault + "'");
    }
    const auto results = vigan::run_gradcheck_suite(opts);
    ordered_json report = ordered_json::array();
    bool ok = !results.empty();
    for (const auto& r : results) {
      ordered_json j;
      j["name"] = r.name;
      j["kind"] = r.kind;
      j["max_error"] = r.max_error;
      j["tolerance"] = r.tolerance;
      j["checks"] = r.checks;
      j["points"] = r.points;
      j["passed"] = r.passed();
      report.push_back(j);
      ok = ok && r.passed();
    }
    put(report_json, report.dump());
    if (passed) *passed = ok ? 1 : 0;
    if (!ok) return fail(VIGAN_CHECK_FAILED, "gradient check failed");
    return VIGAN_OK;
  });
}

vigan_status vigan_dataset_export(const char* config_path, const char* out_dir) {
  return guarded([&] {
    require(config_path, "config_path");
    require(out_dir, "out_dir");
    const vigan::TrainConfig c = vigan::load_train_config(config_path);
    vigan::DatasetSplit d = vigan::load_dataset(c.dataset, c.model.image_size, c.model.channels);
    std::vector<vigan::Sample> all = std::move(d.train);
    all.insert(all.end(), d.heldout.begin(), d.heldout.end());
    vigan::export_folder(all, out_dir);
    return VIGAN_OK;
  });
}

vigan_status vigan_model_load(const char* checkpoint_path, int load_data, vigan_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    require(checkpoint_path, "checkpoint_path");
    auto m = std::make_unique<vigan_model>();
    m->impl = vigan::load_model(checkpoint_path, load_data != 0);
    *out = m.release();
    return VIGAN_OK;
  });
}

void vigan_model_free(vigan_model* model) { delete model; }

vigan_status vigan_model_info(const vigan_model* model, vigan_buffer* info_json) {
  clear(info_json);
  return guarded([&] {
    require(model, "model");
    put(info_json, vigan::model_info(*model->impl).dump());
    return VIGAN_OK;
  });
}

vigan_status vigan_encode(const vigan_model* model, const uint8_t* png, size_t png_size, vigan_buffer* result_json) {
  clear(result_json);
  return guarded([&] {
    require(model, "model");
    const auto& m = *model->impl;
    const vigan::EncodeResult r = vigan::encode_image(m, vigan::prepare_image(m, bytes_of(png, png_size)));
    ordered_json j;
    j["z"] = r.mu;
    j["logvar"] = r.logvar;
    j["c_hat"] = r.c_hat;
    put(result_json, j.dump());
    return VIGAN_OK;
  });
}

vigan_status vigan_generate(const vigan_model* model, const float* c, size_t c_len, const float* z, size_t z_len,
                            const uint64_t* seed, vigan_buffer* png) {
  clear(png);
  return guarded([&] {
    require(model, "model");
    if (!c && c_len > 0) throw std::invalid_argument("c is null but c_len is nonzero");
    std::optional<std::vector<float>> zv;
    if (z) zv.emplace(z, z + z_len);
    std::optional<std::uint64_t> s;
    if (seed) s = *seed;
    put(png, vigan::encode_png(vigan::generate_image(*model->impl, std::vector<float>(c, c + c_len), zv, s)));
    return VIGAN_OK;
  });
}

vigan_status vigan_sample_grid(const vigan_model* model, int64_t n, uint64_t seed, vigan_buffer* png) {
  clear(png);
  return guarded([&] {
    require(model, "model");
    put(png, vigan::encode_png(vigan::sample_grid(*model->impl, n, seed)));
    return VIGAN_OK;
  });
}

vigan_status vigan_edit(const vigan_model* model, const char* request_json, const uint8_t* png, size_t png_size,
                        vigan_buffer* edited_png, vigan_buffer* triptych_png, vigan_buffer* info_json) {
  clear(edited_png);
  clear(triptych_png);
  clear(info_json);
  return guarded([&] {
    require(model, "model");
    require(request_json, "request_json");
    const auto& m = *model->impl;
    const ordered_json j = ordered_json::parse(request_json);
    if (!j.is_object()) throw vigan::EditError("edit request must be a JSON object");
    for (const auto& [key, _] : j.items())
      if (key != "dataset_index" && key != "set" && key != "seed")
        throw vigan::EditError("unknown edit request field '" + key + "'");
    vigan::EditRequest req;
    if (j.contains("dataset_index")) {
      if (!j["dataset_index"].is_number_integer()) throw vigan::EditError("'dataset_index' must be an integer");
      req.dataset_index = j["dataset_index"].get<std::int64_t>();
    }
    if (png) req.image = vigan::prepare_image(m, bytes_of(png, png_size));
    req.set = parse_set(j.value("set", ordered_json()));
    if (j.contains("seed")) req.seed = parse_seed(j["seed"]);

    const vigan::EditResult r = vigan::edit(m, req);
    put(edited_png, vigan::encode_png(r.edited));
    put(triptych_png, vigan::encode_png(r.triptych()));
    if (info_json) {
      ordered_json info;
      info["c_base"] = r.c_base;
      info["c_effective"] = r.c_effective;
      info["c_hat_edited"] = vigan::encode_image(m, r.edited).c_hat;
      put(info_json, info.dump());
    }
    return VIGAN_OK;
  });
}

vigan_status vigan_evaluate(const vigan_model* model, int identity_edit, vigan_buffer* metrics_json) {
  clear(metrics_json);
  return guarded([&] {
    require(model, "model");
    const auto& m = *model->impl;
    if (!m.data) throw vigan::DatasetError("evaluation needs the dataset: " + m.data_error);
    vigan::EvalOptions opts;
    opts.identity_edit = identity_edit != 0;
    put(metrics_json, eval_json(vigan::evaluate(m.model, m.params, m.data->heldout, opts)).dump());
    return VIGAN_OK;
  });
}

}  // extern "C"
