/* Copyright 2026 The ViGAN Authors
 * SPDX-License-Identifier: Apache-2.0 */

/* C interface to the ViGAN library: training, gradient checks, dataset
 * export and a read-only model handle for encode / generate / edit.
 *
 * Every call returns a vigan_status. On failure vigan_last_error() returns a
 * message for the calling thread, valid until that thread's next call.
 * Output buffers are allocated by the library and released with
 * vigan_buffer_free. JSON outputs are UTF-8 text without a terminator. */

#ifndef VIGAN_VIGAN_H_
#define VIGAN_VIGAN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VIGAN_API __declspec(dllexport)
#else
#define VIGAN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vigan_status {
  VIGAN_OK = 0,
  VIGAN_INVALID_ARGUMENT = 1, /* bad request, out-of-range value, unknown name */
  VIGAN_IO = 2,
  VIGAN_CONFIG = 3,
  VIGAN_CHECKPOINT_CORRUPT = 4,
  VIGAN_CHECKPOINT_VERSION = 5,
  VIGAN_CHECKPOINT_CONFIG = 6, /* resume or layout mismatch */
  VIGAN_DATASET = 7,
  VIGAN_IMAGE = 8,           /* undecodable image */
  VIGAN_IMAGE_TOO_LARGE = 9,
  VIGAN_NUMERIC = 10,        /* non-finite loss or gradient */
  VIGAN_SHAPE = 11,
  VIGAN_CHECK_FAILED = 12,   /* gradient check ran and failed */
  VIGAN_INTERNAL = 13
} vigan_status;

typedef struct vigan_buffer {
  uint8_t* data;
  size_t size;
} vigan_buffer;

typedef struct vigan_model vigan_model;

typedef void (*vigan_log_fn)(const char* line, void* user);

VIGAN_API const char* vigan_last_error(void);
VIGAN_API const char* vigan_status_name(vigan_status status);
VIGAN_API const char* vigan_version(void);
VIGAN_API void vigan_buffer_free(vigan_buffer* buffer);

/* Runs training from a JSON config file. `resume` (nullable) names a
 * checkpoint to continue from. `log` (nullable) receives progress lines.
 * `result_json` (nullable) receives {"step", "checkpoint", "eval"}. */
VIGAN_API vigan_status vigan_train(const char* config_path, const char* out_dir, const char* resume, vigan_log_fn log,
                                   void* user, vigan_buffer* result_json);
VIGAN_API vigan_status vigan_train_json(const char* config_json, const char* out_dir, const char* resume,
                                        vigan_log_fn log, void* user, vigan_buffer* result_json);

/* `module`: "all", "ops", "losses", "objectives" or one case name. `fault`
 * (nullable) corrupts the backward rule of the named op. The report is a
 * JSON array of per-case results; `passed` is 1 when every case passes.
 * A failing check returns VIGAN_CHECK_FAILED with the report filled in. */
VIGAN_API vigan_status vigan_gradcheck(const char* module, const char* fault, vigan_buffer* report_json, int* passed);

/* Materializes the dataset named by a training config (train rows, then
 * held-out rows) in the folder format. */
VIGAN_API vigan_status vigan_dataset_export(const char* config_path, const char* out_dir);

/* `load_data` nonzero also loads the training dataset, which enables
 * dataset-index edits and sample grids. */
VIGAN_API vigan_status vigan_model_load(const char* checkpoint_path, int load_data, vigan_model** out);
VIGAN_API void vigan_model_free(vigan_model* model);

VIGAN_API vigan_status vigan_model_info(const vigan_model* model, vigan_buffer* info_json);

/* PNG in, {"z": mu, "logvar", "c_hat"} out. */
VIGAN_API vigan_status vigan_encode(const vigan_model* model, const uint8_t* png, size_t png_size,
                                    vigan_buffer* result_json);

/* `z` (nullable) must have z_dim entries; without it z is drawn from
 * `seed` (nullable; entropy when absent). */
VIGAN_API vigan_status vigan_generate(const vigan_model* model, const float* c, size_t c_len, const float* z,
                                      size_t z_len, const uint64_t* seed, vigan_buffer* png);

VIGAN_API vigan_status vigan_sample_grid(const vigan_model* model, int64_t n, uint64_t seed, vigan_buffer* png);

/* request_json: {"dataset_index"?: int, "set": {group or index: value},
 * "seed"?: uint}. Exactly one of `png` or dataset_index selects the source.
 * Any output pointer may be null. info_json receives
 * {"c_base", "c_effective", "c_hat_edited"}. */
VIGAN_API vigan_status vigan_edit(const vigan_model* model, const char* request_json, const uint8_t* png,
                                  size_t png_size, vigan_buffer* edited_png, vigan_buffer* triptych_png,
                                  vigan_buffer* info_json);

/* Held-out metrics {"recog_accuracy", "edit_fidelity", "preservation",
 * "recon_error"}; requires a model loaded with data. */
VIGAN_API vigan_status vigan_evaluate(const vigan_model* model, int identity_edit, vigan_buffer* metrics_json);

#ifdef __cplusplus
}
#endif

#endif /* VIGAN_VIGAN_H_ */
