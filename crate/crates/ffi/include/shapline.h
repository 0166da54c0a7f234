#ifndef SHAPLINE_H
#define SHAPLINE_H

/* Generated by cbindgen from the shapline-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result status of every fallible FFI call.
typedef enum ShaplineStatus {
  // The call succeeded.
  SHAPLINE_STATUS_OK = 0,
  // A required pointer argument was null.
  SHAPLINE_STATUS_NULL_ARGUMENT = 1,
  // An argument was structurally invalid (dimensions, ranges, content).
  SHAPLINE_STATUS_INVALID_ARGUMENT = 2,
  // The filesystem operation failed.
  SHAPLINE_STATUS_IO_ERROR = 3,
  // The computation itself failed.
  SHAPLINE_STATUS_COMPUTE_ERROR = 4,
  // A panic was caught at the FFI boundary (a bug; please report).
  SHAPLINE_STATUS_INTERNAL_ERROR = 5,
} ShaplineStatus;

// Opaque handle to a background (reference) row set for explanations.
typedef struct ShaplineBackground ShaplineBackground;

// Opaque handle to a loaded classifier.
typedef struct ShaplineModel ShaplineModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *shapline_version(void);

// Message describing the calling thread's most recent failure. The pointer
// stays valid until the next failing call on the same thread. Empty when
// no call has failed yet.
const char *shapline_last_error_message(void);

// Loads a model saved by the library. On success stores an owned handle in
// `*out_model`; release it with [`shapline_model_free`].
//
// # Safety
// `path` must be NUL-terminated; `out_model` must be a valid pointer.
enum ShaplineStatus shapline_model_load(const char *path, struct ShaplineModel **out_model);

// Saves a model to `path` in the library's binary format.
//
// # Safety
// `model` must be a live handle; `path` must be NUL-terminated.
enum ShaplineStatus shapline_model_save(const struct ShaplineModel *model, const char *path);

// Number of input features the model expects; 0 for a null handle.
//
// # Safety
// `model` must be a live handle or null.
size_t shapline_model_input_dim(const struct ShaplineModel *model);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must have come from this library and not been freed before.
void shapline_model_free(struct ShaplineModel *model);

// Classifies `n_rows` row-major samples, writing one probability of the
// positive class per row into `out_proba`.
//
// # Safety
// `x` must point to `n_rows * n_cols` doubles and `out_proba` to `n_rows`
// writable doubles.
enum ShaplineStatus shapline_predict_proba(const struct ShaplineModel *model,
                                           const double *x,
                                           size_t n_rows,
                                           size_t n_cols,
                                           double *out_proba);

// Wraps `n_rows` row-major reference rows as a background set, verbatim.
// Release the handle with [`shapline_background_free`].
//
// # Safety
// `data` must point to `n_rows * n_cols` doubles; `out_background` must be
// a valid pointer.
enum ShaplineStatus shapline_background_from_data(const double *data,
                                                  size_t n_rows,
                                                  size_t n_cols,
                                                  struct ShaplineBackground **out_background);

// Summarizes `n_rows` row-major samples into `k` background rows by
// k-means (deterministic per seed). Release the handle with
// [`shapline_background_free`].
//
// # Safety
// `data` must point to `n_rows * n_cols` doubles; `out_background` must be
// a valid pointer.
enum ShaplineStatus shapline_background_kmeans(const double *data,
                                               size_t n_rows,
                                               size_t n_cols,
                                               size_t k,
                                               uint64_t seed,
                                               struct ShaplineBackground **out_background);

// Rows in a background set; 0 for a null handle.
//
// # Safety
// `background` must be a live handle or null.
size_t shapline_background_rows(const struct ShaplineBackground *background);

// Releases a background handle. Null is ignored.
//
// # Safety
// `background` must have come from this library and not been freed before.
void shapline_background_free(struct ShaplineBackground *background);

// Explains one sample: writes the `n_cols` per-feature attributions to
// `out_phi` and the base value (expected model output over the background
// rows) to `out_phi0`. Attributions satisfy
// `phi0 + sum(phi) = model(x)` up to solver tolerance.
//
// `coalition_budget` caps evaluated feature coalitions in sampled mode;
// pass 0 for the default (`2 * n_cols + 2048`). Nonzero `exact` switches
// to brute-force enumeration (requires `n_cols <= 20`).
//
// # Safety
// `x` and `out_phi` must point to `n_cols` doubles (readable / writable
// respectively); `out_phi0` must be a valid pointer.
enum ShaplineStatus shapline_explain(const struct ShaplineModel *model,
                                     const struct ShaplineBackground *background,
                                     const double *x,
                                     size_t n_cols,
                                     size_t coalition_budget,
                                     uint8_t exact,
                                     uint64_t seed,
                                     double *out_phi,
                                     double *out_phi0);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SHAPLINE_H */
