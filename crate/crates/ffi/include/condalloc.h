#ifndef CONDALLOC_H
#define CONDALLOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define CONDALLOC_OK 0

/*
 Null pointer, bad UTF-8 or a buffer of the wrong length.
 */
#define CONDALLOC_ERR_ARGUMENT 1

#define CONDALLOC_ERR_CONFIG 2

#define CONDALLOC_ERR_DATA 3

#define CONDALLOC_ERR_NUMERIC 4

/*
 A Rust panic was caught at the boundary.
 */
#define CONDALLOC_ERR_INTERNAL 5

/*
 Opaque trained model.
 */
typedef struct CondallocModel CondallocModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null if none.

 The pointer stays valid until the next failing call on the same thread.
 */
const char *condalloc_last_error(void);

/*
 Parse a model from its JSON text (as written by `condalloc train`).

 # Safety
 `json` must be a nul-terminated string; `out` must point to writable storage.
 */
int32_t condalloc_model_load_json(const char *json, struct CondallocModel **out);

/*
 Read and parse a model JSON file.

 # Safety
 `path` must be a nul-terminated string; `out` must point to writable storage.
 */
int32_t condalloc_model_load_file(const char *path, struct CondallocModel **out);

/*
 Release a model. Null is ignored.

 # Safety
 `model` must come from a load function and not be used afterwards.
 */
void condalloc_model_free(struct CondallocModel *model);

/*
 Number of state variables the model expects, or 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t condalloc_model_inputs(const struct CondallocModel *model);

/*
 Number of assets the model allocates over, or 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t condalloc_model_assets(const struct CondallocModel *model);

/*
 Portfolio weights for one raw (unstandardized) state vector.

 `renormalized` may be null; otherwise it receives 1 when the weights were
 rescaled to sum to one.

 # Safety
 `state` must hold `n_state` values and `weights` room for `n_assets`.
 */
int32_t condalloc_model_predict(const struct CondallocModel *model,
                                const double *state,
                                size_t n_state,
                                double *weights,
                                size_t n_assets,
                                uint8_t *renormalized);

/*
 Evaluate a performance ratio on `d` returns.

 `kind` is one of `sharpe`, `mad`, `gini`, `minimax`, `cvar`, `rachev`;
 `alpha` and `beta` are the tail levels (only read by `cvar` and `rachev`,
 but must lie in (0, 1)).

 # Safety
 `kind` must be a nul-terminated string, `returns` must hold `d` values and
 `value` must be writable.
 */
int32_t condalloc_ratio_evaluate(const char *kind,
                                 double alpha,
                                 double beta,
                                 const double *returns,
                                 size_t d,
                                 double *value);

/*
 Gradient of a performance ratio with respect to each of the `d` returns.

 # Safety
 As [`condalloc_ratio_evaluate`]; `gradient` must have room for `d` values.
 */
int32_t condalloc_ratio_gradient(const char *kind,
                                 double alpha,
                                 double beta,
                                 const double *returns,
                                 size_t d,
                                 double *gradient);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONDALLOC_H */
