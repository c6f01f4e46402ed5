#ifndef MIATTN_H
#define MIATTN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MIATTN_MAX_ROWS 150

#define MIATTN_FEATURE_COLS 42

/**
 * Number of values in one feature matrix (rows × columns).
 */
#define MIATTN_FEATURE_LEN 6300

typedef enum MiattnStatus {
  MIATTN_STATUS_OK = 0,
  MIATTN_STATUS_NULL_ARGUMENT = 1,
  MIATTN_STATUS_INVALID_UTF8 = 2,
  /**
   * SMILES could not be parsed or featurized.
   */
  MIATTN_STATUS_INVALID_SMILES = 3,
  MIATTN_STATUS_BUFFER_TOO_SMALL = 4,
  MIATTN_STATUS_IO = 5,
  /**
   * Model file is corrupt, truncated or from an unsupported version.
   */
  MIATTN_STATUS_INVALID_MODEL = 6,
  MIATTN_STATUS_INTERNAL = 7,
} MiattnStatus;

/**
 * Opaque handle to a loaded model.
 */
typedef struct MiattnModel MiattnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *miattn_version(void);

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call into the library on this thread.
 */
const char *miattn_last_error_message(void);

/**
 * Writes the row-major feature matrix of `smiles` into `out`
 * (at least `MIATTN_FEATURE_LEN` doubles) and the number of non-padding rows
 * into `valid_rows` when it is non-null.
 *
 * # Safety
 * `smiles` must be NUL-terminated; `out` must point to `out_len` writable doubles.
 */
enum MiattnStatus miattn_featurize(const char *smiles,
                                   double *out,
                                   size_t out_len,
                                   size_t *valid_rows);

/**
 * Number of values written by [`miattn_descriptors`].
 */
size_t miattn_descriptor_count(void);

/**
 * Writes the unscaled descriptor vector of `smiles` into `out`.
 *
 * # Safety
 * `smiles` must be NUL-terminated; `out` must point to `out_len` writable doubles.
 */
enum MiattnStatus miattn_descriptors(const char *smiles, double *out, size_t out_len);

/**
 * Loads a model file. On success `*out` receives a handle to release with
 * [`miattn_model_free`].
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be a valid pointer.
 */
enum MiattnStatus miattn_model_load(const char *path, struct MiattnModel **out);

/**
 * Releases a model handle. NULL is ignored.
 *
 * # Safety
 * `model` must come from [`miattn_model_load`] and not be freed twice.
 */
void miattn_model_free(struct MiattnModel *model);

/**
 * Decision threshold stored with the model, or NaN for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
double miattn_model_threshold(const struct MiattnModel *model);

/**
 * Probability that `smiles` is active.
 *
 * # Safety
 * `model` must be a live handle, `smiles` NUL-terminated, `probability` valid.
 */
enum MiattnStatus miattn_model_predict(const struct MiattnModel *model,
                                       const char *smiles,
                                       double *probability);

/**
 * Writes one attention weight per feature-matrix row (`MIATTN_MAX_ROWS`
 * values, padding rows included) and, when non-null, the probability.
 *
 * # Safety
 * `model` must be a live handle, `smiles` NUL-terminated, `weights` must point
 * to `weights_len` writable doubles.
 */
enum MiattnStatus miattn_model_attention(const struct MiattnModel *model,
                                         const char *smiles,
                                         double *weights,
                                         size_t weights_len,
                                         double *probability);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIATTN_H */
