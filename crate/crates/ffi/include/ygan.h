#ifndef YGAN_H
#define YGAN_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success; the rest mirror the library's error kinds.
 */
typedef enum YganStatus {
  YGAN_STATUS_OK = 0,
  YGAN_STATUS_INVALID_ARGUMENT = 1,
  YGAN_STATUS_FORMAT = 2,
  YGAN_STATUS_CONTRACT = 3,
  YGAN_STATUS_STATE = 4,
  YGAN_STATUS_DEGENERATE = 5,
  YGAN_STATUS_CONFIG = 6,
  YGAN_STATUS_NUMERIC = 7,
  YGAN_STATUS_IO = 8,
  YGAN_STATUS_NULL_POINTER = 9,
  YGAN_STATUS_PANIC = 10,
} YganStatus;

/**
 * A simulated optical bench with fixed diffusers.
 */
typedef struct YganBench YganBench;

/**
 * A trained reconstruction model.
 */
typedef struct YganModel YganModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next library call on the same thread.
 */
const char *ygan_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ygan_version(void);

/**
 * Loads a checkpoint directory into `*out`.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum YganStatus ygan_model_load(const char *dir, struct YganModel **out);

/**
 * Image side the model expects, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a handle from [`ygan_model_load`].
 */
size_t ygan_model_side(const struct YganModel *model);

/**
 * Reconstructs `count` speckles of `side * side` pixels each (row-major,
 * concatenated). Both heads write `count * side * side` values.
 *
 * # Safety
 * All buffers must hold `count * side * side` floats.
 */
enum YganStatus ygan_model_reconstruct(const struct YganModel *model,
                                       const float *speckles,
                                       size_t count,
                                       float *out_obj1,
                                       float *out_obj2);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void ygan_model_free(struct YganModel *model);

/**
 * Builds a bench from a JSON configuration, or the default bench with the
 * given seed when `config_json` is null.
 *
 * # Safety
 * `config_json` must be null or NUL-terminated; `out` must be valid.
 */
enum YganStatus ygan_bench_new(const char *config_json, uint64_t seed, struct YganBench **out);

/**
 * Image side of the bench, or 0 for a null handle.
 *
 * # Safety
 * `bench` must be null or a handle from [`ygan_bench_new`].
 */
size_t ygan_bench_side(const struct YganBench *bench);

/**
 * Simulates the speckle of an object pair and writes it normalized by its
 * maximum into `out_speckle`.
 *
 * # Safety
 * `obj1`, `obj2` and `out_speckle` must hold `side * side` floats.
 */
enum YganStatus ygan_bench_simulate(const struct YganBench *bench,
                                    const float *obj1,
                                    const float *obj2,
                                    uint64_t sample_seed,
                                    float *out_speckle);

/**
 * Releases a bench handle. Null is ignored.
 *
 * # Safety
 * `bench` must be null or a handle not yet freed.
 */
void ygan_bench_free(struct YganBench *bench);

/**
 * Global SSIM of two images of `len` pixels with the standard constants
 * scaled by `dynamic_range`.
 *
 * # Safety
 * `a` and `b` must hold `len` floats and `out` must be valid.
 */
enum YganStatus ygan_ssim(const float *a,
                          const float *b,
                          size_t len,
                          double dynamic_range,
                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* YGAN_H */
