#ifndef RTR_H
#define RTR_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Verdicts as plain integers.
 */
#define RTR_ISOMORPHIC 0

#define RTR_NON_ISOMORPHIC 1

/**
 * Result codes shared by every entry point.
 */
typedef enum RtrStatus {
  RTR_STATUS_OK = 0,
  RTR_STATUS_NULL_ARGUMENT = 1,
  RTR_STATUS_INVALID_UTF8 = 2,
  RTR_STATUS_BUFFER_TOO_SMALL = 3,
  RTR_STATUS_PARSE = 10,
  RTR_STATUS_VALIDATION = 11,
  RTR_STATUS_CONFIG = 12,
  RTR_STATUS_CAUSALITY = 13,
  RTR_STATUS_SHAPE = 14,
  RTR_STATUS_OVER_BUDGET = 15,
  RTR_STATUS_DIVERGENCE = 16,
  RTR_STATUS_CHECKPOINT = 17,
  RTR_STATUS_IO = 18,
  RTR_STATUS_JSON = 19,
  RTR_STATUS_PANIC = 99,
} RtrStatus;

/**
 * Opaque model handle.
 */
typedef struct RtrModel RtrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated).
 * Returns the message length without the terminator; 0 if there is none.
 * Truncates when `cap` is too small.
 *
 * # Safety
 * `buf` is NULL or points to `cap` writable bytes.
 */
size_t rtr_last_error_message(char *buf, size_t cap);

/**
 * Create a model from a JSON config (`"{}"` for defaults).
 *
 * # Safety
 * `config_json` is a NUL-terminated string; `out` points to writable storage for a handle.
 */
enum RtrStatus rtr_model_new(const char *config_json,
                             size_t num_nodes,
                             size_t edge_dim,
                             uint64_t seed,
                             struct RtrModel **out);

/**
 * Load a checkpoint written by `rtr_model_save` or the CLI.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` points to writable storage for a handle.
 */
enum RtrStatus rtr_model_load(const char *path, struct RtrModel **out);

/**
 * # Safety
 * `h` is a live handle; `path` is a NUL-terminated string.
 */
enum RtrStatus rtr_model_save(const struct RtrModel *h, const char *path);

/**
 * Release a handle. NULL is ignored.
 *
 * # Safety
 * `h` is NULL or a handle from this library that is not used afterwards.
 */
void rtr_model_free(struct RtrModel *h);

/**
 * Width of the vectors written by `rtr_model_embed`.
 *
 * # Safety
 * `h` is a live handle; `out` is writable.
 */
enum RtrStatus rtr_model_embedding_dim(const struct RtrModel *h, size_t *out);

/**
 * Commit one event. Events must arrive in strictly increasing (time, seq) order.
 *
 * # Safety
 * `h` is a live handle; `feats` points to `num_feats` doubles (may be NULL when 0).
 */
enum RtrStatus rtr_model_apply_event(struct RtrModel *h,
                                     uint32_t src,
                                     uint32_t dst,
                                     double time,
                                     uint64_t seq,
                                     const double *feats,
                                     size_t num_feats);

/**
 * Write the embedding of `node` at (time, seq) into `out[0..cap]`; `out_len` receives the width.
 * Returns `BufferTooSmall` (with `out_len` set) when `cap` is short.
 *
 * # Safety
 * `h` is a live handle; `out` points to `cap` writable doubles; `out_len` is writable.
 */
enum RtrStatus rtr_model_embed(const struct RtrModel *h,
                               uint32_t node,
                               double time,
                               uint64_t seq,
                               double *out,
                               size_t cap,
                               size_t *out_len);

/**
 * Link probability for (src, dst) at (time, seq).
 *
 * # Safety
 * `h` is a live handle; `out` is writable.
 */
enum RtrStatus rtr_model_score_link(const struct RtrModel *h,
                                    uint32_t src,
                                    uint32_t dst,
                                    double time,
                                    uint64_t seq,
                                    double *out);

/**
 * Decide whether two temporal graphs given as `src,dst,time` CSV text (dense integer ids,
 * undirected) are distinguishable by `engine` (`t1wl`, `rtr`, `rtr-hetero`, `pint-pos`).
 * Writes `RTR_ISOMORPHIC` or `RTR_NON_ISOMORPHIC` to `out`.
 *
 * # Safety
 * String arguments are NUL-terminated; `out` is writable.
 */
enum RtrStatus rtr_isotest_csv(const char *engine,
                               size_t depth,
                               const char *csv_a,
                               const char *csv_b,
                               size_t num_nodes,
                               int32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RTR_H */
