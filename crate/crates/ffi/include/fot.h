#ifndef FOT_H
#define FOT_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum FotStatus {
  FOT_STATUS_OK = 0,
  FOT_STATUS_NULL_POINTER = 1,
  FOT_STATUS_INVALID_ARGUMENT = 2,
  FOT_STATUS_CONFIG = 3,
  FOT_STATUS_SOLVER = 4,
  FOT_STATUS_IO = 5,
  FOT_STATUS_PANIC = 6,
} FotStatus;

/**
 * Opaque problem handle.
 */
typedef struct FotProblem FotProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fot_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call on the same thread.
 */
const char *fot_last_error(void);

/**
 * Loads a run configuration and builds the forward model and data
 * (synthetic from the configured phantom, or from trace files). The
 * energy parameters use the first exponent of the configured schedule.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out` must be writable.
 */
enum FotStatus fot_problem_load(const char *config_path, struct FotProblem **out);

/**
 * Releases a handle from [`fot_problem_load`]; NULL is ignored.
 *
 * # Safety
 * `problem` must be NULL or a live handle, and is invalid afterwards.
 */
void fot_problem_free(struct FotProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum FotStatus fot_problem_num_nodes(const struct FotProblem *problem, size_t *out);

/**
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum FotStatus fot_problem_num_sources(const struct FotProblem *problem, size_t *out);

/**
 * Number of measurement nodes of `source`.
 *
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum FotStatus fot_problem_trace_len(const struct FotProblem *problem, size_t source, size_t *out);

/**
 * Copies the configured phantom (synthetic-data runs only).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum FotStatus fot_problem_phantom(const struct FotProblem *problem, double *out, size_t len);

/**
 * Copies the measured traces of `source` (`2 * trace_len` values).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum FotStatus fot_problem_data(const struct FotProblem *problem,
                                size_t source,
                                double *out,
                                size_t len);

/**
 * Emission traces of the forward solution at `xi` for `source`.
 *
 * # Safety
 * `xi` must point to `xi_len` doubles and `out` to `out_len` writable ones.
 */
enum FotStatus fot_forward_trace(const struct FotProblem *problem,
                                 const double *xi,
                                 size_t xi_len,
                                 size_t source,
                                 double *out,
                                 size_t out_len);

/**
 * Energy `E_p(xi)`; pass `INFINITY` as `p` for `E_inf`.
 *
 * # Safety
 * `xi` must point to `xi_len` doubles and `out` be writable.
 */
enum FotStatus fot_energy(const struct FotProblem *problem,
                          const double *xi,
                          size_t xi_len,
                          double p,
                          double *out);

/**
 * Reduced gradient of `E_p` at `xi` (finite `p`). `energy` may be NULL.
 *
 * # Safety
 * `xi` must point to `xi_len` doubles, `gradient` to `gradient_len`
 * writable doubles, and `energy` must be NULL or writable.
 */
enum FotStatus fot_gradient(const struct FotProblem *problem,
                            const double *xi,
                            size_t xi_len,
                            double p,
                            double *gradient,
                            size_t gradient_len,
                            double *energy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FOT_H */
