#ifndef DCPM_H
#define DCPM_H

/* Generated by cbindgen from dcpm-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every FFI call.
 */
typedef enum {
  DCPM_STATUS_OK = 0,
  /**
   * A pointer argument was null.
   */
  DCPM_STATUS_NULL_ARGUMENT = 1,
  /**
   * The JSON did not parse into an instance.
   */
  DCPM_STATUS_PARSE_ERROR = 2,
  /**
   * The instance violates a structural invariant.
   */
  DCPM_STATUS_INVALID_INSTANCE = 3,
  /**
   * The solver failed (numerical breakdown or invalid program).
   */
  DCPM_STATUS_SOLVE_ERROR = 4,
  /**
   * The exact solver hit its limits before proving optimality.
   */
  DCPM_STATUS_TIMEOUT = 5,
  /**
   * The model is infeasible.
   */
  DCPM_STATUS_INFEASIBLE = 6,
  /**
   * The simulation exceeded its safety horizon.
   */
  DCPM_STATUS_HORIZON_EXCEEDED = 7,
} DcpmStatus;

/**
 * Opaque handle to a validated problem instance.
 */
typedef struct DcpmInstance DcpmInstance;

/**
 * Parses an instance from JSON. On success writes a fresh handle to `out`;
 * the caller owns it and must release it with [`dcpm_instance_free`].
 *
 * # Safety
 * `json` must be a valid NUL-terminated C string and `out` a valid pointer.
 */
DcpmStatus dcpm_instance_from_json(const char *json, DcpmInstance **out);

/**
 * Releases a handle returned by [`dcpm_instance_from_json`]. Null is a
 * no-op.
 *
 * # Safety
 * `handle` must be null or a pointer previously returned by
 * [`dcpm_instance_from_json`] that has not been freed yet.
 */
void dcpm_instance_free(DcpmInstance *handle);

/**
 * Solves the instance exactly. Writes the optimal total energy in joules
 * to `value`. `max_seconds <= 0` and `max_nodes == 0` mean unlimited.
 *
 * # Safety
 * `handle` must be a live instance handle and `value` a valid pointer.
 */
DcpmStatus dcpm_solve_offline(const DcpmInstance *handle,
                              double max_seconds,
                              uint64_t max_nodes,
                              double *value);

/**
 * Solves the linear relaxation and writes its value to `value`.
 *
 * # Safety
 * `handle` must be a live instance handle and `value` a valid pointer.
 */
DcpmStatus dcpm_lp_relaxation(const DcpmInstance *handle, double *value);

/**
 * Runs the online policy. `randomized != 0` substitutes the random
 * permutation assignment. Writes the total energy and the number of jobs
 * finished within their deadline.
 *
 * # Safety
 * `handle` must be a live instance handle; `energy` and `deadline_hits`
 * must be valid pointers.
 */
DcpmStatus dcpm_run_online(const DcpmInstance *handle,
                           double t_wait,
                           uint32_t n_ja,
                           int32_t randomized,
                           uint64_t seed,
                           double *energy,
                           uint32_t *deadline_hits);

/**
 * Copies the last error message on this thread into `buf` (truncated,
 * always NUL-terminated) and returns its full length in bytes.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes, or be null (then only
 * the length is returned).
 */
uintptr_t dcpm_last_error(char *buf, uintptr_t len);

#endif  /* DCPM_H */
