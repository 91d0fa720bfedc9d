#ifndef CSDA_TRANSPORT_H
#define CSDA_TRANSPORT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of the C interface.
 */
typedef enum CsdaStatus {
  CSDA_STATUS_OK = 0,
  /**
   * A null pointer, bad UTF-8 or an undersized buffer.
   */
  CSDA_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Rejected configuration or physical input.
   */
  CSDA_STATUS_INVALID_INPUT = 2,
  /**
   * The solve diverged or produced non-finite values.
   */
  CSDA_STATUS_NUMERICAL = 3,
  /**
   * File system or CSV failure.
   */
  CSDA_STATUS_IO = 4,
  /**
   * The handle is in the wrong state for the call.
   */
  CSDA_STATUS_STATE = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  CSDA_STATUS_PANIC = 6,
} CsdaStatus;

/**
 * Parsed run configuration.
 */
typedef struct CsdaConfig CsdaConfig;

/**
 * A single-species problem and, once solved, its solution.
 */
typedef struct CsdaProblem CsdaProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *csda_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *csda_version(void);

/**
 * Bragg-Kleeman stopping power `S(E) = E^(1-p) / (alpha p)`.
 */
enum CsdaStatus csda_bk_stopping(double alpha, double p, double energy, double *result);

/**
 * Henyey-Greenstein phase function on the circle.
 */
enum CsdaStatus csda_hg_phase(double gamma, double theta, double *result);

/**
 * Parse and validate a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `config` writable.
 */
enum CsdaStatus csda_config_from_file(const char *path, struct CsdaConfig **config);

/**
 * Release a configuration. Null is ignored.
 *
 * # Safety
 * `config` must come from [`csda_config_from_file`] and not be used afterwards.
 */
void csda_config_free(struct CsdaConfig *config);

/**
 * Run the configured study. `out_dir` overrides the output directory when
 * non-null; `threads` overrides the worker count when positive.
 *
 * # Safety
 * `config` must be a live handle and `out_dir` null or NUL-terminated.
 */
enum CsdaStatus csda_run(const struct CsdaConfig *config, const char *out_dir, size_t threads);

/**
 * Build a problem from a single-species configuration.
 *
 * # Safety
 * `config` must be a live handle and `problem` writable.
 */
enum CsdaStatus csda_problem_new(const struct CsdaConfig *config, struct CsdaProblem **problem);

/**
 * Solve the problem by source iteration.
 *
 * # Safety
 * `problem` must be a live handle.
 */
enum CsdaStatus csda_problem_solve(struct CsdaProblem *problem);

/**
 * Spatial dimensions of the dose array.
 *
 * # Safety
 * `problem` must be a live handle, `nx` and `ny` writable.
 */
enum CsdaStatus csda_problem_dose_dims(const struct CsdaProblem *problem, size_t *nx, size_t *ny);

/**
 * Copy the dose into `buffer` in x-major order, `buffer[k * ny + l]`.
 *
 * # Safety
 * `buffer` must hold `len` doubles.
 */
enum CsdaStatus csda_problem_dose(const struct CsdaProblem *problem, double *buffer, size_t len);

/**
 * Number of source iterations performed and whether the tolerance was met.
 *
 * # Safety
 * `problem` must be a live handle, `iterations` and `converged` writable.
 */
enum CsdaStatus csda_problem_iterations(const struct CsdaProblem *problem,
                                        size_t *iterations,
                                        bool *converged);

/**
 * Release a problem. Null is ignored.
 *
 * # Safety
 * `problem` must come from [`csda_problem_new`] and not be used afterwards.
 */
void csda_problem_free(struct CsdaProblem *problem);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSDA_TRANSPORT_H */
