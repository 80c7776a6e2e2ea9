#ifndef SDPSIEVE_H
#define SDPSIEVE_H

/* Generated by cbindgen from sdpsieve-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status of an FFI call. `Ok` is zero; mathematical verdicts reuse the CLI
 * exit-code values (10 infeasible, 11 recovery failed).
 */
typedef enum SdpSieveStatus {
  SDP_SIEVE_STATUS_OK = 0,
  SDP_SIEVE_STATUS_NULL_ARGUMENT = 1,
  SDP_SIEVE_STATUS_INVALID_UTF8 = 2,
  SDP_SIEVE_STATUS_PARSE_ERROR = 3,
  SDP_SIEVE_STATUS_INVALID_ARGUMENT = 4,
  SDP_SIEVE_STATUS_INFEASIBLE = 10,
  SDP_SIEVE_STATUS_RECOVERY_FAILED = 11,
  SDP_SIEVE_STATUS_INTERNAL_ERROR = 99,
} SdpSieveStatus;

/**
 * Opaque reduction outcome.
 */
typedef struct SdpSieveOutcome SdpSieveOutcome;

/**
 * Opaque parsed problem.
 */
typedef struct SdpSieveProblem SdpSieveProblem;

/**
 * Options for [`sdpsieve_reduce`]. Zero-initialize and adjust, or pass NULL
 * for the defaults (safe mode on, machine-epsilon tolerance, no cap).
 */
typedef struct SdpSieveReduceOptions {
  /**
   * Nonzero enables the tolerance-banded safe mode.
   */
  int32_t safe_mode;
  /**
   * Base tolerance; must be positive. Pass 0.0 for the default 2^-52.
   */
  double eps;
  /**
   * Cap on certificate steps; 0 means unlimited.
   */
  uint64_t max_iterations;
} SdpSieveReduceOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *sdpsieve_last_error(void);

/**
 * Parse a sparse SDPA problem from NUL-terminated text.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 * The returned handle must be released with [`sdpsieve_problem_free`].
 */
enum SdpSieveStatus sdpsieve_problem_parse(const char *text, struct SdpSieveProblem **out);

/**
 * Release a problem handle. NULL is ignored.
 *
 * # Safety
 * `problem` must come from [`sdpsieve_problem_parse`] and not be used again.
 */
void sdpsieve_problem_free(struct SdpSieveProblem *problem);

/**
 * Cone dimension, constraint count, and stored constraint nonzeros.
 *
 * # Safety
 * `problem` must be valid; output pointers may be NULL to skip a field.
 */
enum SdpSieveStatus sdpsieve_problem_dims(const struct SdpSieveProblem *problem,
                                          size_t *n,
                                          size_t *m,
                                          size_t *nnz);

/**
 * Run the sieve. Returns `Ok` for a reduction (possibly a no-op) and
 * `Infeasible` when infeasibility was certified; both set an outcome handle.
 *
 * # Safety
 * `problem` and `out` must be valid; `options` may be NULL for defaults.
 * The outcome must be released with [`sdpsieve_outcome_free`].
 */
enum SdpSieveStatus sdpsieve_reduce(const struct SdpSieveProblem *problem,
                                    const struct SdpSieveReduceOptions *options,
                                    struct SdpSieveOutcome **out);

/**
 * Release an outcome handle. NULL is ignored.
 *
 * # Safety
 * `outcome` must come from [`sdpsieve_reduce`] and not be used again.
 */
void sdpsieve_outcome_free(struct SdpSieveOutcome *outcome);

/**
 * 1 when the outcome certifies infeasibility, 0 otherwise (-1 on NULL).
 *
 * # Safety
 * `outcome` must be a valid handle or NULL.
 */
int32_t sdpsieve_outcome_is_infeasible(const struct SdpSieveOutcome *outcome);

/**
 * Number of certificate steps (0 on NULL).
 *
 * # Safety
 * `outcome` must be a valid handle or NULL.
 */
size_t sdpsieve_outcome_step_count(const struct SdpSieveOutcome *outcome);

/**
 * Reduced problem in canonical sparse SDPA text. Fails with
 * `InvalidArgument` when the outcome certified infeasibility.
 *
 * # Safety
 * Pointers must be valid; free the string with [`sdpsieve_string_free`].
 */
enum SdpSieveStatus sdpsieve_outcome_reduced_sdpa(const struct SdpSieveOutcome *outcome,
                                                  char **out);

/**
 * The reduction certificate as versioned text.
 *
 * # Safety
 * Pointers must be valid; free the string with [`sdpsieve_string_free`].
 */
enum SdpSieveStatus sdpsieve_outcome_certificate(const struct SdpSieveOutcome *outcome, char **out);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `text` must come from this library and not be used again.
 */
void sdpsieve_string_free(char *text);

/**
 * Score a solution file against the problem: writes the six DIMACS errors
 * into `errors[0..6]` and their largest absolute value into `max_abs`.
 *
 * # Safety
 * `errors` must point to at least six doubles; `max_abs` may be NULL.
 */
enum SdpSieveStatus sdpsieve_dimacs(const struct SdpSieveProblem *problem,
                                    const char *solution_text,
                                    double *errors,
                                    double *max_abs);

/**
 * Extend reduced dual multipliers to the original problem through the
 * certificate text. On `Ok`, `*y_out`/`*y_out_len` receive the full
 * multiplier vector (release with [`sdpsieve_doubles_free`]). On
 * `RecoveryFailed`, `*failed_step` receives the certificate step index.
 *
 * # Safety
 * Pointer arguments must be valid; `y_reduced` must hold `y_len` doubles.
 */
enum SdpSieveStatus sdpsieve_recover(const struct SdpSieveProblem *problem,
                                     const char *certificate_text,
                                     const double *y_reduced,
                                     size_t y_len,
                                     double shift,
                                     double **y_out,
                                     size_t *y_out_len,
                                     size_t *failed_step);

/**
 * Release a multiplier array returned by [`sdpsieve_recover`].
 *
 * # Safety
 * `values` and `len` must come from this library unchanged.
 */
void sdpsieve_doubles_free(double *values, size_t len);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SDPSIEVE_H */
