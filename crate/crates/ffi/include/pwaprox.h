#ifndef PWAPROX_H
#define PWAPROX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PwaproxErrorCode {
  PWAPROX_ERROR_CODE_OK = 0,
  PWAPROX_ERROR_CODE_NULL_POINTER = 1,
  PWAPROX_ERROR_CODE_INVALID_INPUT = 2,
  PWAPROX_ERROR_CODE_DIMENSION_MISMATCH = 3,
  PWAPROX_ERROR_CODE_XI_TOO_SMALL = 4,
  PWAPROX_ERROR_CODE_INFEASIBLE = 5,
  PWAPROX_ERROR_CODE_NUMERICAL = 6,
  PWAPROX_ERROR_CODE_LIMIT_EXCEEDED = 7,
  PWAPROX_ERROR_CODE_PANIC = 8,
} PwaproxErrorCode;

/**
 * Outcome of an iterative solve, mirrored from the library's status.
 */
typedef enum PwaproxSolveStatus {
  PWAPROX_SOLVE_STATUS_TRIVIAL_GLOBAL = 0,
  PWAPROX_SOLVE_STATUS_CONVERGED = 1,
  PWAPROX_SOLVE_STATUS_MAX_ITERATIONS = 2,
  PWAPROX_SOLVE_STATUS_DIVERGED = 3,
  PWAPROX_SOLVE_STATUS_STAGE_INFEASIBLE = 4,
} PwaproxSolveStatus;

/**
 * Opaque handle for the precomputed fixed-point operator.
 */
typedef struct PwaproxOperator PwaproxOperator;

/**
 * Opaque problem handle.
 */
typedef struct PwaproxProblem PwaproxProblem;

typedef struct PwaproxSummary {
  enum PwaproxSolveStatus status;
  size_t iterations;
  double objective;
  double final_residual;
} PwaproxSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next call on this thread.
 */
const char *pwaprox_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *pwaprox_version(void);

/**
 * Parses a consensus problem from its JSON form.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a writable pointer.
 */
enum PwaproxErrorCode pwaprox_problem_from_json(const char *json, struct PwaproxProblem **out);

/**
 * Builds the MPC problem of a PWA system file. `horizon == 0` keeps the file's horizon.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a writable pointer.
 */
enum PwaproxErrorCode pwaprox_problem_from_pwa_json(const char *json,
                                                    size_t horizon,
                                                    struct PwaproxProblem **out);

/**
 * # Safety
 * `problem` must come from this library and not be used afterwards. Null is ignored.
 */
void pwaprox_problem_free(struct PwaproxProblem *problem);

/**
 * Writes the decision dimension and the parameter dimension.
 *
 * # Safety
 * `problem` must be a live handle; `n` and `param_dim` writable pointers.
 */
enum PwaproxErrorCode pwaprox_problem_dims(const struct PwaproxProblem *problem,
                                           size_t *n,
                                           size_t *param_dim);

/**
 * Precomputes the fixed-point operator for scaling `xi`.
 *
 * # Safety
 * `problem` must be a live handle and `out` a writable pointer.
 */
enum PwaproxErrorCode pwaprox_operator_new(const struct PwaproxProblem *problem,
                                           double xi,
                                           struct PwaproxOperator **out);

/**
 * # Safety
 * `op` must come from this library and not be used afterwards. Null is ignored.
 */
void pwaprox_operator_free(struct PwaproxOperator *op);

/**
 * Runs the fixed-point iteration. `z_out` may be null; otherwise it receives `n` values.
 * A non-converged run still returns `Ok`; inspect `summary->status`.
 *
 * # Safety
 * Handles must be live, `theta` must hold `theta_len` values, `z_out` must hold `z_len`
 * values when non-null, and `summary` must be writable.
 */
enum PwaproxErrorCode pwaprox_solve(const struct PwaproxProblem *problem,
                                    const struct PwaproxOperator *op,
                                    const double *theta,
                                    size_t theta_len,
                                    double gamma,
                                    double eps_tol,
                                    size_t max_iter,
                                    double *z_out,
                                    size_t z_len,
                                    struct PwaproxSummary *summary_out);

/**
 * ADMM baseline with penalty `rho`. Output conventions follow [`pwaprox_solve`].
 *
 * # Safety
 * As for [`pwaprox_solve`].
 */
enum PwaproxErrorCode pwaprox_admm(const struct PwaproxProblem *problem,
                                   const double *theta,
                                   size_t theta_len,
                                   double rho,
                                   double eps_tol,
                                   size_t max_iter,
                                   double *z_out,
                                   size_t z_len,
                                   struct PwaproxSummary *summary_out);

/**
 * Global optimum by enumeration. `cap == 0` uses the default combination cap.
 *
 * # Safety
 * `problem` must be live, `theta` must hold `theta_len` values, `z_out` must hold
 * `z_len` values when non-null, and `objective` must be writable.
 */
enum PwaproxErrorCode pwaprox_oracle(const struct PwaproxProblem *problem,
                                     const double *theta,
                                     size_t theta_len,
                                     uint64_t cap,
                                     double *z_out,
                                     size_t z_len,
                                     double *objective);

/**
 * Writes 1 when every stage set satisfies the regularity check, 0 otherwise.
 *
 * # Safety
 * `problem` must be live and `satisfied` writable.
 */
enum PwaproxErrorCode pwaprox_check_a3(const struct PwaproxProblem *problem, int *satisfied);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PWAPROX_H */
