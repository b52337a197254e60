#ifndef SINKHORN_NEWTON_H
#define SINKHORN_NEWTON_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SnSolver {
  SN_SOLVER_SINKHORN = 0,
  SN_SOLVER_NEWTON_PRIMAL = 1,
  SN_SOLVER_NEWTON_DUAL = 2,
} SnSolver;

typedef enum SnStatus {
  SN_STATUS_OK = 0,
  /**
   * The solver ran to its iteration cap; the solution handle is still set.
   */
  SN_STATUS_NOT_CONVERGED = 1,
  SN_STATUS_NULL_POINTER = 2,
  SN_STATUS_INVALID_ARGUMENT = 3,
  SN_STATUS_NUMERICAL = 4,
  SN_STATUS_BUFFER_TOO_SMALL = 5,
  SN_STATUS_INTERNAL = 6,
} SnStatus;

/**
 * Marginals plus the Gibbs kernel for a fixed epsilon.
 */
typedef struct SnProblem SnProblem;

typedef struct SnSolution SnSolution;

/**
 * Solver settings. Start from [`sn_options_default`].
 */
typedef struct SnOptions {
  enum SnSolver solver;
  double outer_tol;
  size_t max_outer_iters;
  double cg_tol;
  size_t cg_max_iters;
  double max_step_ratio;
} SnOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *sn_last_error_message(void);

struct SnOptions sn_options_default(enum SnSolver solver);

/**
 * Builds a problem from marginals `a` (length `n`), `b` (length `m`) and a
 * row-major `n * m` cost matrix.
 *
 * # Safety
 * The pointers must reference at least `n`, `m` and `n * m` doubles, and
 * `out` must be writable.
 */
enum SnStatus sn_problem_new(const double *a,
                             size_t n,
                             const double *b,
                             size_t m,
                             const double *cost,
                             double epsilon,
                             struct SnProblem **out);

/**
 * # Safety
 * `problem` must come from [`sn_problem_new`] and not be freed twice.
 */
void sn_problem_free(struct SnProblem *problem);

/**
 * Runs the selected solver. Returns `SN_STATUS_NOT_CONVERGED` with `*out`
 * set when the iteration cap was reached first.
 *
 * # Safety
 * `problem` must be a live handle, `options` readable and `out` writable.
 */
enum SnStatus sn_solve(const struct SnProblem *problem,
                       const struct SnOptions *options,
                       struct SnSolution **out);

/**
 * # Safety
 * `solution` must come from [`sn_solve`] and not be freed twice.
 */
void sn_solution_free(struct SnSolution *solution);

/**
 * # Safety
 * `solution` must be a live handle or null.
 */
bool sn_solution_converged(const struct SnSolution *solution);

/**
 * Outer iterations performed (Sinkhorn sweeps or Newton steps).
 *
 * # Safety
 * `solution` must be a live handle or null.
 */
size_t sn_solution_iterations(const struct SnSolution *solution);

/**
 * Cumulative inner CG iterations; equals the sweep count for Sinkhorn.
 *
 * # Safety
 * `solution` must be a live handle or null.
 */
size_t sn_solution_total_cg_iters(const struct SnSolution *solution);

/**
 * Final infinity-norm constraint violation, NaN for a null handle.
 *
 * # Safety
 * `solution` must be a live handle or null.
 */
double sn_solution_final_violation(const struct SnSolution *solution);

/**
 * Number of recorded violations, including the initial point.
 *
 * # Safety
 * `solution` must be a live handle or null.
 */
size_t sn_solution_history_len(const struct SnSolution *solution);

/**
 * Copies the violation history into `out`.
 *
 * # Safety
 * `solution` must be a live handle and `out` must hold `len` doubles.
 */
enum SnStatus sn_solution_violations(const struct SnSolution *solution, double *out, size_t len);

/**
 * Copies the `n * m` plan in row-major order into `out`.
 *
 * # Safety
 * `solution` must be a live handle and `out` must hold `len` doubles.
 */
enum SnStatus sn_solution_plan(const struct SnSolution *solution, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SINKHORN_NEWTON_H */
