#ifndef L1DG_H
#define L1DG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum L1dgStatus {
  L1DG_STATUS_OK = 0,
  L1DG_STATUS_INVALID_PARAMETER = 1,
  L1DG_STATUS_INVALID_INPUT = 2,
  L1DG_STATUS_DIMENSION_MISMATCH = 3,
  L1DG_STATUS_UNSUPPORTED = 4,
  L1DG_STATUS_NUMERICAL = 5,
  L1DG_STATUS_IO = 6,
  L1DG_STATUS_NULL_POINTER = 7,
  L1DG_STATUS_PANIC = 8,
} L1dgStatus;

/*
 The result of [`l1dg_solve`].
 */
typedef struct L1dgSolution L1dgSolution;

/*
 An assembled problem on one mesh.
 */
typedef struct L1dgSystem L1dgSystem;

/*
 Solver settings. Non-positive `alpha` selects the mesh-scaled default,
 non-positive `tolerance` and zero `max_iterations` the library defaults.
 */
typedef struct L1dgSolverOptions {
  double alpha;
  double tolerance;
  size_t max_iterations;
} L1dgSolverOptions;

typedef struct L1dgSolveInfo {
  size_t iterations;
  bool converged;
  double alpha;
  double lambda;
  double objective;
  double energy;
  double residual;
  double error_l2;
  double error_h1;
  double error_h2;
  double error_q;
  double error_linf;
} L1dgSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *l1dg_version(void);

/*
 Message of the last failed call on this thread; empty if none. Valid until
 the next failing call on the same thread.
 */
const char *l1dg_last_error_message(void);

struct L1dgSolverOptions l1dg_default_options(void);

/*
 Assembles the named problem (e.g. `"square-constant"`) with `n` cells per side.

 # Safety
 `problem` must be a NUL-terminated string and `out` a valid pointer.
 */
enum L1dgStatus l1dg_system_new(const char *problem,
                                size_t n,
                                double tau,
                                bool equal_jumps,
                                struct L1dgSystem **out);

/*
 # Safety
 `system` must be null or a handle from [`l1dg_system_new`] not yet freed.
 */
void l1dg_system_free(struct L1dgSystem *system);

/*
 Number of unknowns and of penalty rows.

 # Safety
 `system` must be a live handle; `unknowns` and `rows` valid pointers.
 */
enum L1dgStatus l1dg_system_size(const struct L1dgSystem *system, size_t *unknowns, size_t *rows);

/*
 `x^T B x + b^T x + |L x - d|_1` at `x` of length `len`.

 # Safety
 `system` must be a live handle, `x` valid for `len` reads, `out` valid.
 */
enum L1dgStatus l1dg_system_objective(const struct L1dgSystem *system,
                                      const double *x,
                                      size_t len,
                                      double *out);

/*
 Runs the solver from zero. A run that hits the iteration cap still
 succeeds; check `converged` in [`l1dg_solution_info`].

 # Safety
 `system` must be a live handle, `options` null or valid, `out` valid.
 */
enum L1dgStatus l1dg_solve(const struct L1dgSystem *system,
                           const struct L1dgSolverOptions *options,
                           struct L1dgSolution **out);

/*
 # Safety
 `solution` must be null or a handle from [`l1dg_solve`] not yet freed.
 */
void l1dg_solution_free(struct L1dgSolution *solution);

/*
 # Safety
 `solution` must be a live handle and `out` valid.
 */
enum L1dgStatus l1dg_solution_info(const struct L1dgSolution *solution, struct L1dgSolveInfo *out);

/*
 Copies the solution vector `(x_w, x_v)` into `buf`, which must hold exactly
 the number of unknowns.

 # Safety
 `solution` must be a live handle and `buf` valid for `len` writes.
 */
enum L1dgStatus l1dg_solution_copy_x(const struct L1dgSolution *solution, double *buf, size_t len);

/*
 `out_i = clamp(y_i - d_i / q_i, -alpha, alpha)`.

 # Safety
 `y`, `q`, `d` must be valid for `len` reads and `out` for `len` writes.
 */
enum L1dgStatus l1dg_prox_conjugate_l1(const double *y,
                                       const double *q,
                                       const double *d,
                                       size_t len,
                                       double alpha,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* L1DG_H */
