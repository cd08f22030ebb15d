#ifndef RBICGSTAB_H
#define RBICGSTAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
enum RbStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  RB_STATUS_OK = 0,
  /**
   * The solver stopped without meeting the tolerance; see the history.
   */
  RB_STATUS_NOT_CONVERGED = 1,
  RB_STATUS_NULL_POINTER = -1,
  RB_STATUS_INVALID_ARGUMENT = -2,
  RB_STATUS_DIMENSION_MISMATCH = -3,
  RB_STATUS_IO = -4,
  RB_STATUS_PARSE = -5,
  RB_STATUS_FACTORIZATION = -6,
  RB_STATUS_SOLVER = -7,
  RB_STATUS_RECYCLE = -8,
  RB_STATUS_PANIC = -99,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum RbStatus RbStatus;
#else
typedef int32_t RbStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Terminal state of a solve, as stored in a history.
 */
enum RbSolveStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  RB_SOLVE_STATUS_CONVERGED = 0,
  RB_SOLVE_STATUS_MAX_ITERATIONS = 1,
  RB_SOLVE_STATUS_SERIOUS_BREAKDOWN = 2,
  RB_SOLVE_STATUS_SECOND_KIND_BREAKDOWN = 3,
  RB_SOLVE_STATUS_OMEGA_BREAKDOWN = 4,
  RB_SOLVE_STATUS_STAGNATED = 5,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum RbSolveStatus RbSolveStatus;
#else
typedef int32_t RbSolveStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

typedef struct RbFactors RbFactors;

typedef struct RbHistory RbHistory;

typedef struct RbMatrix RbMatrix;

typedef struct RbRecycleSpace RbRecycleSpace;

/**
 * Solver settings; start from `rb_solver_config_default()`.
 */
typedef struct RbSolverConfig {
  /**
   * Relative residual tolerance.
   */
  double tol;
  size_t max_itn;
  /**
   * Recycle-space dimension built by `rb_rbicg`.
   */
  size_t k;
  /**
   * Cycle length between recycle-space updates.
   */
  size_t s;
  /**
   * Seed of the BiCGSTAB shadow residual.
   */
  uint64_t seed;
  double breakdown_tol;
} RbSolverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last error on this thread, or NULL. The string stays
 * valid until the next failing call on the same thread.
 */
const char *rb_last_error(void);

struct RbSolverConfig rb_solver_config_default(void);

/**
 * Copies zero-based CSR arrays (`row_ptr` has `nrows + 1` entries,
 * `col_idx` and `values` have `row_ptr[nrows]`).
 */
RbStatus rb_matrix_from_csr(size_t nrows,
                            size_t ncols,
                            const size_t *row_ptr,
                            const size_t *col_idx,
                            const double *values,
                            struct RbMatrix **out);

/**
 * Builds a matrix from `nnz` zero-based triplets; duplicates are summed.
 */
RbStatus rb_matrix_from_triplets(size_t nrows,
                                 size_t ncols,
                                 size_t nnz,
                                 const size_t *rows,
                                 const size_t *cols,
                                 const double *values,
                                 struct RbMatrix **out);

/**
 * Reads a Matrix Market file.
 */
RbStatus rb_matrix_read(const char *path_, struct RbMatrix **out);

/**
 * Writes a Matrix Market coordinate file.
 */
RbStatus rb_matrix_write(const struct RbMatrix *m, const char *path_);

/**
 * Number of rows; 0 for NULL.
 */
size_t rb_matrix_nrows(const struct RbMatrix *m);

/**
 * Number of columns; 0 for NULL.
 */
size_t rb_matrix_ncols(const struct RbMatrix *m);

/**
 * Stored entries; 0 for NULL.
 */
size_t rb_matrix_nnz(const struct RbMatrix *m);

/**
 * `y = A x` with `x` of length `ncols` and `y` of length `nrows`.
 */
RbStatus rb_matrix_matvec(const struct RbMatrix *m, const double *x, double *y);

void rb_matrix_free(struct RbMatrix *m);

/**
 * ILUTP factorization `A P ≈ L U` used for split preconditioning.
 */
RbStatus rb_ilutp(const struct RbMatrix *m,
                  double drop_tol,
                  double pivot_tol,
                  struct RbFactors **out);

void rb_factors_free(struct RbFactors *f);

/**
 * BiCGSTAB. `x` holds the initial guess on entry and the solution on
 * return. `factors` and `config` may be NULL (no preconditioning, default
 * settings); `history` may be NULL.
 */
RbStatus rb_bicgstab(const struct RbMatrix *m,
                     const struct RbFactors *factors,
                     const double *b,
                     double *x,
                     const struct RbSolverConfig *config,
                     struct RbHistory **history);

/**
 * RBiCGSTAB with a recycle space built for the same (preconditioned)
 * operator, e.g. by `rb_rbicg` or `rb_recycle_refresh`.
 */
RbStatus rb_rbicgstab(const struct RbMatrix *m,
                      const struct RbFactors *factors,
                      const struct RbRecycleSpace *space,
                      const double *b,
                      double *x,
                      const struct RbSolverConfig *config,
                      struct RbHistory **history);

/**
 * BiCG on `A x = b` and `Aᵀ x̃ = b̃`; `x` and `x_dual` are overwritten
 * with the solutions.
 */
RbStatus rb_bicg(const struct RbMatrix *m,
                 const struct RbFactors *factors,
                 const double *b,
                 const double *b_dual,
                 double *x,
                 double *x_dual,
                 const struct RbSolverConfig *config,
                 struct RbHistory **history);

/**
 * RBiCG. `space_in` may be NULL. When `space_out` is not NULL it receives
 * the space of dimension at most `config.k` built during the solve (NULL
 * when that space is empty).
 */
RbStatus rb_rbicg(const struct RbMatrix *m,
                  const struct RbFactors *factors,
                  const struct RbRecycleSpace *space_in,
                  const double *b,
                  const double *b_dual,
                  double *x,
                  double *x_dual,
                  const struct RbSolverConfig *config,
                  struct RbRecycleSpace **space_out,
                  struct RbHistory **history);

/**
 * Loads a recycle space and recomputes its images for `A` (split
 * preconditioned by `factors` when not NULL).
 */
RbStatus rb_recycle_load(const char *path_,
                         const struct RbMatrix *m,
                         const struct RbFactors *factors,
                         struct RbRecycleSpace **out);

RbStatus rb_recycle_save(const struct RbRecycleSpace *space, const char *path_);

/**
 * The same bases with images recomputed for a new matrix.
 */
RbStatus rb_recycle_refresh(const struct RbRecycleSpace *space,
                            const struct RbMatrix *m,
                            const struct RbFactors *factors,
                            struct RbRecycleSpace **out);

/**
 * Number of recycle vectors; 0 for NULL.
 */
size_t rb_recycle_dim(const struct RbRecycleSpace *space);

void rb_recycle_free(struct RbRecycleSpace *space);

/**
 * Iterations recorded, excluding the initial residual; 0 for NULL.
 */
size_t rb_history_iterations(const struct RbHistory *h);

/**
 * Operator applications including the final residual check; 0 for NULL.
 */
size_t rb_history_matvecs(const struct RbHistory *h);

/**
 * Relative true residual of the returned solution; NaN for NULL.
 */
double rb_history_true_residual(const struct RbHistory *h);

RbStatus rb_history_status(const struct RbHistory *h, RbSolveStatus *out);

/**
 * Copies up to `len` relative residuals (one per record, starting with
 * the initial residual) into `out` and returns the number of records.
 * Pass `len = 0` to query the count.
 */
size_t rb_history_residuals(const struct RbHistory *h, double *out, size_t len);

/**
 * Writes the history as CSV, labelled with `solver` (may be NULL).
 */
RbStatus rb_history_write(const struct RbHistory *h, const char *solver, const char *path_);

void rb_history_free(struct RbHistory *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RBICGSTAB_H */
