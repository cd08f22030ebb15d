/* Solves two systems with a nonsymmetric tridiagonal matrix that has a few
 * isolated small eigenvalues, recycling the space found by the first solve.
 *
 *   cargo build --release -p rbicgstab-ffi
 *   cc crates/ffi/examples/solve.c -Icrates/ffi/include \
 *      target/release/librbicgstab_ffi.a -lm -lpthread -ldl -o solve
 */
#include <stdio.h>
#include <stdlib.h>

#include "rbicgstab.h"

#define N 200

static int check(RbStatus st, const char *what) {
    if (st < 0) {
        fprintf(stderr, "%s: %s\n", what, rb_last_error());
        return 1;
    }
    return 0;
}

int main(void) {
    size_t rows[3 * N], cols[3 * N];
    double vals[3 * N], b[N], bt[N], x[N], xt[N];
    size_t nnz = 0;
    for (size_t i = 0; i < N; i++) {
        int small = i < 4;
        if (i > 4) { rows[nnz] = i; cols[nnz] = i - 1; vals[nnz++] = -1.1; }
        rows[nnz] = i; cols[nnz] = i; vals[nnz++] = small ? 0.01 * (double)(i + 1) : 3.0 + (double)i / N;
        if (i + 1 < N && !small) { rows[nnz] = i; cols[nnz] = i + 1; vals[nnz++] = -0.9; }
        b[i] = 1.0;
        bt[i] = 1.0;
        x[i] = xt[i] = 0.0;
    }

    RbMatrix *a = NULL;
    RbRecycleSpace *space = NULL;
    RbHistory *h = NULL;
    RbSolverConfig cfg = rb_solver_config_default();
    cfg.tol = 1e-10;
    cfg.k = 4;

    if (check(rb_matrix_from_triplets(N, N, nnz, rows, cols, vals, &a), "matrix")) return 1;
    if (check(rb_rbicg(a, NULL, NULL, b, bt, x, xt, &cfg, &space, &h), "rbicg")) return 1;
    printf("rbicg:     %zu iterations, %zu recycle vectors\n", rb_history_iterations(h), rb_recycle_dim(space));
    rb_history_free(h);

    for (size_t i = 0; i < N; i++) { b[i] = (double)(i % 7); x[i] = 0.0; }
    if (check(rb_bicgstab(a, NULL, b, x, &cfg, &h), "bicgstab")) return 1;
    printf("bicgstab:  %zu iterations\n", rb_history_iterations(h));
    rb_history_free(h);

    for (size_t i = 0; i < N; i++) x[i] = 0.0;
    if (check(rb_rbicgstab(a, NULL, space, b, x, &cfg, &h), "rbicgstab")) return 1;
    printf("rbicgstab: %zu iterations, true residual %.2e\n", rb_history_iterations(h), rb_history_true_residual(h));

    rb_history_free(h);
    rb_recycle_free(space);
    rb_matrix_free(a);
    return 0;
}
