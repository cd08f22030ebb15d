//! BiCG for a primary system and its dual `A* x̃ = b̃`.

use super::{
    check_len, dual_residual, negligible, residual, DualSolution, DualView, IterationView,
    Observer, Recorder, SolverConfig, SolverError, MAX_RESTARTS,
};
use crate::history::{BreakdownKind, Status};
use crate::operator::LinearOperator;
use crate::scalar::Scalar;
use crate::vector::{dot_unchecked, norm2};

pub fn bicg<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    b: &[T],
    b_dual: &[T],
    x0: &[T],
    x0_dual: &[T],
    config: &SolverConfig,
) -> Result<DualSolution<T>, SolverError> {
    bicg_observed(op, b, b_dual, x0, x0_dual, config, &mut |_| {})
}

pub fn bicg_observed<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    b: &[T],
    b_dual: &[T],
    x0: &[T],
    x0_dual: &[T],
    config: &SolverConfig,
    observer: &mut Observer<'_, T>,
) -> Result<DualSolution<T>, SolverError> {
    config.validate()?;
    let n = op.dim();
    for v in [b, b_dual, x0, x0_dual] {
        check_len(n, v)?;
    }
    let bnorm = norm2(b);
    let btnorm = norm2(b_dual);
    let target = config.tol * bnorm;
    let target_dual = config.tol * btnorm;
    let btol = config.breakdown_tol;
    let mut rec = Recorder::new(bnorm, Some(btnorm));

    let mut x = x0.to_vec();
    let mut xt = x0_dual.to_vec();
    let mut r = residual(op, b, &x);
    let mut rt = dual_residual(op, b_dual, &xt);
    let mut mv = 2;
    let mut rnorm = norm2(&r);
    let mut rtnorm = norm2(&rt);
    rec.push(0, rnorm, Some(rtnorm), mv);
    observer(&IterationView {
        iteration: 0,
        x: &x,
        r: &r,
        correction: &[],
        dual: Some(DualView {
            x: &xt,
            r: &rt,
            correction: &[],
        }),
        stabilizer: None,
        matvecs: mv,
    });

    let mut p = vec![T::zero(); n];
    let mut pt = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut qt = vec![T::zero(); n];
    let mut it = 0;
    let mut restarts = 0;
    let mut status;

    loop {
        let mut rho = dot_unchecked(&rt, &r);
        status = Status::MaxIterations;
        if rnorm <= target && rtnorm <= target_dual {
            status = Status::Converged;
        } else if negligible(rho, rtnorm * rnorm, btol) {
            status = Status::Breakdown(BreakdownKind::Serious);
        } else {
            let mut beta = T::zero();
            let mut first = true;
            while it < config.max_itn {
                it += 1;
                if first {
                    p.copy_from_slice(&r);
                    pt.copy_from_slice(&rt);
                    first = false;
                } else {
                    let bc = beta.conjugate();
                    for i in 0..n {
                        p[i] = r[i] + beta * p[i];
                        pt[i] = rt[i] + bc * pt[i];
                    }
                }
                op.apply(&p, &mut q);
                op.apply_adjoint(&pt, &mut qt);
                mv += 2;
                let sigma = dot_unchecked(&pt, &q);
                if negligible(sigma, norm2(&pt) * norm2(&q), btol) {
                    status = Status::Breakdown(BreakdownKind::SecondKind);
                    rec.push(it, rnorm, Some(rtnorm), mv);
                    break;
                }
                let alpha = rho / sigma;
                let ac = alpha.conjugate();
                for i in 0..n {
                    x[i] += alpha * p[i];
                    xt[i] += ac * pt[i];
                    r[i] -= alpha * q[i];
                    rt[i] -= ac * qt[i];
                }
                rnorm = norm2(&r);
                rtnorm = norm2(&rt);
                rec.push(it, rnorm, Some(rtnorm), mv);
                observer(&IterationView {
                    iteration: it,
                    x: &x,
                    r: &r,
                    correction: &[],
                    dual: Some(DualView {
                        x: &xt,
                        r: &rt,
                        correction: &[],
                    }),
                    stabilizer: None,
                    matvecs: mv,
                });
                if rnorm <= target && rtnorm <= target_dual {
                    status = Status::Converged;
                    break;
                }
                let rho_next = dot_unchecked(&rt, &r);
                if negligible(rho_next, rtnorm * rnorm, btol) {
                    status = Status::Breakdown(BreakdownKind::Serious);
                    break;
                }
                beta = rho_next / rho;
                rho = rho_next;
            }
        }

        let r_true = residual(op, b, &x);
        let rt_true = dual_residual(op, b_dual, &xt);
        mv += 2;
        let true_norm = norm2(&r_true);
        let true_dual = norm2(&rt_true);
        if status == Status::Converged && (true_norm > target || true_dual > target_dual) {
            if restarts < MAX_RESTARTS && it < config.max_itn {
                restarts += 1;
                log::debug!("bicg: true residual above target, restarting");
                r = r_true;
                rt = rt_true;
                rnorm = true_norm;
                rtnorm = true_dual;
                continue;
            }
            status = Status::Stagnated;
        }
        return Ok(DualSolution {
            x,
            x_dual: xt,
            history: rec.finish(
                status,
                mv,
                true_norm / bnorm.max(f64::MIN_POSITIVE),
                restarts,
            ),
        });
    }
}
