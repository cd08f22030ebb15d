//! BiCGSTAB with a seeded random shadow residual.

use super::{
    check_len, negligible, residual, shadow_vector, IterationView, Observer, Recorder, Solution,
    SolverConfig, SolverError, StabilizerView, MAX_RESTARTS,
};
use crate::history::{BreakdownKind, Status};
use crate::operator::LinearOperator;
use crate::scalar::Scalar;
use crate::vector::{axpy_in_place, dot_unchecked, norm2};

pub fn bicgstab<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    b: &[T],
    x0: &[T],
    config: &SolverConfig,
) -> Result<Solution<T>, SolverError> {
    bicgstab_observed(op, b, x0, config, &mut |_| {})
}

pub fn bicgstab_observed<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    b: &[T],
    x0: &[T],
    config: &SolverConfig,
    observer: &mut Observer<'_, T>,
) -> Result<Solution<T>, SolverError> {
    config.validate()?;
    let n = op.dim();
    check_len(n, b)?;
    check_len(n, x0)?;
    let bnorm = norm2(b);
    let target = config.tol * bnorm;
    let btol = config.breakdown_tol;
    let mut rec = Recorder::new(bnorm, None);
    if bnorm == 0.0 {
        rec.push(0, 0.0, None, 0);
        return Ok(Solution {
            x: vec![T::zero(); n],
            history: rec.finish(Status::Converged, 0, 0.0, 0),
        });
    }

    let mut x = x0.to_vec();
    let mut r = residual(op, b, &x);
    let mut mv = 1;
    let shadow: Vec<T> = shadow_vector(n, config.seed);
    let snorm = norm2(&shadow);
    let mut rnorm = norm2(&r);
    rec.push(0, rnorm, None, mv);
    observer(&IterationView {
        iteration: 0,
        x: &x,
        r: &r,
        correction: &[],
        dual: None,
        stabilizer: None,
        matvecs: mv,
    });

    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let mut it = 0;
    let mut restarts = 0;
    let mut status;

    loop {
        let mut rho = dot_unchecked(&shadow, &r);
        status = Status::MaxIterations;
        if rnorm <= target {
            status = Status::Converged;
        } else if negligible(rho, snorm * rnorm, btol) {
            if it == 0 {
                return Err(SolverError::ShadowOrthogonal);
            }
            status = Status::Breakdown(BreakdownKind::Serious);
        } else {
            let mut omega = T::zero();
            let mut beta = T::zero();
            let mut first = true;
            while it < config.max_itn {
                it += 1;
                if first {
                    p.copy_from_slice(&r);
                    first = false;
                } else {
                    for i in 0..n {
                        p[i] = r[i] + beta * (p[i] - omega * q[i]);
                    }
                }
                op.apply(&p, &mut q);
                mv += 1;
                let sigma = dot_unchecked(&shadow, &q);
                if negligible(sigma, snorm * norm2(&q), btol) {
                    status = Status::Breakdown(BreakdownKind::SecondKind);
                    rec.push(it, rnorm, None, mv);
                    break;
                }
                let alpha = rho / sigma;
                for i in 0..n {
                    s[i] = r[i] - alpha * q[i];
                }
                let snrm = norm2(&s);
                if snrm <= target {
                    axpy_in_place(alpha, &p, &mut x);
                    r.copy_from_slice(&s);
                    rnorm = snrm;
                    rec.push(it, rnorm, None, mv);
                    observer(&IterationView {
                        iteration: it,
                        x: &x,
                        r: &r,
                        correction: &[],
                        dual: None,
                        stabilizer: None,
                        matvecs: mv,
                    });
                    status = Status::Converged;
                    break;
                }
                op.apply(&s, &mut t);
                mv += 1;
                let tt = dot_unchecked(&t, &t).modulus();
                omega = if tt > 0.0 {
                    dot_unchecked(&t, &s).unscale(tt)
                } else {
                    T::zero()
                };
                if omega == T::zero() {
                    axpy_in_place(alpha, &p, &mut x);
                    r.copy_from_slice(&s);
                    rnorm = snrm;
                    rec.push(it, rnorm, None, mv);
                    status = Status::Breakdown(BreakdownKind::Omega);
                    break;
                }
                for i in 0..n {
                    x[i] += alpha * p[i] + omega * s[i];
                    r[i] = s[i] - omega * t[i];
                }
                rnorm = norm2(&r);
                rec.push(it, rnorm, None, mv);
                observer(&IterationView {
                    iteration: it,
                    x: &x,
                    r: &r,
                    correction: &[],
                    dual: None,
                    stabilizer: Some(StabilizerView {
                        s: &s,
                        t: &t,
                        omega,
                    }),
                    matvecs: mv,
                });
                if rnorm <= target {
                    status = Status::Converged;
                    break;
                }
                let rho_next = dot_unchecked(&shadow, &r);
                if negligible(rho_next, snorm * rnorm, btol) {
                    status = Status::Breakdown(BreakdownKind::Serious);
                    break;
                }
                beta = (rho_next / rho) * (alpha / omega);
                rho = rho_next;
            }
        }

        let r_true = residual(op, b, &x);
        mv += 1;
        let true_norm = norm2(&r_true);
        if status == Status::Converged && true_norm > target {
            if restarts < MAX_RESTARTS && it < config.max_itn {
                restarts += 1;
                log::debug!(
                    "bicgstab: true residual {:.3e} above target, restarting",
                    true_norm / bnorm
                );
                r = r_true;
                rnorm = true_norm;
                continue;
            }
            status = Status::Stagnated;
        }
        return Ok(Solution {
            x,
            history: rec.finish(status, mv, true_norm / bnorm, restarts),
        });
    }
}
