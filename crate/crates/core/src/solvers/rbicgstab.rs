//! RBiCGSTAB: BiCGSTAB on the operator deflated by a recycle space.
//!
//! Both matrix products of an iteration are followed by the projection
//! `(I − C Ĉ*)`, whose coefficients are accumulated in `x_c`; the returned
//! solution is `x − U x_c`.

use super::{
    check_len, negligible, residual, shadow_vector, IterationView, Observer, Recorder, Solution,
    SolverConfig, SolverError, StabilizerView, MAX_RESTARTS,
};
use crate::error::DimensionMismatch;
use crate::history::{BreakdownKind, Status};
use crate::operator::LinearOperator;
use crate::recycle::RecycleSpace;
use crate::scalar::Scalar;
use crate::vector::{dot_unchecked, norm2};

pub fn rbicgstab<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    b: &[T],
    x0: &[T],
    recycle: &RecycleSpace<T>,
    config: &SolverConfig,
) -> Result<Solution<T>, SolverError> {
    rbicgstab_observed(op, b, x0, recycle, config, &mut |_| {})
}

pub fn rbicgstab_observed<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    b: &[T],
    x0: &[T],
    recycle: &RecycleSpace<T>,
    config: &SolverConfig,
    observer: &mut Observer<'_, T>,
) -> Result<Solution<T>, SolverError> {
    config.validate()?;
    let n = op.dim();
    check_len(n, b)?;
    check_len(n, x0)?;
    if recycle.n() != n {
        return Err(DimensionMismatch {
            expected: n,
            found: recycle.n(),
        }
        .into());
    }
    let k = recycle.k();
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

    // Projected start: x₀ = x₋₁ + U Ĉ* r₋₁, r₀ = (I − C Ĉ*) r₋₁.
    let mut x = x0.to_vec();
    let mut r = residual(op, b, &x);
    let mut mv = 1;
    let coeffs = recycle.deflate(&mut r);
    recycle.add_u(T::one(), &coeffs, &mut x);
    let mut xc = vec![T::zero(); k];

    // r̃₀ = (I − C̃ Č*) r̃₋₁ keeps the shadow orthogonal to C.
    let mut shadow: Vec<T> = shadow_vector(n, config.seed);
    recycle.deflate_dual(&mut shadow);
    let snorm = norm2(&shadow);

    let mut rnorm = norm2(&r);
    rec.push(0, rnorm, None, mv);
    observer(&IterationView {
        iteration: 0,
        x: &x,
        r: &r,
        correction: &xc,
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
                let zeta = recycle.deflate(&mut q);
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
                    for i in 0..n {
                        x[i] += alpha * p[i];
                    }
                    for j in 0..k {
                        xc[j] += alpha * zeta[j];
                    }
                    r.copy_from_slice(&s);
                    rnorm = snrm;
                    rec.push(it, rnorm, None, mv);
                    observer(&IterationView {
                        iteration: it,
                        x: &x,
                        r: &r,
                        correction: &xc,
                        dual: None,
                        stabilizer: None,
                        matvecs: mv,
                    });
                    status = Status::Converged;
                    break;
                }
                op.apply(&s, &mut t);
                mv += 1;
                let gamma = recycle.deflate(&mut t);
                let tt = dot_unchecked(&t, &t).modulus();
                omega = if tt > 0.0 {
                    dot_unchecked(&t, &s).unscale(tt)
                } else {
                    T::zero()
                };
                if omega == T::zero() {
                    for i in 0..n {
                        x[i] += alpha * p[i];
                    }
                    for j in 0..k {
                        xc[j] += alpha * zeta[j];
                    }
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
                // Round-off lets C̃* r drift as r shrinks; re-project and move
                // the removed part into x_c so b − A(x − U x_c) = r still holds.
                let drift = recycle.deflate(&mut r);
                for j in 0..k {
                    xc[j] += alpha * zeta[j] + omega * gamma[j] - drift[j];
                }
                rnorm = norm2(&r);
                rec.push(it, rnorm, None, mv);
                observer(&IterationView {
                    iteration: it,
                    x: &x,
                    r: &r,
                    correction: &xc,
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

        // x ← x − U x_c
        recycle.add_u(-T::one(), &xc, &mut x);
        xc.iter_mut().for_each(|v| *v = T::zero());
        let mut r_true = residual(op, b, &x);
        mv += 1;
        let true_norm = norm2(&r_true);
        if status == Status::Converged && true_norm > target {
            if restarts < MAX_RESTARTS && it < config.max_itn {
                restarts += 1;
                log::debug!(
                    "rbicgstab: true residual {:.3e} above target, restarting",
                    true_norm / bnorm
                );
                let coeffs = recycle.deflate(&mut r_true);
                recycle.add_u(T::one(), &coeffs, &mut x);
                rnorm = norm2(&r_true);
                r = r_true;
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
