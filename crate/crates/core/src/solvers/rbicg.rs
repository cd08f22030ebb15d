//! RBiCG: BiCG on the primary and dual systems, both deflated by a recycle
//! space, while a new space is built from the direction vectors.

use super::{
    check_len, dual_residual, negligible, residual, DualView, IterationView, Observer,
    RbicgSolution, Recorder, SolverConfig, SolverError, MAX_RESTARTS,
};
use crate::error::DimensionMismatch;
use crate::history::{BreakdownKind, Status};
use crate::operator::LinearOperator;
use crate::recycle::{update_recycle_space, CapturedCycle, CycleBuilder, RecycleSpace};
use crate::scalar::Scalar;
use crate::vector::{dot_unchecked, norm2};

pub fn rbicg<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    b: &[T],
    b_dual: &[T],
    x0: &[T],
    x0_dual: &[T],
    recycle: Option<&RecycleSpace<T>>,
    config: &SolverConfig,
) -> Result<RbicgSolution<T>, SolverError> {
    rbicg_observed(op, b, b_dual, x0, x0_dual, recycle, config, &mut |_| {})
}

/// Builds the next space from a finished cycle; a failed update keeps the
/// current one.
fn absorb<T: Scalar>(
    cycle: CapturedCycle<T>,
    built: &mut Option<RecycleSpace<T>>,
    cycles: &mut Vec<CapturedCycle<T>>,
    config: &SolverConfig,
) {
    if config.k > 0 && !cycle.is_empty() {
        match update_recycle_space(std::slice::from_ref(&cycle), built.as_ref(), config.k) {
            Ok(next) => *built = Some(next),
            Err(e) => log::warn!("rbicg: recycle space update failed, keeping previous space: {e}"),
        }
    }
    if !config.keep_cycles {
        cycles.clear();
    }
    cycles.push(cycle);
}

#[allow(clippy::too_many_arguments)]
pub fn rbicg_observed<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    b: &[T],
    b_dual: &[T],
    x0: &[T],
    x0_dual: &[T],
    recycle: Option<&RecycleSpace<T>>,
    config: &SolverConfig,
    observer: &mut Observer<'_, T>,
) -> Result<RbicgSolution<T>, SolverError> {
    config.validate()?;
    let n = op.dim();
    for v in [b, b_dual, x0, x0_dual] {
        check_len(n, v)?;
    }
    let empty;
    let space = match recycle {
        Some(s) => {
            if s.n() != n {
                return Err(DimensionMismatch {
                    expected: n,
                    found: s.n(),
                }
                .into());
            }
            s
        }
        None => {
            empty = RecycleSpace::empty(n);
            &empty
        }
    };
    let k = space.k();
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
    let c = space.deflate(&mut r);
    space.add_u(T::one(), &c, &mut x);
    let c = space.deflate_dual(&mut rt);
    space.add_ut(T::one(), &c, &mut xt);
    let mut xc = vec![T::zero(); k];
    let mut xtc = vec![T::zero(); k];

    let mut rnorm = norm2(&r);
    let mut rtnorm = norm2(&rt);
    rec.push(0, rnorm, Some(rtnorm), mv);
    observer(&IterationView {
        iteration: 0,
        x: &x,
        r: &r,
        correction: &xc,
        dual: Some(DualView {
            x: &xt,
            r: &rt,
            correction: &xtc,
        }),
        stabilizer: None,
        matvecs: mv,
    });

    let mut built = (k > 0 && config.k > 0).then(|| space.clone());
    let mut cycles = Vec::new();
    let mut builder = CycleBuilder::new(n);

    let mut p = vec![T::zero(); n];
    let mut pt = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut zt = vec![T::zero(); n];
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
                op.apply(&p, &mut z);
                op.apply_adjoint(&pt, &mut zt);
                mv += 2;
                let mut q = z.clone();
                let zeta = space.deflate(&mut q);
                let mut qt = zt.clone();
                let zeta_t = space.deflate_dual(&mut qt);
                let sigma = dot_unchecked(&pt, &q);
                if negligible(sigma, norm2(&pt) * norm2(&q), btol) {
                    status = Status::Breakdown(BreakdownKind::SecondKind);
                    rec.push(it, rnorm, Some(rtnorm), mv);
                    break;
                }
                let alpha = rho / sigma;
                let ac = alpha.conjugate();
                if config.k > 0 {
                    builder.push(&p, &z, &pt, &zt, &r, &rt, alpha, beta);
                }
                for i in 0..n {
                    x[i] += alpha * p[i];
                    xt[i] += ac * pt[i];
                    r[i] -= alpha * q[i];
                    rt[i] -= ac * qt[i];
                }
                // Same re-projection against round-off drift as in RBiCGSTAB.
                let drift = space.deflate(&mut r);
                let drift_t = space.deflate_dual(&mut rt);
                for j in 0..k {
                    xc[j] += alpha * zeta[j] - drift[j];
                    xtc[j] += ac * zeta_t[j] - drift_t[j];
                }
                rnorm = norm2(&r);
                rtnorm = norm2(&rt);
                rec.push(it, rnorm, Some(rtnorm), mv);
                observer(&IterationView {
                    iteration: it,
                    x: &x,
                    r: &r,
                    correction: &xc,
                    dual: Some(DualView {
                        x: &xt,
                        r: &rt,
                        correction: &xtc,
                    }),
                    stabilizer: None,
                    matvecs: mv,
                });
                if config.k > 0 && builder.fresh() == config.s {
                    absorb(builder.finish(), &mut built, &mut cycles, config);
                }
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

        // x ← x − U x_c, x̃ ← x̃ − Ũ x̃_c
        space.add_u(-T::one(), &xc, &mut x);
        space.add_ut(-T::one(), &xtc, &mut xt);
        xc.iter_mut()
            .chain(xtc.iter_mut())
            .for_each(|v| *v = T::zero());
        let mut r_true = residual(op, b, &x);
        let mut rt_true = dual_residual(op, b_dual, &xt);
        mv += 2;
        let true_norm = norm2(&r_true);
        let true_dual = norm2(&rt_true);
        if status == Status::Converged && (true_norm > target || true_dual > target_dual) {
            if restarts < MAX_RESTARTS && it < config.max_itn {
                restarts += 1;
                log::debug!("rbicg: true residual above target, restarting");
                let c = space.deflate(&mut r_true);
                space.add_u(T::one(), &c, &mut x);
                let c = space.deflate_dual(&mut rt_true);
                space.add_ut(T::one(), &c, &mut xt);
                rnorm = norm2(&r_true);
                rtnorm = norm2(&rt_true);
                r = r_true;
                rt = rt_true;
                continue;
            }
            status = Status::Stagnated;
        }
        if config.k > 0 && builder.fresh() > 0 {
            absorb(builder.finish(), &mut built, &mut cycles, config);
        }
        let recycle = if config.k == 0 {
            RecycleSpace::empty(n)
        } else {
            built.unwrap_or_else(|| RecycleSpace::empty(n))
        };
        return Ok(RbicgSolution {
            x,
            x_dual: xt,
            history: rec.finish(
                status,
                mv,
                true_norm / bnorm.max(f64::MIN_POSITIVE),
                restarts,
            ),
            cycles,
            recycle,
        });
    }
}
