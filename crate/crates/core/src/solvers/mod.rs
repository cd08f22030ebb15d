//! Krylov solvers: BiCG and BiCGSTAB, their recycling variants RBiCG and
//! RBiCGSTAB, and a full-recurrence generalized bi-Lanczos harness.
//!
//! The core routines work on any [`LinearOperator`]. The `*_solve`
//! functions take a sparse matrix and optional ILUTP factors; with factors
//! the iteration runs on the split-preconditioned operator and the solution
//! is mapped back to the original unknowns. A recycle space handed to them
//! must then be consistent with the preconditioned operator.

mod bicg;
mod bicgstab;
pub mod bilanczos;
mod rbicg;
mod rbicgstab;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::DimensionMismatch;
use crate::history::{ConvergenceHistory, IterationRecord, Status};
use crate::operator::LinearOperator;
use crate::precond::{IlutpFactors, PreconditionedOperator};
use crate::recycle::{CapturedCycle, RecycleError, RecycleSpace};
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

pub use bicg::{bicg, bicg_observed};
pub use bicgstab::{bicgstab, bicgstab_observed};
pub use bilanczos::{gen_bilanczos_full, BiLanczosOutput, GenBiLanczosHarness, HarnessDefects};
pub use rbicg::{rbicg, rbicg_observed};
pub use rbicgstab::{rbicgstab, rbicgstab_observed};

/// Restarts allowed when the true residual misses the tolerance after the
/// recursive one met it.
const MAX_RESTARTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Relative residual tolerance `‖r‖ ≤ tol ‖b‖`.
    pub tol: f64,
    pub max_itn: usize,
    /// Dimension of the recycle space RBiCG builds.
    pub k: usize,
    /// Cycle length in iterations between recycle-space updates.
    pub s: usize,
    /// Seed for the random shadow residual.
    pub seed: u64,
    /// Relative threshold below which an inner product counts as zero.
    pub breakdown_tol: f64,
    /// Return every captured cycle from RBiCG instead of only the last.
    pub keep_cycles: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_itn: 1000,
            k: 20,
            s: 25,
            seed: 0,
            breakdown_tol: 1e-14,
            keep_cycles: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.breakdown_tol > 0.0) {
            return bad("breakdown_tol must be positive");
        }
        if self.max_itn == 0 {
            return bad("max_itn must be positive");
        }
        if self.s == 0 {
            return bad("cycle length s must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("shadow residual is orthogonal to the projected initial residual; reseed or choose another initial guess")]
    ShadowOrthogonal,
    #[error(transparent)]
    Recycle(#[from] RecycleError),
}

/// Result of a single-system solve.
#[derive(Debug, Clone)]
pub struct Solution<T: Scalar> {
    pub x: Vec<T>,
    pub history: ConvergenceHistory,
}

/// Result of a primary/dual solve.
#[derive(Debug, Clone)]
pub struct DualSolution<T: Scalar> {
    pub x: Vec<T>,
    pub x_dual: Vec<T>,
    pub history: ConvergenceHistory,
}

/// Result of RBiCG: the solutions plus the recycle space built from its cycles.
#[derive(Debug, Clone)]
pub struct RbicgSolution<T: Scalar> {
    pub x: Vec<T>,
    pub x_dual: Vec<T>,
    pub history: ConvergenceHistory,
    /// Captured cycles: the last one, or all with `keep_cycles`.
    pub cycles: Vec<CapturedCycle<T>>,
    /// Space of dimension at most `config.k` built from the cycles, starting
    /// from the input space. Empty when `config.k == 0`.
    pub recycle: RecycleSpace<T>,
}

/// Dual-system quantities exposed to observers.
#[derive(Debug, Clone, Copy)]
pub struct DualView<'a, T> {
    pub x: &'a [T],
    pub r: &'a [T],
    /// Accumulated `Ũ` coefficients; the dual iterate is `x − Ũ correction`.
    pub correction: &'a [T],
}

/// BiCGSTAB stabilization step: `r = s − ω t`.
#[derive(Debug, Clone, Copy)]
pub struct StabilizerView<'a, T> {
    pub s: &'a [T],
    pub t: &'a [T],
    pub omega: T,
}

/// State after an iteration, handed to observers.
///
/// For recycling solvers the approximate solution is `x − U correction`,
/// where `U` is the primary recycle basis.
#[derive(Debug, Clone, Copy)]
pub struct IterationView<'a, T> {
    pub iteration: usize,
    pub x: &'a [T],
    pub r: &'a [T],
    pub correction: &'a [T],
    pub dual: Option<DualView<'a, T>>,
    pub stabilizer: Option<StabilizerView<'a, T>>,
    pub matvecs: usize,
}

pub type Observer<'o, T> = dyn FnMut(&IterationView<'_, T>) + 'o;

/// The seeded shadow vector `r̃₋₁` shared by BiCGSTAB and RBiCGSTAB.
pub fn shadow_vector<T: Scalar>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| T::sample_unit(&mut rng)).collect()
}

pub(crate) fn check_len(n: usize, v: &[impl Sized]) -> Result<(), DimensionMismatch> {
    if v.len() == n {
        Ok(())
    } else {
        Err(DimensionMismatch {
            expected: n,
            found: v.len(),
        })
    }
}

/// `b − A x`
pub(crate) fn residual<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    b: &[T],
    x: &[T],
) -> Vec<T> {
    let mut r = vec![T::zero(); b.len()];
    op.apply(x, &mut r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    r
}

/// `b̃ − A* x̃`
pub(crate) fn dual_residual<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    b: &[T],
    x: &[T],
) -> Vec<T> {
    let mut r = vec![T::zero(); b.len()];
    op.apply_adjoint(x, &mut r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    r
}

/// `|a| ≤ tol · scale`, also catching non-finite values.
pub(crate) fn negligible<T: Scalar>(a: T, scale: f64, tol: f64) -> bool {
    let m = a.modulus();
    !(m > tol * scale) || !m.is_finite()
}

/// Builds the record list and timing of a solve.
pub(crate) struct Recorder {
    start: Instant,
    norm: f64,
    dual_norm: Option<f64>,
    pub(crate) records: Vec<IterationRecord>,
}

impl Recorder {
    pub(crate) fn new(norm: f64, dual_norm: Option<f64>) -> Self {
        Self {
            start: Instant::now(),
            norm: norm.max(f64::MIN_POSITIVE),
            dual_norm: dual_norm.map(|d| d.max(f64::MIN_POSITIVE)),
            records: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, iteration: usize, rnorm: f64, dual: Option<f64>, matvecs: usize) {
        let seconds = self.start.elapsed().as_secs_f64();
        self.records.push(IterationRecord {
            iteration,
            residual: rnorm / self.norm,
            dual_residual: dual.zip(self.dual_norm).map(|(d, n)| d / n),
            true_residual: None,
            matvecs,
            seconds,
        });
    }

    pub(crate) fn finish(
        mut self,
        status: Status,
        matvecs: usize,
        true_residual: f64,
        restarts: usize,
    ) -> ConvergenceHistory {
        if let Some(last) = self.records.last_mut() {
            last.true_residual = Some(true_residual);
        }
        ConvergenceHistory {
            records: self.records,
            status,
            matvecs,
            seconds: self.start.elapsed().as_secs_f64(),
            true_residual,
            restarts,
        }
    }
}

fn precondition<'a, T: Scalar>(
    a: &'a SparseMatrix<T>,
    factors: &'a IlutpFactors<T>,
) -> Result<PreconditionedOperator<'a, T>, SolverError> {
    Ok(PreconditionedOperator::split(a, factors)?)
}

/// BiCGSTAB on `A x = b`, optionally split-preconditioned.
pub fn bicgstab_solve<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &[T],
    x_init: &[T],
    precond: Option<&IlutpFactors<T>>,
    config: &SolverConfig,
) -> Result<Solution<T>, SolverError> {
    check_len(a.nrows(), b)?;
    check_len(a.nrows(), x_init)?;
    match precond {
        None => bicgstab(a, b, x_init, config),
        Some(f) => {
            let op = precondition(a, f)?;
            let sol = bicgstab(
                &op,
                &op.transform_rhs(b),
                &op.transform_initial(x_init),
                config,
            )?;
            Ok(Solution {
                x: op.recover_solution(&sol.x),
                history: sol.history,
            })
        }
    }
}

/// RBiCGSTAB on `A x = b` with a recycle space consistent with the
/// (preconditioned) operator.
pub fn rbicgstab_solve<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &[T],
    x_init: &[T],
    recycle: &RecycleSpace<T>,
    precond: Option<&IlutpFactors<T>>,
    config: &SolverConfig,
) -> Result<Solution<T>, SolverError> {
    check_len(a.nrows(), b)?;
    check_len(a.nrows(), x_init)?;
    match precond {
        None => rbicgstab(a, b, x_init, recycle, config),
        Some(f) => {
            let op = precondition(a, f)?;
            let sol = rbicgstab(
                &op,
                &op.transform_rhs(b),
                &op.transform_initial(x_init),
                recycle,
                config,
            )?;
            Ok(Solution {
                x: op.recover_solution(&sol.x),
                history: sol.history,
            })
        }
    }
}

/// BiCG on `A x = b` and `A* x̃ = b̃`.
pub fn bicg_solve<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &[T],
    b_dual: &[T],
    x_init: &[T],
    x_init_dual: &[T],
    precond: Option<&IlutpFactors<T>>,
    config: &SolverConfig,
) -> Result<DualSolution<T>, SolverError> {
    for v in [b, b_dual, x_init, x_init_dual] {
        check_len(a.nrows(), v)?;
    }
    match precond {
        None => bicg(a, b, b_dual, x_init, x_init_dual, config),
        Some(f) => {
            let op = precondition(a, f)?;
            let sol = bicg(
                &op,
                &op.transform_rhs(b),
                &op.transform_dual_rhs(b_dual),
                &op.transform_initial(x_init),
                &op.transform_dual_initial(x_init_dual),
                config,
            )?;
            Ok(DualSolution {
                x: op.recover_solution(&sol.x),
                x_dual: op.recover_dual_solution(&sol.x_dual),
                history: sol.history,
            })
        }
    }
}

/// RBiCG on `A x = b` and `A* x̃ = b̃`; see [`rbicg`].
#[allow(clippy::too_many_arguments)]
pub fn rbicg_solve<T: Scalar>(
    a: &SparseMatrix<T>,
    b: &[T],
    b_dual: &[T],
    x_init: &[T],
    x_init_dual: &[T],
    recycle: Option<&RecycleSpace<T>>,
    precond: Option<&IlutpFactors<T>>,
    config: &SolverConfig,
) -> Result<RbicgSolution<T>, SolverError> {
    for v in [b, b_dual, x_init, x_init_dual] {
        check_len(a.nrows(), v)?;
    }
    match precond {
        None => rbicg(a, b, b_dual, x_init, x_init_dual, recycle, config),
        Some(f) => {
            let op = precondition(a, f)?;
            let sol = rbicg(
                &op,
                &op.transform_rhs(b),
                &op.transform_dual_rhs(b_dual),
                &op.transform_initial(x_init),
                &op.transform_dual_initial(x_init_dual),
                recycle,
                config,
            )?;
            Ok(RbicgSolution {
                x: op.recover_solution(&sol.x),
                x_dual: op.recover_dual_solution(&sol.x_dual),
                ..sol
            })
        }
    }
}
