//! Drivers for the model-problem studies and the sequence workflow, shared
//! by the CLI and the acceptance tests.

use thiserror::Error;

use crate::history::{ConvergenceHistory, RunReport};
use crate::operator::LinearOperator;
use crate::precond::{
    ilutp_factor, ExactInverse, FactorError, IlutpFactors, PreconditionedOperator,
};
use crate::problems::{
    example1_operator, example2_with, Example2Config, ParametricSequence, ProblemError,
};
use crate::recycle::{
    biorthonormalize, principal_angle_cosines, refresh_images, smallest_eigenpairs,
    smallest_left_eigenpairs, EigenOptions, RecycleError, RecycleSpace,
};
use crate::solvers::{bicgstab, rbicg, rbicgstab, SolverConfig, SolverError};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Recycle(#[from] RecycleError),
    #[error(transparent)]
    Factor(#[from] FactorError),
}

impl From<crate::error::DimensionMismatch> for ExperimentError {
    fn from(e: crate::error::DimensionMismatch) -> Self {
        Self::Solver(e.into())
    }
}

/// Histories of the three-way comparison: no recycling, a right-only space
/// (`Ũ = U`), and left and right spaces.
#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub baseline: ConvergenceHistory,
    pub right_only: ConvergenceHistory,
    pub left_right: ConvergenceHistory,
}

impl StudyOutcome {
    pub fn report(&self) -> RunReport {
        let mut r = RunReport::new("study");
        r.push(1, "bicgstab", self.baseline.clone());
        r.push(1, "rbicgstab-right", self.right_only.clone());
        r.push(1, "rbicgstab-left-right", self.left_right.clone());
        r
    }
}

/// Applies `M⁻¹ = U Pᵀ A⁻¹ L` for the split-preconditioned `M = L⁻¹ A P U⁻¹`.
pub struct PreconditionedInverse<'a> {
    factors: &'a IlutpFactors<f64>,
    inverse: ExactInverse<f64>,
}

impl<'a> PreconditionedInverse<'a> {
    pub fn new(a: &SparseMatrix<f64>, factors: &'a IlutpFactors<f64>) -> Result<Self, FactorError> {
        Ok(Self {
            factors,
            inverse: ExactInverse::new(a)?,
        })
    }
}

impl LinearOperator<f64> for PreconditionedInverse<'_> {
    fn dim(&self) -> usize {
        self.factors.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let lx = self.factors.multiply_lower(x);
        let mut z = vec![0.0; x.len()];
        self.inverse.apply(&lx, &mut z);
        y.copy_from_slice(
            &self
                .factors
                .multiply_upper(&self.factors.permute_transpose(&z)),
        );
    }

    fn apply_adjoint(&self, x: &[f64], y: &mut [f64]) {
        let mut ux = vec![0.0; x.len()];
        self.factors.u().apply_adjoint(x, &mut ux);
        let pux = self.factors.permute(&ux);
        let mut z = vec![0.0; x.len()];
        self.inverse.apply_adjoint(&pux, &mut z);
        self.factors.l().apply_adjoint(&z, y);
    }
}

fn eigen_options(seed: u64) -> EigenOptions {
    EigenOptions {
        seed,
        tol: 1e-8,
        ..Default::default()
    }
}

/// Bases over the reals of the `dim`-dimensional right and left invariant
/// subspaces of smallest `|λ|`.
pub fn invariant_subspaces<O, I>(
    op: &O,
    inverse: &I,
    dim: usize,
    seed: u64,
) -> Result<(nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>), RecycleError>
where
    O: LinearOperator<f64> + ?Sized,
    I: LinearOperator<f64> + ?Sized,
{
    let right = smallest_eigenpairs(op, inverse, dim, &eigen_options(seed))?;
    let left = smallest_left_eigenpairs(op, inverse, dim, &eigen_options(seed))?;
    Ok((right.basis::<f64>(), left.basis::<f64>()))
}

/// Cosines of the principal angles between the left and right invariant
/// subspaces of dimension `dim` of the first model problem.
pub fn example1_angles(cells: usize, dim: usize, seed: u64) -> Result<Vec<f64>, ExperimentError> {
    let (a, _) = example1_operator(cells)?;
    let inv = ExactInverse::new(&a)?;
    let (r, l) = invariant_subspaces(&a, &inv, dim, seed)?;
    Ok(principal_angle_cosines(&r, &l)?)
}

/// Same for the split-preconditioned second model problem.
pub fn example2_angles(
    cfg: &Example2Config,
    dim: usize,
    seed: u64,
) -> Result<Vec<f64>, ExperimentError> {
    let p = example2_with(cfg)?;
    let op = PreconditionedOperator::split(&p.matrix, &p.factors)?;
    let inv = PreconditionedInverse::new(&p.matrix, &p.factors)?;
    let (r, l) = invariant_subspaces(&op, &inv, dim, seed)?;
    Ok(principal_angle_cosines(&r, &l)?)
}

/// First model problem, unpreconditioned, from the all-ones initial guess:
/// BiCGSTAB against RBiCGSTAB with `k` exact right eigenvectors (`Ũ = U`)
/// and with `k` right plus `k` left eigenvectors.
pub fn example1_study(
    cells: usize,
    k: usize,
    config: &SolverConfig,
) -> Result<StudyOutcome, ExperimentError> {
    let (a, b) = example1_operator(cells)?;
    let n = a.nrows();
    let inv = ExactInverse::new(&a)?;
    let (right, left) = invariant_subspaces(&a, &inv, k, config.seed)?;
    let x0 = vec![1.0; n];
    let right_space = biorthonormalize(&right, &right, &a)?;
    let both = biorthonormalize(&right, &left, &a)?;
    Ok(StudyOutcome {
        baseline: bicgstab(&a, &b, &x0, config)?.history,
        right_only: rbicgstab(&a, &b, &x0, &right_space, config)?.history,
        left_right: rbicgstab(&a, &b, &x0, &both, config)?.history,
    })
}

/// Approximate left and right invariant subspaces harvested from RBiCG
/// solves of `op y = rhs` with dual right-hand side of ones; each solve
/// starts from the space of the previous one.
pub fn harvest_recycle_space<O: LinearOperator<f64> + ?Sized>(
    op: &O,
    rhs: &[f64],
    x0: &[f64],
    solves: usize,
    config: &SolverConfig,
) -> Result<RecycleSpace<f64>, ExperimentError> {
    let n = op.dim();
    let dual = vec![1.0; n];
    let zeros = vec![0.0; n];
    let mut space = RecycleSpace::empty(n);
    for _ in 0..solves {
        let prev = (!space.is_empty()).then_some(&space);
        let sol = rbicg(op, rhs, &dual, x0, &zeros, prev, config)?;
        space = sol.recycle;
    }
    Ok(space)
}

/// Second model problem, split-preconditioned, from `0.5·ones`: BiCGSTAB
/// against RBiCGSTAB with the right half (`Ũ = U`) and with both halves of
/// a space harvested from two RBiCG solves.
pub fn example2_study(
    problem: &Example2Config,
    config: &SolverConfig,
) -> Result<StudyOutcome, ExperimentError> {
    let p = example2_with(problem)?;
    let n = p.matrix.nrows();
    let op = PreconditionedOperator::split(&p.matrix, &p.factors)?;
    let rhs = op.transform_rhs(&p.rhs);
    let x0 = op.transform_initial(&vec![0.5; n]);
    let both = harvest_recycle_space(&op, &rhs, &x0, 2, config)?;
    let right_space = biorthonormalize(both.u(), both.u(), &op)?;
    Ok(StudyOutcome {
        baseline: bicgstab(&op, &rhs, &x0, config)?.history,
        right_only: rbicgstab(&op, &rhs, &x0, &right_space, config)?.history,
        left_right: rbicgstab(&op, &rhs, &x0, &both, config)?.history,
    })
}

/// Settings of the sequence workflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceOptions {
    pub solver: SolverConfig,
    pub drop_tol: f64,
    pub pivot_tol: f64,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            drop_tol: 1e-4,
            pivot_tol: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SequenceOutcome {
    /// RBiCG at every matrix change, RBiCGSTAB otherwise.
    pub recycling: RunReport,
    pub baseline: RunReport,
    /// Recycle space after the last system.
    pub space: RecycleSpace<f64>,
}

/// Solves every system of `seq` with the recycling policy and with
/// BiCGSTAB, both split-preconditioned by a fresh ILUTP per matrix and
/// started from zero.
///
/// When the matrix changes, the current space is refreshed against the new
/// preconditioned operator and handed to RBiCG (dual right-hand side of
/// ones), which returns the improved space used by the RBiCGSTAB solves
/// that follow.
pub fn run_sequence(
    seq: &ParametricSequence,
    opts: &SequenceOptions,
) -> Result<SequenceOutcome, ExperimentError> {
    run_sequence_with(seq, opts, RecycleSpace::empty(seq.a0.nrows()))
}

/// [`run_sequence`] starting from a given recycle space (e.g. one loaded
/// from disk); it is refreshed against the first matrix before use.
pub fn run_sequence_with(
    seq: &ParametricSequence,
    opts: &SequenceOptions,
    start: RecycleSpace<f64>,
) -> Result<SequenceOutcome, ExperimentError> {
    let cfg = &opts.solver;
    let n = seq.a0.nrows();
    let zeros = vec![0.0; n];
    let ones = vec![1.0; n];
    let mut recycling = RunReport::new("recycling");
    let mut baseline = RunReport::new("bicgstab");
    let mut space = start;
    let mut index = 0;
    for (i, rhs_list) in seq.rhs.iter().enumerate() {
        let a = seq.matrix(i);
        let factors = ilutp_factor(&a, opts.drop_tol, opts.pivot_tol)?;
        let op = PreconditionedOperator::split(&a, &factors)?;
        if !space.is_empty() {
            space = match refresh_images(&space, &op) {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("recycle space refresh failed, starting empty: {e}");
                    RecycleSpace::empty(n)
                }
            };
        }
        let x0 = op.transform_initial(&zeros);
        let dual = op.transform_dual_rhs(&ones);
        let dual_x0 = op.transform_dual_initial(&zeros);
        for (kappa, b) in rhs_list.iter().enumerate() {
            index += 1;
            let rhs = op.transform_rhs(b);
            let base = bicgstab(&op, &rhs, &x0, cfg)?;
            baseline.push(index, "bicgstab", base.history);
            if kappa == 0 {
                let prev = (!space.is_empty()).then_some(&space);
                let sol = rbicg(&op, &rhs, &dual, &x0, &dual_x0, prev, cfg)?;
                recycling.push(index, "rbicg", sol.history);
                space = sol.recycle;
            } else {
                let sol = rbicgstab(&op, &rhs, &x0, &space, cfg)?;
                recycling.push(index, "rbicgstab", sol.history);
            }
        }
    }
    Ok(SequenceOutcome {
        recycling,
        baseline,
        space,
    })
}
