//! Recycling BiCG and BiCGSTAB for sequences of non-Hermitian linear systems.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod history;
pub mod io;
pub mod operator;
pub mod precond;
pub mod problems;
pub mod recycle;
pub mod scalar;
pub mod solvers;
pub mod sparse;
pub mod vector;

pub use error::DimensionMismatch;
pub use history::{BreakdownKind, ConvergenceHistory, IterationRecord, Status};
pub use operator::{CountingOperator, LinearOperator};
pub use precond::{
    ilutp_factor, FactorError, IlutpFactors, IlutpOptions, PreconditionSide, PreconditionedOperator,
};
pub use recycle::{
    biorthonormalize, refresh_images, update_recycle_space, CapturedCycle, RecycleError,
    RecycleSpace,
};
pub use scalar::Scalar;
pub use solvers::{
    bicg_solve, bicgstab_solve, rbicg_solve, rbicgstab_solve, DualSolution, RbicgSolution,
    Solution, SolverConfig, SolverError,
};
pub use sparse::{SparseError, SparseMatrix};
