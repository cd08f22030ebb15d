//! C interface to the `rbicgstab` solvers (real double precision).
//!
//! Matrices, ILUTP factors, recycle spaces and convergence histories are
//! opaque handles. Each is created by one of the functions below and must be
//! released with its `*_free` function; passing NULL to a `*_free` function
//! is a no-op.
//!
//! Fallible functions return an [`RbStatus`]. Negative values are errors,
//! and `rb_last_error` then describes the most recent error on the calling
//! thread. Solvers return `RB_STATUS_NOT_CONVERGED` when they stopped without
//! meeting the tolerance; the solution arrays are still written.
//!
//! Pointers to arrays must reference at least as many elements as the
//! function documents (usually the matrix dimension `n`). Strings are
//! NUL-terminated UTF-8 paths.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rbicgstab::error::DimensionMismatch;
use rbicgstab::history::{BreakdownKind, ConvergenceHistory, RunReport, Status};
use rbicgstab::io::{history_write, mm_read, mm_write, recycle_load, recycle_save, IoError};
use rbicgstab::precond::{ilutp_factor, FactorError, IlutpFactors, PreconditionedOperator};
use rbicgstab::recycle::{refresh_images, RecycleError, RecycleSpace};
use rbicgstab::solvers::{
    bicg_solve, bicgstab_solve, rbicg_solve, rbicgstab_solve, SolverConfig, SolverError,
};
use rbicgstab::sparse::{SparseError, SparseMatrix};

/// Result code of every fallible call.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbStatus {
    Ok = 0,
    /// The solver stopped without meeting the tolerance; see the history.
    NotConverged = 1,
    NullPointer = -1,
    InvalidArgument = -2,
    DimensionMismatch = -3,
    Io = -4,
    Parse = -5,
    Factorization = -6,
    Solver = -7,
    Recycle = -8,
    Panic = -99,
}

/// Terminal state of a solve, as stored in a history.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbSolveStatus {
    Converged = 0,
    MaxIterations = 1,
    SeriousBreakdown = 2,
    SecondKindBreakdown = 3,
    OmegaBreakdown = 4,
    Stagnated = 5,
}

/// Solver settings; start from `rb_solver_config_default()`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbSolverConfig {
    /// Relative residual tolerance.
    pub tol: f64,
    pub max_itn: usize,
    /// Recycle-space dimension built by `rb_rbicg`.
    pub k: usize,
    /// Cycle length between recycle-space updates.
    pub s: usize,
    /// Seed of the BiCGSTAB shadow residual.
    pub seed: u64,
    pub breakdown_tol: f64,
}

impl From<RbSolverConfig> for SolverConfig {
    fn from(c: RbSolverConfig) -> Self {
        SolverConfig {
            tol: c.tol,
            max_itn: c.max_itn,
            k: c.k,
            s: c.s,
            seed: c.seed,
            breakdown_tol: c.breakdown_tol,
            keep_cycles: false,
        }
    }
}

pub struct RbMatrix(SparseMatrix<f64>);
pub struct RbFactors(IlutpFactors<f64>);
pub struct RbRecycleSpace(RecycleSpace<f64>);
pub struct RbHistory(ConvergenceHistory);

struct Failure {
    status: RbStatus,
    message: String,
}

impl Failure {
    fn new(status: RbStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<DimensionMismatch> for Failure {
    fn from(e: DimensionMismatch) -> Self {
        Self::new(RbStatus::DimensionMismatch, e.to_string())
    }
}

impl From<SparseError> for Failure {
    fn from(e: SparseError) -> Self {
        let status = match e {
            SparseError::Dimension(_) => RbStatus::DimensionMismatch,
            _ => RbStatus::InvalidArgument,
        };
        Self::new(status, e.to_string())
    }
}

impl From<FactorError> for Failure {
    fn from(e: FactorError) -> Self {
        let status = match e {
            FactorError::Dimension(_) => RbStatus::DimensionMismatch,
            FactorError::InvalidParameter(_) => RbStatus::InvalidArgument,
            _ => RbStatus::Factorization,
        };
        Self::new(status, e.to_string())
    }
}

impl From<RecycleError> for Failure {
    fn from(e: RecycleError) -> Self {
        let status = match e {
            RecycleError::Dimension(_) => RbStatus::DimensionMismatch,
            _ => RbStatus::Recycle,
        };
        Self::new(status, e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let status = match e {
            SolverError::Dimension(_) => RbStatus::DimensionMismatch,
            SolverError::InvalidConfig(_) => RbStatus::InvalidArgument,
            SolverError::Recycle(_) => RbStatus::Recycle,
            SolverError::ShadowOrthogonal => RbStatus::Solver,
        };
        Self::new(status, e.to_string())
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let status = match e {
            IoError::Io(_) | IoError::Csv(_) => RbStatus::Io,
            IoError::DimensionMismatch { .. } => RbStatus::DimensionMismatch,
            IoError::EmptyRecycleSpace => RbStatus::InvalidArgument,
            IoError::Recycle(_) => RbStatus::Recycle,
            _ => RbStatus::Parse,
        };
        Self::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<RbStatus, Failure>) -> RbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal error: {msg}"));
            RbStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(RbStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(RbStatus::InvalidArgument, "path is not valid UTF-8"))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn store_history(out: *mut *mut RbHistory, h: &ConvergenceHistory) {
    if !out.is_null() {
        *out = Box::into_raw(Box::new(RbHistory(h.clone())));
    }
}

unsafe fn config_or_default(c: *const RbSolverConfig) -> SolverConfig {
    c.as_ref()
        .map_or_else(SolverConfig::default, |c| (*c).into())
}

unsafe fn factors_opt<'a>(f: *const RbFactors) -> Option<&'a IlutpFactors<f64>> {
    f.as_ref().map(|f| &f.0)
}

fn solved(h: &ConvergenceHistory) -> RbStatus {
    if h.converged() {
        RbStatus::Ok
    } else {
        RbStatus::NotConverged
    }
}

/// Description of the last error on this thread, or NULL. The string stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn rb_solver_config_default() -> RbSolverConfig {
    let d = SolverConfig::default();
    RbSolverConfig {
        tol: d.tol,
        max_itn: d.max_itn,
        k: d.k,
        s: d.s,
        seed: d.seed,
        breakdown_tol: d.breakdown_tol,
    }
}

/// Copies zero-based CSR arrays (`row_ptr` has `nrows + 1` entries,
/// `col_idx` and `values` have `row_ptr[nrows]`).
#[no_mangle]
pub unsafe extern "C" fn rb_matrix_from_csr(
    nrows: usize,
    ncols: usize,
    row_ptr: *const usize,
    col_idx: *const usize,
    values: *const f64,
    out: *mut *mut RbMatrix,
) -> RbStatus {
    guard(|| {
        let rp = slice(row_ptr, nrows + 1, "row_ptr")?;
        let nnz = rp[nrows];
        let m = SparseMatrix::from_csr(
            nrows,
            ncols,
            rp.to_vec(),
            slice(col_idx, nnz, "col_idx")?.to_vec(),
            slice(values, nnz, "values")?.to_vec(),
        )?;
        store(out, RbMatrix(m))?;
        Ok(RbStatus::Ok)
    })
}

/// Builds a matrix from `nnz` zero-based triplets; duplicates are summed.
#[no_mangle]
pub unsafe extern "C" fn rb_matrix_from_triplets(
    nrows: usize,
    ncols: usize,
    nnz: usize,
    rows: *const usize,
    cols: *const usize,
    values: *const f64,
    out: *mut *mut RbMatrix,
) -> RbStatus {
    guard(|| {
        let (r, c, v) = (
            slice(rows, nnz, "rows")?,
            slice(cols, nnz, "cols")?,
            slice(values, nnz, "values")?,
        );
        let trip: Vec<(usize, usize, f64)> = (0..nnz).map(|i| (r[i], c[i], v[i])).collect();
        store(
            out,
            RbMatrix(SparseMatrix::from_triplets(nrows, ncols, &trip)?),
        )?;
        Ok(RbStatus::Ok)
    })
}

/// Reads a Matrix Market file.
#[no_mangle]
pub unsafe extern "C" fn rb_matrix_read(path_: *const c_char, out: *mut *mut RbMatrix) -> RbStatus {
    guard(|| {
        store(out, RbMatrix(mm_read(path(path_)?)?))?;
        Ok(RbStatus::Ok)
    })
}

/// Writes a Matrix Market coordinate file.
#[no_mangle]
pub unsafe extern "C" fn rb_matrix_write(m: *const RbMatrix, path_: *const c_char) -> RbStatus {
    guard(|| {
        mm_write(path(path_)?, &handle(m, "matrix")?.0)?;
        Ok(RbStatus::Ok)
    })
}

/// Number of rows; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn rb_matrix_nrows(m: *const RbMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.nrows())
}

/// Number of columns; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn rb_matrix_ncols(m: *const RbMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.ncols())
}

/// Stored entries; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn rb_matrix_nnz(m: *const RbMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.nnz())
}

/// `y = A x` with `x` of length `ncols` and `y` of length `nrows`.
#[no_mangle]
pub unsafe extern "C" fn rb_matrix_matvec(
    m: *const RbMatrix,
    x: *const f64,
    y: *mut f64,
) -> RbStatus {
    guard(|| {
        let a = &handle(m, "matrix")?.0;
        let ax = a.matvec(slice(x, a.ncols(), "x")?)?;
        slice_mut(y, a.nrows(), "y")?.copy_from_slice(&ax);
        Ok(RbStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rb_matrix_free(m: *mut RbMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// ILUTP factorization `A P ≈ L U` used for split preconditioning.
#[no_mangle]
pub unsafe extern "C" fn rb_ilutp(
    m: *const RbMatrix,
    drop_tol: f64,
    pivot_tol: f64,
    out: *mut *mut RbFactors,
) -> RbStatus {
    guard(|| {
        let f = ilutp_factor(&handle(m, "matrix")?.0, drop_tol, pivot_tol)?;
        store(out, RbFactors(f))?;
        Ok(RbStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rb_factors_free(f: *mut RbFactors) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// BiCGSTAB. `x` holds the initial guess on entry and the solution on
/// return. `factors` and `config` may be NULL (no preconditioning, default
/// settings); `history` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn rb_bicgstab(
    m: *const RbMatrix,
    factors: *const RbFactors,
    b: *const f64,
    x: *mut f64,
    config: *const RbSolverConfig,
    history: *mut *mut RbHistory,
) -> RbStatus {
    guard(|| {
        let a = &handle(m, "matrix")?.0;
        let n = a.nrows();
        let x = slice_mut(x, n, "x")?;
        let sol = bicgstab_solve(
            a,
            slice(b, n, "b")?,
            x,
            factors_opt(factors),
            &config_or_default(config),
        )?;
        x.copy_from_slice(&sol.x);
        store_history(history, &sol.history);
        Ok(solved(&sol.history))
    })
}

/// RBiCGSTAB with a recycle space built for the same (preconditioned)
/// operator, e.g. by `rb_rbicg` or `rb_recycle_refresh`.
#[no_mangle]
pub unsafe extern "C" fn rb_rbicgstab(
    m: *const RbMatrix,
    factors: *const RbFactors,
    space: *const RbRecycleSpace,
    b: *const f64,
    x: *mut f64,
    config: *const RbSolverConfig,
    history: *mut *mut RbHistory,
) -> RbStatus {
    guard(|| {
        let a = &handle(m, "matrix")?.0;
        let n = a.nrows();
        let space = &handle(space, "recycle space")?.0;
        let x = slice_mut(x, n, "x")?;
        let sol = rbicgstab_solve(
            a,
            slice(b, n, "b")?,
            x,
            space,
            factors_opt(factors),
            &config_or_default(config),
        )?;
        x.copy_from_slice(&sol.x);
        store_history(history, &sol.history);
        Ok(solved(&sol.history))
    })
}

/// BiCG on `A x = b` and `Aᵀ x̃ = b̃`; `x` and `x_dual` are overwritten
/// with the solutions.
#[no_mangle]
pub unsafe extern "C" fn rb_bicg(
    m: *const RbMatrix,
    factors: *const RbFactors,
    b: *const f64,
    b_dual: *const f64,
    x: *mut f64,
    x_dual: *mut f64,
    config: *const RbSolverConfig,
    history: *mut *mut RbHistory,
) -> RbStatus {
    guard(|| {
        let a = &handle(m, "matrix")?.0;
        let n = a.nrows();
        let x = slice_mut(x, n, "x")?;
        let xt = slice_mut(x_dual, n, "x_dual")?;
        let sol = bicg_solve(
            a,
            slice(b, n, "b")?,
            slice(b_dual, n, "b_dual")?,
            x,
            xt,
            factors_opt(factors),
            &config_or_default(config),
        )?;
        x.copy_from_slice(&sol.x);
        xt.copy_from_slice(&sol.x_dual);
        store_history(history, &sol.history);
        Ok(solved(&sol.history))
    })
}

/// RBiCG. `space_in` may be NULL. When `space_out` is not NULL it receives
/// the space of dimension at most `config.k` built during the solve (NULL
/// when that space is empty).
#[no_mangle]
pub unsafe extern "C" fn rb_rbicg(
    m: *const RbMatrix,
    factors: *const RbFactors,
    space_in: *const RbRecycleSpace,
    b: *const f64,
    b_dual: *const f64,
    x: *mut f64,
    x_dual: *mut f64,
    config: *const RbSolverConfig,
    space_out: *mut *mut RbRecycleSpace,
    history: *mut *mut RbHistory,
) -> RbStatus {
    guard(|| {
        let a = &handle(m, "matrix")?.0;
        let n = a.nrows();
        let x = slice_mut(x, n, "x")?;
        let xt = slice_mut(x_dual, n, "x_dual")?;
        let sol = rbicg_solve(
            a,
            slice(b, n, "b")?,
            slice(b_dual, n, "b_dual")?,
            x,
            xt,
            space_in.as_ref().map(|s| &s.0),
            factors_opt(factors),
            &config_or_default(config),
        )?;
        x.copy_from_slice(&sol.x);
        xt.copy_from_slice(&sol.x_dual);
        if !space_out.is_null() {
            *space_out = if sol.recycle.is_empty() {
                ptr::null_mut()
            } else {
                Box::into_raw(Box::new(RbRecycleSpace(sol.recycle)))
            };
        }
        store_history(history, &sol.history);
        Ok(solved(&sol.history))
    })
}

fn with_operator<R>(
    a: &SparseMatrix<f64>,
    factors: Option<&IlutpFactors<f64>>,
    f: impl FnOnce(&dyn rbicgstab::LinearOperator<f64>) -> Result<R, Failure>,
) -> Result<R, Failure> {
    match factors {
        Some(fac) => f(&PreconditionedOperator::split(a, fac)?),
        None => f(a),
    }
}

/// Loads a recycle space and recomputes its images for `A` (split
/// preconditioned by `factors` when not NULL).
#[no_mangle]
pub unsafe extern "C" fn rb_recycle_load(
    path_: *const c_char,
    m: *const RbMatrix,
    factors: *const RbFactors,
    out: *mut *mut RbRecycleSpace,
) -> RbStatus {
    guard(|| {
        let p = path(path_)?;
        let a = &handle(m, "matrix")?.0;
        let space = with_operator(a, factors_opt(factors), |op| Ok(recycle_load(p, op)?))?;
        store(out, RbRecycleSpace(space))?;
        Ok(RbStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rb_recycle_save(
    space: *const RbRecycleSpace,
    path_: *const c_char,
) -> RbStatus {
    guard(|| {
        recycle_save(path(path_)?, &handle(space, "recycle space")?.0)?;
        Ok(RbStatus::Ok)
    })
}

/// The same bases with images recomputed for a new matrix.
#[no_mangle]
pub unsafe extern "C" fn rb_recycle_refresh(
    space: *const RbRecycleSpace,
    m: *const RbMatrix,
    factors: *const RbFactors,
    out: *mut *mut RbRecycleSpace,
) -> RbStatus {
    guard(|| {
        let s = &handle(space, "recycle space")?.0;
        let a = &handle(m, "matrix")?.0;
        let fresh = with_operator(a, factors_opt(factors), |op| Ok(refresh_images(s, op)?))?;
        store(out, RbRecycleSpace(fresh))?;
        Ok(RbStatus::Ok)
    })
}

/// Number of recycle vectors; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn rb_recycle_dim(space: *const RbRecycleSpace) -> usize {
    space.as_ref().map_or(0, |s| s.0.k())
}

#[no_mangle]
pub unsafe extern "C" fn rb_recycle_free(space: *mut RbRecycleSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// Iterations recorded, excluding the initial residual; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn rb_history_iterations(h: *const RbHistory) -> usize {
    h.as_ref().map_or(0, |h| h.0.iterations())
}

/// Operator applications including the final residual check; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn rb_history_matvecs(h: *const RbHistory) -> usize {
    h.as_ref().map_or(0, |h| h.0.matvecs)
}

/// Relative true residual of the returned solution; NaN for NULL.
#[no_mangle]
pub unsafe extern "C" fn rb_history_true_residual(h: *const RbHistory) -> f64 {
    h.as_ref().map_or(f64::NAN, |h| h.0.true_residual)
}

#[no_mangle]
pub unsafe extern "C" fn rb_history_status(
    h: *const RbHistory,
    out: *mut RbSolveStatus,
) -> RbStatus {
    guard(|| {
        let s = match handle(h, "history")?.0.status {
            Status::Converged => RbSolveStatus::Converged,
            Status::MaxIterations => RbSolveStatus::MaxIterations,
            Status::Breakdown(BreakdownKind::Serious) => RbSolveStatus::SeriousBreakdown,
            Status::Breakdown(BreakdownKind::SecondKind) => RbSolveStatus::SecondKindBreakdown,
            Status::Breakdown(BreakdownKind::Omega) => RbSolveStatus::OmegaBreakdown,
            Status::Stagnated => RbSolveStatus::Stagnated,
        };
        *out.as_mut().ok_or_else(|| null("output pointer"))? = s;
        Ok(RbStatus::Ok)
    })
}

/// Copies up to `len` relative residuals (one per record, starting with
/// the initial residual) into `out` and returns the number of records.
/// Pass `len = 0` to query the count.
#[no_mangle]
pub unsafe extern "C" fn rb_history_residuals(
    h: *const RbHistory,
    out: *mut f64,
    len: usize,
) -> usize {
    let Some(h) = h.as_ref() else { return 0 };
    let records = &h.0.records;
    if !out.is_null() {
        for (i, r) in records.iter().take(len).enumerate() {
            *out.add(i) = r.residual;
        }
    }
    records.len()
}

/// Writes the history as CSV, labelled with `solver` (may be NULL).
#[no_mangle]
pub unsafe extern "C" fn rb_history_write(
    h: *const RbHistory,
    solver: *const c_char,
    path_: *const c_char,
) -> RbStatus {
    guard(|| {
        let h = &handle(h, "history")?.0;
        let name = if solver.is_null() {
            "solver".to_string()
        } else {
            CStr::from_ptr(solver).to_string_lossy().into_owned()
        };
        let mut report = RunReport::new(name.clone());
        report.push(1, name, h.clone());
        history_write(path(path_)?, &report)?;
        Ok(RbStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn rb_history_free(h: *mut RbHistory) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
