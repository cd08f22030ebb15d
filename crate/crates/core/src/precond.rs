//! ILUTP: incomplete LU with threshold dropping and column pivoting.
//!
//! The factorization is the row-wise IKJ variant. Row `i` of `A` is loaded
//! into a dense work vector, eliminated against the previously computed rows
//! of `U` in pivot order, then split into its `L` and `U` parts. Entries
//! smaller than `drop_tol * ‖a_i‖₂` are dropped (the diagonal never is).
//! Before the row is stored, the largest candidate in the `U` part replaces
//! the diagonal whenever `pivot_tol * |candidate| > |diagonal|`; the swap is
//! recorded as a column permutation so that `L U ≈ A P`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::error::DimensionMismatch;
use crate::operator::LinearOperator;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactorError {
    #[error("ILUTP needs a square matrix, got {nrows}x{ncols}")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("zero pivot in row {row} even after pivoting")]
    ZeroPivot { row: usize },
    #[error("invalid ILUTP parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlutpOptions {
    /// Relative drop threshold; zero keeps every fill entry (exact LU).
    pub drop_tol: f64,
    /// Pivoting threshold in `[0, 1]`; zero disables pivoting, one is partial pivoting.
    pub pivot_tol: f64,
    /// Optional cap on the number of off-diagonal entries kept per row in each factor.
    pub max_fill: Option<usize>,
}

impl Default for IlutpOptions {
    fn default() -> Self {
        Self {
            drop_tol: 1e-4,
            pivot_tol: 0.1,
            max_fill: None,
        }
    }
}

/// `L U ≈ A P` with `L` unit lower triangular and `U` upper triangular.
#[derive(Debug, Clone)]
pub struct IlutpFactors<T: Scalar> {
    l: SparseMatrix<T>,
    u: SparseMatrix<T>,
    /// `perm[k]` is the original column placed at position `k`.
    perm: Vec<usize>,
    options: IlutpOptions,
}

pub fn ilutp_factor<T: Scalar>(
    a: &SparseMatrix<T>,
    drop_tol: f64,
    pivot_tol: f64,
) -> Result<IlutpFactors<T>, FactorError> {
    ilutp_factor_with(
        a,
        &IlutpOptions {
            drop_tol,
            pivot_tol,
            max_fill: None,
        },
    )
}

fn keep_largest<T: Scalar>(entries: &mut Vec<(usize, T)>, cap: Option<usize>) {
    if let Some(p) = cap {
        if entries.len() > p {
            entries.sort_by(|a, b| b.1.modulus().total_cmp(&a.1.modulus()));
            entries.truncate(p);
        }
    }
}

pub fn ilutp_factor_with<T: Scalar>(
    a: &SparseMatrix<T>,
    options: &IlutpOptions,
) -> Result<IlutpFactors<T>, FactorError> {
    if !a.is_square() {
        return Err(FactorError::NotSquare {
            nrows: a.nrows(),
            ncols: a.ncols(),
        });
    }
    if !(options.drop_tol >= 0.0) {
        return Err(FactorError::InvalidParameter(format!(
            "drop_tol must be nonnegative, got {}",
            options.drop_tol
        )));
    }
    if !(0.0..=1.0).contains(&options.pivot_tol) {
        return Err(FactorError::InvalidParameter(format!(
            "pivot_tol must lie in [0, 1], got {}",
            options.pivot_tol
        )));
    }

    let n = a.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut inv_perm: Vec<usize> = (0..n).collect();

    // U rows keep original column ids until the permutation is final.
    let mut u_diag: Vec<T> = Vec::with_capacity(n);
    let mut u_rows: Vec<Vec<(usize, T)>> = Vec::with_capacity(n);
    let mut l_triplets: Vec<(usize, usize, T)> = Vec::new();

    let mut work = vec![T::zero(); n];
    let mut present = vec![false; n];
    let mut queued = vec![false; n];
    let mut pattern: Vec<usize> = Vec::new();
    let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();

    for i in 0..n {
        let (cols, vals) = a.row(i);
        let row_norm = crate::vector::norm2(vals);
        let tau = options.drop_tol * row_norm;

        for (&c, &v) in cols.iter().zip(vals) {
            work[c] = v;
            present[c] = true;
            pattern.push(c);
            if inv_perm[c] < i {
                queued[c] = true;
                heap.push(Reverse(inv_perm[c]));
            }
        }

        let mut l_row: Vec<(usize, T)> = Vec::new();
        while let Some(Reverse(k)) = heap.pop() {
            let c = perm[k];
            // Tested before scaling by the pivot, like the U entries.
            let entry = work[c];
            work[c] = T::zero();
            if entry.modulus() <= tau && options.drop_tol > 0.0 || entry == T::zero() {
                continue;
            }
            let mult = entry / u_diag[k];
            l_row.push((k, mult));
            for &(c2, u) in &u_rows[k] {
                if !present[c2] {
                    present[c2] = true;
                    pattern.push(c2);
                    work[c2] = T::zero();
                }
                if inv_perm[c2] < i && !queued[c2] {
                    queued[c2] = true;
                    heap.push(Reverse(inv_perm[c2]));
                }
                work[c2] -= mult * u;
            }
        }

        // Pivot selection over the U part.
        let mut diag_col = perm[i];
        let mut best = diag_col;
        let mut best_mag = if present[diag_col] {
            work[diag_col].modulus()
        } else {
            0.0
        };
        for &c in &pattern {
            if inv_perm[c] > i {
                let m = work[c].modulus();
                if m > best_mag {
                    best_mag = m;
                    best = c;
                }
            }
        }
        let diag_mag = if present[diag_col] {
            work[diag_col].modulus()
        } else {
            0.0
        };
        if best != diag_col && options.pivot_tol * best_mag > diag_mag {
            let j = inv_perm[best];
            perm.swap(i, j);
            inv_perm[perm[i]] = i;
            inv_perm[perm[j]] = j;
            diag_col = best;
        }
        let diag = if present[diag_col] {
            work[diag_col]
        } else {
            T::zero()
        };
        if diag == T::zero() || !diag.modulus().is_finite() {
            return Err(FactorError::ZeroPivot { row: i });
        }

        let mut u_row: Vec<(usize, T)> = pattern
            .iter()
            .copied()
            .filter(|&c| inv_perm[c] > i)
            .map(|c| (c, work[c]))
            .filter(|&(_, v)| v != T::zero() && !(options.drop_tol > 0.0 && v.modulus() <= tau))
            .collect();
        keep_largest(&mut u_row, options.max_fill);
        keep_largest(&mut l_row, options.max_fill);

        for (k, v) in l_row {
            l_triplets.push((i, k, v));
        }
        l_triplets.push((i, i, T::one()));
        u_diag.push(diag);
        u_rows.push(u_row);

        for &c in &pattern {
            work[c] = T::zero();
            present[c] = false;
            queued[c] = false;
        }
        pattern.clear();
    }

    let mut u_triplets = Vec::new();
    for (i, row) in u_rows.iter().enumerate() {
        u_triplets.push((i, i, u_diag[i]));
        u_triplets.extend(row.iter().map(|&(c, v)| (i, inv_perm[c], v)));
    }
    let l = SparseMatrix::from_triplets(n, n, &l_triplets).expect("L indices in range");
    let u = SparseMatrix::from_triplets(n, n, &u_triplets).expect("U indices in range");
    Ok(IlutpFactors {
        l,
        u,
        perm,
        options: *options,
    })
}

impl<T: Scalar> IlutpFactors<T> {
    /// Assembles factors from explicit parts, checking the triangular structure.
    pub fn from_parts(
        l: SparseMatrix<T>,
        u: SparseMatrix<T>,
        perm: Vec<usize>,
    ) -> Result<Self, FactorError> {
        let n = l.nrows();
        for m in [&l, &u] {
            if !m.is_square() || m.nrows() != n {
                return Err(FactorError::InvalidParameter(
                    "L and U must be n x n".into(),
                ));
            }
        }
        if perm.len() != n {
            return Err(DimensionMismatch {
                expected: n,
                found: perm.len(),
            }
            .into());
        }
        let mut inv_perm = vec![usize::MAX; n];
        for (k, &c) in perm.iter().enumerate() {
            if c >= n || inv_perm[c] != usize::MAX {
                return Err(FactorError::InvalidParameter(
                    "perm is not a permutation".into(),
                ));
            }
            inv_perm[c] = k;
        }
        for i in 0..n {
            let (cols, _) = l.row(i);
            if cols.iter().any(|&c| c > i) || l.get(i, i) != T::one() {
                return Err(FactorError::InvalidParameter(format!(
                    "L row {i} is not unit lower triangular"
                )));
            }
            let (cols, _) = u.row(i);
            if cols.iter().any(|&c| c < i) {
                return Err(FactorError::InvalidParameter(format!(
                    "U row {i} is not upper triangular"
                )));
            }
            if u.get(i, i) == T::zero() {
                return Err(FactorError::ZeroPivot { row: i });
            }
        }
        Ok(Self {
            l,
            u,
            perm,
            options: IlutpOptions {
                drop_tol: 0.0,
                pivot_tol: 0.0,
                max_fill: None,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn l(&self) -> &SparseMatrix<T> {
        &self.l
    }

    pub fn u(&self) -> &SparseMatrix<T> {
        &self.u
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn options(&self) -> &IlutpOptions {
        &self.options
    }

    pub fn drop_tol(&self) -> f64 {
        self.options.drop_tol
    }

    pub fn pivot_tol(&self) -> f64 {
        self.options.pivot_tol
    }

    fn check_len(&self, x: &[T]) -> Result<(), DimensionMismatch> {
        if x.len() == self.dim() {
            Ok(())
        } else {
            Err(DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            })
        }
    }

    /// `L⁻¹ x`
    pub fn apply_left(&self, x: &[T]) -> Result<Vec<T>, DimensionMismatch> {
        self.check_len(x)?;
        let mut y = x.to_vec();
        self.solve_lower_in_place(&mut y);
        Ok(y)
    }

    /// `P U⁻¹ x`
    pub fn apply_right(&self, x: &[T]) -> Result<Vec<T>, DimensionMismatch> {
        self.check_len(x)?;
        let mut y = x.to_vec();
        self.solve_upper_in_place(&mut y);
        Ok(self.permute(&y))
    }

    /// `L⁻* x`
    pub fn apply_left_adjoint(&self, x: &[T]) -> Result<Vec<T>, DimensionMismatch> {
        self.check_len(x)?;
        let mut y = x.to_vec();
        self.solve_lower_adjoint_in_place(&mut y);
        Ok(y)
    }

    /// `U⁻* Pᵀ x`
    pub fn apply_right_adjoint(&self, x: &[T]) -> Result<Vec<T>, DimensionMismatch> {
        self.check_len(x)?;
        let mut y = self.permute_transpose(x);
        self.solve_upper_adjoint_in_place(&mut y);
        Ok(y)
    }

    /// `P z`: entry `k` of `z` moves to original column `perm[k]`.
    pub(crate) fn permute(&self, z: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); z.len()];
        for (k, &c) in self.perm.iter().enumerate() {
            out[c] = z[k];
        }
        out
    }

    /// `Pᵀ x`
    pub(crate) fn permute_transpose(&self, x: &[T]) -> Vec<T> {
        self.perm.iter().map(|&c| x[c]).collect()
    }

    pub(crate) fn solve_lower_in_place(&self, y: &mut [T]) {
        for i in 0..y.len() {
            let (cols, vals) = self.l.row(i);
            let mut acc = y[i];
            for (&k, &v) in cols.iter().zip(vals) {
                if k < i {
                    acc -= v * y[k];
                }
            }
            y[i] = acc;
        }
    }

    pub(crate) fn solve_upper_in_place(&self, y: &mut [T]) {
        for i in (0..y.len()).rev() {
            let (cols, vals) = self.u.row(i);
            let mut acc = y[i];
            let mut diag = T::one();
            for (&k, &v) in cols.iter().zip(vals) {
                if k > i {
                    acc -= v * y[k];
                } else {
                    diag = v;
                }
            }
            y[i] = acc / diag;
        }
    }

    pub(crate) fn solve_lower_adjoint_in_place(&self, y: &mut [T]) {
        for i in (0..y.len()).rev() {
            let yi = y[i];
            let (cols, vals) = self.l.row(i);
            for (&k, &v) in cols.iter().zip(vals) {
                if k < i {
                    y[k] -= v.conjugate() * yi;
                }
            }
        }
    }

    pub(crate) fn solve_upper_adjoint_in_place(&self, y: &mut [T]) {
        for i in 0..y.len() {
            let (cols, vals) = self.u.row(i);
            let diag = self.u.get(i, i);
            let yi = y[i] / diag.conjugate();
            y[i] = yi;
            for (&k, &v) in cols.iter().zip(vals) {
                if k > i {
                    y[k] -= v.conjugate() * yi;
                }
            }
        }
    }

    /// `U x`
    pub(crate) fn multiply_upper(&self, x: &[T]) -> Vec<T> {
        crate::operator::apply(&self.u, x)
    }

    /// `L x`
    pub(crate) fn multiply_lower(&self, x: &[T]) -> Vec<T> {
        crate::operator::apply(&self.l, x)
    }

    /// `A⁻¹ x` for an exact factorization: `P U⁻¹ L⁻¹ x`.
    pub fn solve(&self, x: &[T]) -> Result<Vec<T>, DimensionMismatch> {
        let y = self.apply_left(x)?;
        self.apply_right(&y)
    }

    /// `A⁻* x = L⁻* U⁻* Pᵀ x`.
    pub fn solve_adjoint(&self, x: &[T]) -> Result<Vec<T>, DimensionMismatch> {
        let y = self.apply_right_adjoint(x)?;
        self.apply_left_adjoint(&y)
    }
}

/// Where the factors are applied relative to `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreconditionSide {
    /// `P U⁻¹ L⁻¹ A`
    Left,
    /// `A P U⁻¹ L⁻¹`
    Right,
    /// `L⁻¹ A P U⁻¹`
    #[default]
    Split,
}

/// The preconditioned operator together with the maps between original and
/// preconditioned variables.
#[derive(Debug, Clone, Copy)]
pub struct PreconditionedOperator<'a, T: Scalar> {
    a: &'a SparseMatrix<T>,
    factors: &'a IlutpFactors<T>,
    side: PreconditionSide,
}

/// Split preconditioning is the mode the experiment drivers use.
pub type SplitPreconditionedOperator<'a, T> = PreconditionedOperator<'a, T>;

impl<'a, T: Scalar> PreconditionedOperator<'a, T> {
    pub fn new(
        a: &'a SparseMatrix<T>,
        factors: &'a IlutpFactors<T>,
        side: PreconditionSide,
    ) -> Result<Self, DimensionMismatch> {
        if a.nrows() != factors.dim() || !a.is_square() {
            return Err(DimensionMismatch {
                expected: factors.dim(),
                found: a.nrows(),
            });
        }
        Ok(Self { a, factors, side })
    }

    pub fn split(
        a: &'a SparseMatrix<T>,
        factors: &'a IlutpFactors<T>,
    ) -> Result<Self, DimensionMismatch> {
        Self::new(a, factors, PreconditionSide::Split)
    }

    pub fn matrix(&self) -> &'a SparseMatrix<T> {
        self.a
    }

    pub fn factors(&self) -> &'a IlutpFactors<T> {
        self.factors
    }

    pub fn side(&self) -> PreconditionSide {
        self.side
    }

    fn full_solve(&self, x: &[T]) -> Vec<T> {
        let mut y = x.to_vec();
        self.factors.solve_lower_in_place(&mut y);
        self.factors.solve_upper_in_place(&mut y);
        self.factors.permute(&y)
    }

    /// Right-hand side of the preconditioned system.
    pub fn transform_rhs(&self, b: &[T]) -> Vec<T> {
        match self.side {
            PreconditionSide::Split => {
                let mut y = b.to_vec();
                self.factors.solve_lower_in_place(&mut y);
                y
            }
            PreconditionSide::Left => self.full_solve(b),
            PreconditionSide::Right => b.to_vec(),
        }
    }

    /// Maps an original-variable guess into preconditioned variables.
    pub fn transform_initial(&self, x: &[T]) -> Vec<T> {
        match self.side {
            PreconditionSide::Split => self
                .factors
                .multiply_upper(&self.factors.permute_transpose(x)),
            PreconditionSide::Left => x.to_vec(),
            PreconditionSide::Right => {
                let up = self
                    .factors
                    .multiply_upper(&self.factors.permute_transpose(x));
                self.factors.multiply_lower(&up)
            }
        }
    }

    /// Right-hand side of the preconditioned dual system `M* ỹ = b̃'`.
    pub fn transform_dual_rhs(&self, b: &[T]) -> Vec<T> {
        let f = self.factors;
        match self.side {
            PreconditionSide::Split => {
                let mut y = f.permute_transpose(b);
                f.solve_upper_adjoint_in_place(&mut y);
                y
            }
            PreconditionSide::Left => b.to_vec(),
            PreconditionSide::Right => self.full_solve_adjoint(b),
        }
    }

    /// Maps an original dual guess into preconditioned dual variables.
    pub fn transform_dual_initial(&self, x: &[T]) -> Vec<T> {
        let f = self.factors;
        match self.side {
            PreconditionSide::Split => f.l.matvec_conj_transpose(x).expect("conforming length"),
            PreconditionSide::Left => {
                let lx = f.l.matvec_conj_transpose(x).expect("conforming length");
                f.permute(&f.u.matvec_conj_transpose(&lx).expect("conforming length"))
            }
            PreconditionSide::Right => x.to_vec(),
        }
    }

    /// Maps a preconditioned dual solution back to the original dual unknowns.
    pub fn recover_dual_solution(&self, y: &[T]) -> Vec<T> {
        match self.side {
            PreconditionSide::Split => {
                let mut z = y.to_vec();
                self.factors.solve_lower_adjoint_in_place(&mut z);
                z
            }
            PreconditionSide::Left => self.full_solve_adjoint(y),
            PreconditionSide::Right => y.to_vec(),
        }
    }

    /// `L⁻* U⁻* Pᵀ x`
    fn full_solve_adjoint(&self, x: &[T]) -> Vec<T> {
        let f = self.factors;
        let mut y = f.permute_transpose(x);
        f.solve_upper_adjoint_in_place(&mut y);
        f.solve_lower_adjoint_in_place(&mut y);
        y
    }

    /// Maps a preconditioned-variable solution back to the original unknowns.
    pub fn recover_solution(&self, y: &[T]) -> Vec<T> {
        match self.side {
            PreconditionSide::Split => {
                let mut z = y.to_vec();
                self.factors.solve_upper_in_place(&mut z);
                self.factors.permute(&z)
            }
            PreconditionSide::Left => y.to_vec(),
            PreconditionSide::Right => self.full_solve(y),
        }
    }
}

impl<T: Scalar> LinearOperator<T> for PreconditionedOperator<'_, T> {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let f = self.factors;
        match self.side {
            PreconditionSide::Split => {
                let mut t = x.to_vec();
                f.solve_upper_in_place(&mut t);
                let t = f.permute(&t);
                self.a.matvec_into(&t, y);
                f.solve_lower_in_place(y);
            }
            PreconditionSide::Left => {
                let mut t = vec![T::zero(); x.len()];
                self.a.matvec_into(x, &mut t);
                y.copy_from_slice(&self.full_solve(&t));
            }
            PreconditionSide::Right => {
                let t = self.full_solve(x);
                self.a.matvec_into(&t, y);
            }
        }
    }

    fn apply_adjoint(&self, x: &[T], y: &mut [T]) {
        let f = self.factors;
        match self.side {
            PreconditionSide::Split => {
                let mut t = x.to_vec();
                f.solve_lower_adjoint_in_place(&mut t);
                let mut s = vec![T::zero(); x.len()];
                self.a.matvec_adjoint_into(&t, &mut s);
                let mut s = f.permute_transpose(&s);
                f.solve_upper_adjoint_in_place(&mut s);
                y.copy_from_slice(&s);
            }
            PreconditionSide::Left => {
                let mut t = f.permute_transpose(x);
                f.solve_upper_adjoint_in_place(&mut t);
                f.solve_lower_adjoint_in_place(&mut t);
                self.a.matvec_adjoint_into(&t, y);
            }
            PreconditionSide::Right => {
                let mut t = vec![T::zero(); x.len()];
                self.a.matvec_adjoint_into(x, &mut t);
                let mut t = f.permute_transpose(&t);
                f.solve_upper_adjoint_in_place(&mut t);
                f.solve_lower_adjoint_in_place(&mut t);
                y.copy_from_slice(&t);
            }
        }
    }
}

/// Exact inverse of a matrix through a drop-free factorization.
#[derive(Debug, Clone)]
pub struct ExactInverse<T: Scalar> {
    factors: IlutpFactors<T>,
}

impl<T: Scalar> ExactInverse<T> {
    pub fn new(a: &SparseMatrix<T>) -> Result<Self, FactorError> {
        Ok(Self {
            factors: ilutp_factor(a, 0.0, 1.0)?,
        })
    }

    pub fn factors(&self) -> &IlutpFactors<T> {
        &self.factors
    }
}

impl<T: Scalar> LinearOperator<T> for ExactInverse<T> {
    fn dim(&self) -> usize {
        self.factors.dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        y.copy_from_slice(&self.factors.solve(x).expect("conforming length"));
    }

    fn apply_adjoint(&self, x: &[T], y: &mut [T]) {
        y.copy_from_slice(&self.factors.solve_adjoint(x).expect("conforming length"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{apply, apply_adjoint};
    use crate::vector::relative_difference;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_random<T: Scalar>(n: usize, seed: u64, density: f64) -> DMatrix<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| {
            if rng.random::<f64>() < density {
                T::sample_unit(&mut rng)
            } else {
                T::zero()
            }
        })
    }

    fn permutation_matrix(perm: &[usize]) -> DMatrix<f64> {
        let n = perm.len();
        let mut p = DMatrix::zeros(n, n);
        for (k, &c) in perm.iter().enumerate() {
            p[(c, k)] = 1.0;
        }
        p
    }

    fn lu_residual<T: Scalar>(a: &SparseMatrix<T>, f: &IlutpFactors<T>) -> f64 {
        let p = permutation_matrix(f.perm()).map(T::from_real);
        let lu = f.l().to_dense() * f.u().to_dense();
        (lu - a.to_dense() * p).norm() / a.to_dense().norm()
    }

    #[test]
    fn identity_factors_trivially() {
        let a = SparseMatrix::<f64>::identity(5);
        let f = ilutp_factor(&a, 0.1, 0.1).unwrap();
        assert_eq!(f.l(), &SparseMatrix::identity(5));
        assert_eq!(f.u(), &SparseMatrix::identity(5));
        assert_eq!(f.perm(), &[0, 1, 2, 3, 4]);
        let x = [1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(f.apply_left(&x).unwrap(), x.to_vec());
        assert_eq!(f.apply_right(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn exact_lu_on_dense_pattern() {
        let a = SparseMatrix::from_dense(&dense_random::<f64>(6, 17, 1.0));
        let f = ilutp_factor(&a, 0.0, 1.0).unwrap();
        assert!(lu_residual(&a, &f) <= 1e-12);

        // Independent route: nalgebra's row-pivoted LU solving the same system.
        let b: Vec<f64> = (0..6).map(|i| (i as f64 + 1.0).sin()).collect();
        let x = f.solve(&b).unwrap();
        let oracle = a.to_dense().lu().solve(&DVector::from_vec(b)).unwrap();
        assert!(relative_difference(&x, oracle.as_slice()) <= 1e-12);
    }

    #[test]
    fn pivoting_rescues_zero_diagonal() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(matches!(
            ilutp_factor(&a, 0.0, 0.0),
            Err(FactorError::ZeroPivot { row: 0 })
        ));
        let f = ilutp_factor(&a, 0.0, 0.1).unwrap();
        assert_eq!(f.perm(), &[1, 0]);
        assert!(lu_residual(&a, &f) <= 1e-15);
    }

    #[test]
    fn singular_matrix_reports_row() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (1, 1, 1.0), (2, 0, 1.0), (2, 1, 1.0)],
        )
        .unwrap();
        assert!(matches!(
            ilutp_factor(&a, 0.0, 1.0),
            Err(FactorError::ZeroPivot { row: 2 })
        ));
    }

    #[test]
    fn rejects_bad_parameters() {
        let a = SparseMatrix::<f64>::identity(2);
        assert!(ilutp_factor(&a, -1.0, 0.1).is_err());
        assert!(ilutp_factor(&a, 0.1, 1.5).is_err());
        let rect = SparseMatrix::<f64>::from_triplets(2, 3, &[]).unwrap();
        assert!(matches!(
            ilutp_factor(&rect, 0.1, 0.1),
            Err(FactorError::NotSquare { .. })
        ));
    }

    #[test]
    fn dropping_respects_threshold() {
        let dense = dense_random::<f64>(30, 5, 0.3) + DMatrix::identity(30, 30) * 4.0;
        let a = SparseMatrix::from_dense(&dense);
        let exact = ilutp_factor(&a, 0.0, 0.1).unwrap();
        let dropped = ilutp_factor(&a, 0.05, 0.1).unwrap();
        assert!(dropped.l().nnz() + dropped.u().nnz() < exact.l().nnz() + exact.u().nnz());
        for i in 0..30 {
            let tau = 0.05 * crate::vector::norm2(a.row(i).1);
            let (cols, vals) = dropped.u().row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c != i {
                    assert!(v.abs() > tau);
                }
            }
        }
        let capped = ilutp_factor_with(
            &a,
            &IlutpOptions {
                drop_tol: 0.0,
                pivot_tol: 0.1,
                max_fill: Some(2),
            },
        )
        .unwrap();
        for i in 0..30 {
            assert!(capped.u().row(i).0.len() <= 3);
            assert!(capped.l().row(i).0.len() <= 3);
        }
    }

    #[test]
    fn dropping_is_invariant_under_row_scaling() {
        // With D A = (D L D⁻¹)(D U), every drop decision compares entries of
        // one row against that row's own norm, so the patterns must agree.
        let n = 40;
        let dense = dense_random::<f64>(n, 9, 0.2) + DMatrix::identity(n, n) * 3.0;
        let d: Vec<f64> = (0..n)
            .map(|i| {
                if i % 3 == 0 {
                    1e3
                } else {
                    1.0 + i as f64 * 0.1
                }
            })
            .collect();
        let scaled = DMatrix::from_fn(n, n, |i, j| d[i] * dense[(i, j)]);
        let f = ilutp_factor(&SparseMatrix::from_dense(&dense), 0.1, 0.0).unwrap();
        let g = ilutp_factor(&SparseMatrix::from_dense(&scaled), 0.1, 0.0).unwrap();
        assert!(f.l().nnz() > n, "some multipliers must survive");
        assert_eq!(f.l().nnz(), g.l().nnz());
        assert_eq!(f.u().nnz(), g.u().nnz());
        let want = DMatrix::from_fn(n, n, |i, j| d[i] * f.l().to_dense()[(i, j)] / d[j]);
        assert!((g.l().to_dense() - &want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn lower_triangular_solve_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 12;
        let mut l = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            for j in 0..i {
                if rng.random::<f64>() < 0.5 {
                    l[(i, j)] = rng.random_range(-1.0..1.0);
                }
            }
        }
        let f = IlutpFactors::from_parts(
            SparseMatrix::from_dense(&l),
            SparseMatrix::identity(n),
            (0..n).collect(),
        )
        .unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = f.apply_left(&b).unwrap();
        let oracle = l
            .solve_lower_triangular(&DVector::from_vec(b.clone()))
            .unwrap();
        assert!(relative_difference(&got, oracle.as_slice()) <= 1e-13);

        // Inverse pair: L⁻¹ (L x) = x.
        let lx = apply(f.l(), &b);
        assert!(relative_difference(&f.apply_left(&lx).unwrap(), &b) <= 1e-13);
    }

    #[test]
    fn split_operator_is_adjoint_consistent_and_exact_when_undropped() {
        let dense = dense_random::<Complex64>(15, 21, 0.4)
            + DMatrix::identity(15, 15).map(|v: f64| Complex64::new(v, 0.0))
                * Complex64::new(3.0, 0.0);
        let a = SparseMatrix::from_dense(&dense);
        let f = ilutp_factor(&a, 0.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Complex64> = (0..15).map(|_| Complex64::sample_unit(&mut rng)).collect();
        let y: Vec<Complex64> = (0..15).map(|_| Complex64::sample_unit(&mut rng)).collect();
        for side in [
            PreconditionSide::Split,
            PreconditionSide::Left,
            PreconditionSide::Right,
        ] {
            let op = PreconditionedOperator::new(&a, &f, side).unwrap();
            // Exact factors make the preconditioned operator the identity.
            assert!(relative_difference(&apply(&op, &x), &x) <= 1e-12);
            let lhs = crate::vector::dot(&apply_adjoint(&op, &x), &y).unwrap();
            let rhs = crate::vector::dot(&x, &apply(&op, &y)).unwrap();
            assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
            // Variable maps round-trip.
            let back = op.recover_solution(&op.transform_initial(&x));
            assert!(relative_difference(&back, &x) <= 1e-12);
        }
    }

    #[test]
    fn variable_maps_are_consistent_with_inexact_factors() {
        let dense = dense_random::<Complex64>(20, 31, 0.4)
            + DMatrix::identity(20, 20).map(|v: f64| Complex64::new(v, 0.0))
                * Complex64::new(3.0, 0.0);
        let a = SparseMatrix::from_dense(&dense);
        let f = ilutp_factor(&a, 0.2, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Complex64> = (0..20).map(|_| Complex64::sample_unit(&mut rng)).collect();
        for side in [
            PreconditionSide::Split,
            PreconditionSide::Left,
            PreconditionSide::Right,
        ] {
            let op = PreconditionedOperator::new(&a, &f, side).unwrap();
            // M y = b' whenever A x = b.
            let y = op.transform_initial(&x);
            let rhs = op.transform_rhs(&apply(&a, &x));
            assert!(relative_difference(&apply(&op, &y), &rhs) <= 1e-12);
            assert!(relative_difference(&op.recover_solution(&y), &x) <= 1e-12);
            // M* ỹ = b̃' whenever A* x̃ = b̃.
            let yt = op.transform_dual_initial(&x);
            let rhs = op.transform_dual_rhs(&apply_adjoint(&a, &x));
            assert!(relative_difference(&apply_adjoint(&op, &yt), &rhs) <= 1e-12);
            assert!(relative_difference(&op.recover_dual_solution(&yt), &x) <= 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn undropped_partial_pivoting_is_exact(seed in 0u64..10_000, n in 2usize..100) {
            let dense = dense_random::<f64>(n, seed, 0.3) + DMatrix::identity(n, n) * 1e-3;
            let a = SparseMatrix::from_dense(&dense);
            // Matrices without a full LU are skipped rather than counted.
            if let Ok(f) = ilutp_factor(&a, 0.0, 1.0) {
                prop_assert!(lu_residual(&a, &f) <= 1e-12);
                let mut seen = vec![false; n];
                for &c in f.perm() { seen[c] = true; }
                prop_assert!(seen.iter().all(|&s| s));
            }
        }
    }
}
