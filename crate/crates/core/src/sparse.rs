//! Compressed sparse row matrices.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::error::DimensionMismatch;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SparseError {
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("entry ({row}, {col}) outside a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),
}

#[derive(Clone, PartialEq)]
struct Csr<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> Csr<T> {
    fn matvec_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// Conjugate transpose, built by a counting sort over columns so rows of
    /// the result come out with sorted column indices.
    fn adjoint(&self) -> Csr<T> {
        let nnz = self.values.len();
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![T::zero(); nnz];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[k];
                let dst = next[c];
                col_idx[dst] = i;
                values[dst] = self.values[k].conjugate();
                next[c] += 1;
            }
        }
        Csr {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// A CSR matrix with canonical structure: sorted, duplicate-free column
/// indices in every row.
///
/// The conjugate transpose is built on first use and cached, so repeated
/// `A*` products (RBiCG applies one per iteration) cost the same as `A`
/// products.
pub struct SparseMatrix<T> {
    csr: Csr<T>,
    adjoint: OnceLock<Csr<T>>,
}

impl<T: Scalar> Clone for SparseMatrix<T> {
    fn clone(&self) -> Self {
        Self {
            csr: self.csr.clone(),
            adjoint: OnceLock::new(),
        }
    }
}

impl<T: Scalar> PartialEq for SparseMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.csr == other.csr
    }
}

impl<T: Scalar> fmt::Debug for SparseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SparseMatrix")
            .field("nrows", &self.csr.nrows)
            .field("ncols", &self.csr.ncols)
            .field("nnz", &self.nnz())
            .finish()
    }
}

impl<T: Scalar> SparseMatrix<T> {
    fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Self {
        Self {
            csr: Csr {
                nrows,
                ncols,
                row_ptr,
                col_idx,
                values,
            },
            adjoint: OnceLock::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        entries: &[(usize, usize, T)],
    ) -> Result<Self, SparseError> {
        for &(row, col, _) in entries {
            if row >= nrows || col >= ncols {
                return Err(SparseError::IndexOutOfRange {
                    row,
                    col,
                    nrows,
                    ncols,
                });
            }
        }
        let mut sorted: Vec<(usize, usize, T)> = entries.to_vec();
        sorted.sort_by_key(|&(i, j, _)| (i, j));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<T> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("entry present") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self::from_parts_unchecked(
            nrows, ncols, row_ptr, col_idx, values,
        ))
    }

    /// Wraps raw CSR arrays after checking every structural invariant.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self, SparseError> {
        if row_ptr.len() != nrows + 1 {
            return Err(SparseError::InvalidStructure(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[nrows] != col_idx.len() || col_idx.len() != values.len() {
            return Err(SparseError::InvalidStructure(
                "row_ptr must start at 0 and end at nnz; col_idx and values must have length nnz"
                    .into(),
            ));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(SparseError::InvalidStructure(format!(
                    "row_ptr decreases at row {i}"
                )));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for (k, &c) in cols.iter().enumerate() {
                if c >= ncols {
                    return Err(SparseError::IndexOutOfRange {
                        row: i,
                        col: c,
                        nrows,
                        ncols,
                    });
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(SparseError::InvalidStructure(format!(
                        "columns in row {i} are not strictly increasing"
                    )));
                }
            }
        }
        Ok(Self::from_parts_unchecked(
            nrows, ncols, row_ptr, col_idx, values,
        ))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), diag.to_vec())
    }

    /// Converts a dense matrix, keeping entries that are exactly nonzero.
    pub fn from_dense(dense: &DMatrix<T>) -> Self {
        let mut entries = Vec::new();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                let v = dense[(i, j)];
                if v != T::zero() {
                    entries.push((i, j, v));
                }
            }
        }
        Self::from_triplets(dense.nrows(), dense.ncols(), &entries).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.csr.nrows
    }

    pub fn ncols(&self) -> usize {
        self.csr.ncols
    }

    pub fn nnz(&self) -> usize {
        self.csr.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.csr.nrows == self.csr.ncols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.csr.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.csr.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.csr.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let range = self.csr.row_ptr[i]..self.csr.row_ptr[i + 1];
        (&self.csr.col_idx[range.clone()], &self.csr.values[range])
    }

    /// Stored value at `(i, j)`, zero when the position is not stored.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn to_triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows() {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v)));
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut d = DMatrix::zeros(self.nrows(), self.ncols());
        for (i, j, v) in self.to_triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>, SparseError> {
        if x.len() != self.ncols() {
            return Err(DimensionMismatch {
                expected: self.ncols(),
                found: x.len(),
            }
            .into());
        }
        let mut y = vec![T::zero(); self.nrows()];
        self.csr.matvec_into(x, &mut y);
        Ok(y)
    }

    /// `y = A* x`, using the cached conjugate transpose.
    pub fn matvec_conj_transpose(&self, x: &[T]) -> Result<Vec<T>, SparseError> {
        if x.len() != self.nrows() {
            return Err(DimensionMismatch {
                expected: self.nrows(),
                found: x.len(),
            }
            .into());
        }
        let mut y = vec![T::zero(); self.ncols()];
        self.adjoint_csr().matvec_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn matvec_into(&self, x: &[T], y: &mut [T]) {
        self.csr.matvec_into(x, y);
    }

    pub(crate) fn matvec_adjoint_into(&self, x: &[T], y: &mut [T]) {
        self.adjoint_csr().matvec_into(x, y);
    }

    fn adjoint_csr(&self) -> &Csr<T> {
        self.adjoint.get_or_init(|| self.csr.adjoint())
    }

    /// The conjugate transpose as a new matrix.
    pub fn conj_transpose(&self) -> Self {
        let a = self.adjoint_csr().clone();
        Self::from_parts_unchecked(a.nrows, a.ncols, a.row_ptr, a.col_idx, a.values)
    }

    pub fn frobenius_norm(&self) -> f64 {
        crate::vector::norm2(&self.csr.values)
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.csr.values {
            *v *= alpha;
        }
        out
    }

    /// `Σ coeff_i · M_i` over the union of the sparsity patterns.
    pub fn linear_combination(terms: &[(T, &SparseMatrix<T>)]) -> Result<Self, SparseError> {
        let Some((_, first)) = terms.first() else {
            return Err(SparseError::InvalidStructure(
                "empty linear combination".into(),
            ));
        };
        let (nrows, ncols) = (first.nrows(), first.ncols());
        let mut entries = Vec::new();
        for &(coeff, m) in terms {
            if m.nrows() != nrows || m.ncols() != ncols {
                return Err(DimensionMismatch {
                    expected: nrows * ncols,
                    found: m.nrows() * m.ncols(),
                }
                .into());
            }
            entries.extend(
                m.to_triplets()
                    .into_iter()
                    .map(|(i, j, v)| (i, j, coeff * v)),
            );
        }
        Self::from_triplets(nrows, ncols, &entries)
    }
}
