//! The recycle space bundle and the operations that keep it consistent with
//! the current matrix.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::error::DimensionMismatch;
use crate::operator::LinearOperator;
use crate::scalar::Scalar;
use crate::vector::dot_unchecked;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecycleError {
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("recycle space invariant violated: {0}")]
    Invariant(String),
    #[error("input basis is rank deficient")]
    RankDeficient,
    #[error("small eigenproblem failed: {0}")]
    Eigen(String),
}

/// Singular values at or below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Primary and dual recycle bases with their images under the current operator.
///
/// `C = A U` and `C̃ = A* Ũ` are kept bi-orthogonal, `C̃* C = diag(dc)` with
/// `dc` real and positive. `Ĉ = C̃ diag(dc)⁻¹` and `Č = C diag(dc)⁻¹` are the
/// scaled duals used by the projections.
#[derive(Debug, Clone, PartialEq)]
pub struct RecycleSpace<T: Scalar> {
    n: usize,
    u: DMatrix<T>,
    ut: DMatrix<T>,
    c: DMatrix<T>,
    ct: DMatrix<T>,
    chat: DMatrix<T>,
    ccheck: DMatrix<T>,
    dc: Vec<f64>,
}

pub(crate) fn column<T: Scalar>(m: &DMatrix<T>, j: usize) -> &[T] {
    let n = m.nrows();
    &m.as_slice()[j * n..(j + 1) * n]
}

/// Applies `op` to every column of `m`.
pub(crate) fn apply_columns<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    m: &DMatrix<T>,
) -> DMatrix<T> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        let n = m.nrows();
        op.apply(column(m, j), &mut out.as_mut_slice()[j * n..(j + 1) * n]);
    }
    out
}

/// Applies `op*` to every column of `m`.
pub(crate) fn apply_adjoint_columns<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    m: &DMatrix<T>,
) -> DMatrix<T> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        let n = m.nrows();
        op.apply_adjoint(column(m, j), &mut out.as_mut_slice()[j * n..(j + 1) * n]);
    }
    out
}

impl<T: Scalar> RecycleSpace<T> {
    pub fn empty(n: usize) -> Self {
        let z = DMatrix::zeros(n, 0);
        Self {
            n,
            u: z.clone(),
            ut: z.clone(),
            c: z.clone(),
            ct: z.clone(),
            chat: z.clone(),
            ccheck: z,
            dc: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.dc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dc.is_empty()
    }

    pub fn u(&self) -> &DMatrix<T> {
        &self.u
    }

    pub fn ut(&self) -> &DMatrix<T> {
        &self.ut
    }

    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }

    pub fn ct(&self) -> &DMatrix<T> {
        &self.ct
    }

    pub fn chat(&self) -> &DMatrix<T> {
        &self.chat
    }

    pub fn ccheck(&self) -> &DMatrix<T> {
        &self.ccheck
    }

    pub fn dc(&self) -> &[f64] {
        &self.dc
    }

    /// `Ĉ* z`
    pub(crate) fn hat_coeffs(&self, z: &[T]) -> Vec<T> {
        (0..self.k())
            .map(|j| dot_unchecked(column(&self.chat, j), z))
            .collect()
    }

    /// `Č* z`
    pub(crate) fn check_coeffs(&self, z: &[T]) -> Vec<T> {
        (0..self.k())
            .map(|j| dot_unchecked(column(&self.ccheck, j), z))
            .collect()
    }

    fn accumulate(m: &DMatrix<T>, scale: T, coeffs: &[T], y: &mut [T]) {
        for (j, &cj) in coeffs.iter().enumerate() {
            let f = scale * cj;
            for (yi, &mi) in y.iter_mut().zip(column(m, j)) {
                *yi += f * mi;
            }
        }
    }

    /// `y += scale · C coeffs`
    pub(crate) fn add_c(&self, scale: T, coeffs: &[T], y: &mut [T]) {
        Self::accumulate(&self.c, scale, coeffs, y);
    }

    /// `y += scale · C̃ coeffs`
    pub(crate) fn add_ct(&self, scale: T, coeffs: &[T], y: &mut [T]) {
        Self::accumulate(&self.ct, scale, coeffs, y);
    }

    /// `y += scale · U coeffs`
    pub(crate) fn add_u(&self, scale: T, coeffs: &[T], y: &mut [T]) {
        Self::accumulate(&self.u, scale, coeffs, y);
    }

    /// `y += scale · Ũ coeffs`
    pub(crate) fn add_ut(&self, scale: T, coeffs: &[T], y: &mut [T]) {
        Self::accumulate(&self.ut, scale, coeffs, y);
    }

    /// Projects a primary residual: returns the coefficients `Ĉ* r` and
    /// replaces `r` by `(I − C Ĉ*) r`.
    pub(crate) fn deflate(&self, r: &mut [T]) -> Vec<T> {
        let coeffs = self.hat_coeffs(r);
        self.add_c(-T::one(), &coeffs, r);
        coeffs
    }

    /// Dual counterpart of [`deflate`](Self::deflate) with `Č` and `C̃`.
    pub(crate) fn deflate_dual(&self, r: &mut [T]) -> Vec<T> {
        let coeffs = self.check_coeffs(r);
        self.add_ct(-T::one(), &coeffs, r);
        coeffs
    }

    /// Starting point and residual of the projected primary system.
    ///
    /// With `r₋₁ = b − A x₋₁` this returns `x₀ = x₋₁ + U Ĉ* r₋₁` and
    /// `r₀ = (I − C Ĉ*) r₋₁`.
    pub fn project_initial<O: LinearOperator<T> + ?Sized>(
        &self,
        op: &O,
        b: &[T],
        x_minus1: &[T],
    ) -> Result<(Vec<T>, Vec<T>), RecycleError> {
        self.check_vectors(op.dim(), b, x_minus1)?;
        let mut r = vec![T::zero(); self.n];
        op.apply(x_minus1, &mut r);
        for (ri, &bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let coeffs = self.deflate(&mut r);
        let mut x = x_minus1.to_vec();
        self.add_u(T::one(), &coeffs, &mut x);
        Ok((x, r))
    }

    /// Dual analogue: `x̃₀ = x̃₋₁ + Ũ Č* r̃₋₁`, `r̃₀ = (I − C̃ Č*) r̃₋₁`.
    pub fn project_initial_dual<O: LinearOperator<T> + ?Sized>(
        &self,
        op: &O,
        b_dual: &[T],
        x_minus1_dual: &[T],
    ) -> Result<(Vec<T>, Vec<T>), RecycleError> {
        self.check_vectors(op.dim(), b_dual, x_minus1_dual)?;
        let mut r = vec![T::zero(); self.n];
        op.apply_adjoint(x_minus1_dual, &mut r);
        for (ri, &bi) in r.iter_mut().zip(b_dual) {
            *ri = bi - *ri;
        }
        let coeffs = self.deflate_dual(&mut r);
        let mut x = x_minus1_dual.to_vec();
        self.add_ut(T::one(), &coeffs, &mut x);
        Ok((x, r))
    }

    fn check_vectors(&self, dim: usize, b: &[T], x: &[T]) -> Result<(), DimensionMismatch> {
        for found in [dim, b.len(), x.len()] {
            if found != self.n {
                return Err(DimensionMismatch {
                    expected: self.n,
                    found,
                });
            }
        }
        Ok(())
    }

    /// Checks every structural invariant against `op` with relative tolerance `tol`.
    pub fn validate<O: LinearOperator<T> + ?Sized>(
        &self,
        op: &O,
        tol: f64,
    ) -> Result<(), RecycleError> {
        if op.dim() != self.n {
            return Err(DimensionMismatch {
                expected: self.n,
                found: op.dim(),
            }
            .into());
        }
        let k = self.k();
        for m in [
            &self.u,
            &self.ut,
            &self.c,
            &self.ct,
            &self.chat,
            &self.ccheck,
        ] {
            if m.nrows() != self.n || m.ncols() != k {
                return Err(RecycleError::Invariant(format!(
                    "block is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    self.n,
                    k
                )));
            }
        }
        if k == 0 {
            return Ok(());
        }
        let dmax = self.dc.iter().cloned().fold(0.0, f64::max);
        if self.dc.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(RecycleError::Invariant(
                "Dc must be real and positive".into(),
            ));
        }
        let d = self.ct.ad_mul(&self.c);
        for i in 0..k {
            for j in 0..k {
                let expected = if i == j { self.dc[i] } else { 0.0 };
                if (d[(i, j)] - T::from_real(expected)).modulus() > tol * dmax {
                    return Err(RecycleError::Invariant(format!(
                        "C̃*C differs from diag(Dc) at ({i}, {j})"
                    )));
                }
            }
        }
        let eye = DMatrix::<T>::identity(k, k);
        if (self.chat.ad_mul(&self.c) - &eye).norm() > tol * (k as f64).sqrt() {
            return Err(RecycleError::Invariant("Ĉ*C is not the identity".into()));
        }
        if (self.ccheck.ad_mul(&self.ct) - &eye).norm() > tol * (k as f64).sqrt() {
            return Err(RecycleError::Invariant("Č*C̃ is not the identity".into()));
        }
        let au = apply_columns(op, &self.u);
        if (&au - &self.c).norm() > tol * self.c.norm() {
            return Err(RecycleError::Invariant("C differs from A U".into()));
        }
        let aut = apply_adjoint_columns(op, &self.ut);
        if (&aut - &self.ct).norm() > tol * self.ct.norm() {
            return Err(RecycleError::Invariant("C̃ differs from A* Ũ".into()));
        }
        Ok(())
    }
}

/// Builds a consistent recycle space from raw primary and dual bases,
/// computing the images with `op`.
pub fn biorthonormalize<T: Scalar, O: LinearOperator<T> + ?Sized>(
    u_raw: &DMatrix<T>,
    ut_raw: &DMatrix<T>,
    op: &O,
) -> Result<RecycleSpace<T>, RecycleError> {
    for m in [u_raw, ut_raw] {
        if m.nrows() != op.dim() {
            return Err(DimensionMismatch {
                expected: op.dim(),
                found: m.nrows(),
            }
            .into());
        }
    }
    let c = apply_columns(op, u_raw);
    let ct = apply_adjoint_columns(op, ut_raw);
    Ok(biorthonormalize_with_images(u_raw, ut_raw, &c, &ct))
}

/// [`biorthonormalize`] for bases whose images are already known.
///
/// Factors `C̃_raw* C_raw = X Σ Y*` and rotates both sides by the singular
/// vectors. Directions with `σ ≤ RANK_TOL · σ_max` are dropped.
pub fn biorthonormalize_with_images<T: Scalar>(
    u_raw: &DMatrix<T>,
    ut_raw: &DMatrix<T>,
    c_raw: &DMatrix<T>,
    ct_raw: &DMatrix<T>,
) -> RecycleSpace<T> {
    let n = u_raw.nrows();
    if u_raw.ncols() == 0 || ut_raw.ncols() == 0 {
        return RecycleSpace::empty(n);
    }
    let m = ct_raw.ad_mul(c_raw);
    let svd = m.svd(true, true);
    let (Some(x), Some(y_adj)) = (svd.u, svd.v_t) else {
        unreachable!("both singular vector sets requested")
    };
    let sigma = svd.singular_values;
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    if !(smax > 0.0) || !smax.is_finite() {
        log::warn!("recycle basis images are mutually orthogonal; returning an empty space");
        return RecycleSpace::empty(n);
    }
    let keep: Vec<usize> = (0..sigma.len())
        .filter(|&j| sigma[j] > RANK_TOL * smax)
        .collect();
    let k = keep.len();
    let mut xs = DMatrix::<T>::zeros(x.nrows(), k);
    let mut ys = DMatrix::<T>::zeros(y_adj.ncols(), k);
    let mut dc = Vec::with_capacity(k);
    for (col, &j) in keep.iter().enumerate() {
        let mut yj: Vec<T> = y_adj.row(j).iter().map(|v| v.conjugate()).collect();
        let lead = yj
            .iter()
            .copied()
            .max_by(|a, b| a.modulus().total_cmp(&b.modulus()))
            .unwrap_or(T::one());
        let phase = if lead.modulus() > 0.0 {
            lead.conjugate().unscale(lead.modulus())
        } else {
            T::one()
        };
        for v in yj.iter_mut() {
            *v *= phase;
        }
        ys.column_mut(col).copy_from_slice(&yj);
        for i in 0..x.nrows() {
            xs[(i, col)] = x[(i, j)] * phase;
        }
        dc.push(sigma[j]);
    }
    let u = u_raw * &ys;
    let ut = ut_raw * &xs;
    let c = c_raw * &ys;
    let ct = ct_raw * &xs;
    let mut chat = ct.clone();
    let mut ccheck = c.clone();
    for (j, &d) in dc.iter().enumerate() {
        chat.column_mut(j).unscale_mut(d);
        ccheck.column_mut(j).unscale_mut(d);
    }
    RecycleSpace {
        n,
        u,
        ut,
        c,
        ct,
        chat,
        ccheck,
        dc,
    }
}

/// Recomputes the images against a new operator and re-biorthonormalizes.
pub fn refresh_images<T: Scalar, O: LinearOperator<T> + ?Sized>(
    space: &RecycleSpace<T>,
    op: &O,
) -> Result<RecycleSpace<T>, RecycleError> {
    biorthonormalize(&space.u, &space.ut, op)
}
