//! Eigen-solvers used to build recycle spaces: a small dense complex
//! eigensolver for projected pencils, and shift-invert subspace iteration
//! for the smallest-magnitude eigenpairs of a large sparse operator.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::space::{apply_columns, RecycleError};
use crate::operator::{Adjoint, LinearOperator};
use crate::scalar::Scalar;

/// Eigenvalues and unit-norm right eigenvectors (as columns) of a small dense matrix.
pub fn dense_eigen(
    m: &DMatrix<Complex64>,
) -> Result<(Vec<Complex64>, DMatrix<Complex64>), RecycleError> {
    let b = m.nrows();
    if b == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    if !m.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(RecycleError::Eigen("non-finite matrix entries".into()));
    }
    let schur = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| RecycleError::Eigen("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t.norm().max(f64::MIN_POSITIVE);
    let values: Vec<Complex64> = (0..b).map(|i| t[(i, i)]).collect();
    let mut y = DMatrix::<Complex64>::zeros(b, b);
    for j in 0..b {
        y[(j, j)] = Complex64::new(1.0, 0.0);
        for i in (0..j).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for l in i + 1..=j {
                s += t[(i, l)] * y[(l, j)];
            }
            let mut d = t[(i, i)] - t[(j, j)];
            if d.norm() < f64::EPSILON * scale {
                d = Complex64::new(f64::EPSILON * scale, 0.0);
            }
            y[(i, j)] = -s / d;
        }
    }
    let mut v = q * y;
    for j in 0..b {
        let nrm = v.column(j).norm();
        v.column_mut(j).unscale_mut(nrm);
    }
    Ok((values, v))
}

/// Left eigenvectors matching the columns of `right`: the columns of `(V⁻¹)*`.
pub fn left_eigenvectors(right: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>, RecycleError> {
    let inv = right
        .clone()
        .try_inverse()
        .ok_or_else(|| RecycleError::Eigen("eigenvector matrix is singular".into()))?;
    Ok(inv.adjoint())
}

/// Indices of eigenvalues in increasing `|θ|` order, at most `count` columns.
///
/// For real scalars a complex-conjugate pair contributes two real columns
/// through its representative with positive imaginary part; a pair that would
/// only half fit ends the selection.
pub(crate) fn select_smallest<T: Scalar>(values: &[Complex64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .norm()
            .total_cmp(&values[b].norm())
            .then(values[b].im.total_cmp(&values[a].im))
    });
    let mut chosen = Vec::new();
    let mut cols = 0;
    for i in order {
        if cols >= count {
            break;
        }
        if T::IS_COMPLEX {
            chosen.push(i);
            cols += 1;
            continue;
        }
        match pair_kind(values, i) {
            PairKind::Real => {
                chosen.push(i);
                cols += 1;
            }
            PairKind::Upper => {
                if cols + 2 > count {
                    break;
                }
                chosen.push(i);
                cols += 2;
            }
            PairKind::Lower => {}
        }
    }
    chosen
}

enum PairKind {
    Real,
    Upper,
    Lower,
}

fn pair_kind(values: &[Complex64], i: usize) -> PairKind {
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let im = values[i].im;
    if im.abs() <= 1e-8 * scale {
        PairKind::Real
    } else if im > 0.0 {
        PairKind::Upper
    } else {
        PairKind::Lower
    }
}

/// Turns selected complex eigenvectors into a basis over `T`.
///
/// Complex scalars take the vectors as they are. For real scalars, a real
/// eigenvalue's vector is rotated to be real and a conjugate pair is replaced
/// by the real and imaginary parts of its representative.
pub(crate) fn basis_from_eigenvectors<T: Scalar>(
    values: &[Complex64],
    vectors: &DMatrix<Complex64>,
    selected: &[usize],
) -> DMatrix<T> {
    let n = vectors.nrows();
    let mut cols: Vec<Vec<T>> = Vec::new();
    for &i in selected {
        let v = vectors.column(i);
        if T::IS_COMPLEX {
            cols.push(v.iter().map(|&z| T::from_c64(z)).collect());
            continue;
        }
        match pair_kind(values, i) {
            PairKind::Real => {
                let lead = v
                    .iter()
                    .copied()
                    .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                    .unwrap_or_default();
                let phase = if lead.norm() > 0.0 {
                    lead.conj() / lead.norm()
                } else {
                    Complex64::new(1.0, 0.0)
                };
                cols.push(v.iter().map(|&z| T::from_c64(z * phase)).collect());
            }
            _ => {
                cols.push(
                    v.iter()
                        .map(|&z| T::from_c64(Complex64::new(z.re, 0.0)))
                        .collect(),
                );
                cols.push(
                    v.iter()
                        .map(|&z| T::from_c64(Complex64::new(z.im, 0.0)))
                        .collect(),
                );
            }
        }
    }
    let mut out = DMatrix::<T>::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).copy_from_slice(c);
    }
    out
}

/// Smallest-magnitude eigenpairs of a large operator.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<Complex64>,
    /// Unit-norm eigenvectors as columns, ordered like `values`.
    pub vectors: DMatrix<Complex64>,
    /// `‖A v − λ v‖ / |λ|` per unit-norm pair.
    pub residuals: Vec<f64>,
}

impl Eigenpairs {
    /// Basis of the invariant subspace over `T`; see [`basis_from_eigenvectors`].
    pub fn basis<T: Scalar>(&self) -> DMatrix<T> {
        let all: Vec<usize> = (0..self.values.len()).collect();
        basis_from_eigenvectors::<T>(&self.values, &self.vectors, &all)
    }
}

fn orthonormalize<T: Scalar>(m: DMatrix<T>) -> DMatrix<T> {
    m.qr().q()
}

fn apply_complex<T: Scalar, O: LinearOperator<T> + ?Sized>(
    op: &O,
    x: &[Complex64],
) -> Vec<Complex64> {
    let n = x.len();
    if T::IS_COMPLEX {
        let xt: Vec<T> = x.iter().map(|&z| T::from_c64(z)).collect();
        let mut y = vec![T::zero(); n];
        op.apply(&xt, &mut y);
        y.into_iter().map(|v| v.to_c64()).collect()
    } else {
        let re: Vec<T> = x.iter().map(|z| T::from_real(z.re)).collect();
        let im: Vec<T> = x.iter().map(|z| T::from_real(z.im)).collect();
        let mut yr = vec![T::zero(); n];
        let mut yi = vec![T::zero(); n];
        op.apply(&re, &mut yr);
        op.apply(&im, &mut yi);
        yr.iter()
            .zip(&yi)
            .map(|(a, b)| Complex64::new(a.to_c64().re, b.to_c64().re))
            .collect()
    }
}

/// Options for [`smallest_eigenpairs`].
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Subspace dimension; `None` picks `max(2 nev + 5, nev + 10)`.
    pub block: Option<usize>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            seed: 0,
            block: None,
        }
    }
}

/// The `nev` eigenpairs of `op` with smallest `|λ|`, by subspace iteration on
/// `inverse` (which must apply `op⁻¹`) with Rayleigh–Ritz extraction.
pub fn smallest_eigenpairs<T, O, I>(
    op: &O,
    inverse: &I,
    nev: usize,
    opts: &EigenOptions,
) -> Result<Eigenpairs, RecycleError>
where
    T: Scalar,
    O: LinearOperator<T> + ?Sized,
    I: LinearOperator<T> + ?Sized,
{
    let n = op.dim();
    if nev == 0 {
        return Ok(Eigenpairs {
            values: Vec::new(),
            vectors: DMatrix::zeros(n, 0),
            residuals: Vec::new(),
        });
    }
    let b = opts
        .block
        .unwrap_or((2 * nev + 5).max(nev + 10))
        .min(n)
        .max(nev);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q = orthonormalize(DMatrix::<T>::from_fn(n, b, |_, _| T::sample_unit(&mut rng)));
    let mut last = None;
    for _ in 0..opts.max_iter {
        let z = apply_columns(inverse, &q);
        let h = q.ad_mul(&z).map(|v| v.to_c64());
        let (mu, y) = dense_eigen(&h)?;
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&a, &c| mu[c].norm().total_cmp(&mu[a].norm()));
        let sel = &order[..nev];
        let qc = q.map(|v| v.to_c64());
        let mut values = Vec::with_capacity(nev);
        let mut vectors = DMatrix::<Complex64>::zeros(n, nev);
        let mut residuals = Vec::with_capacity(nev);
        for (col, &i) in sel.iter().enumerate() {
            let lambda = Complex64::new(1.0, 0.0) / mu[i];
            let mut v = &qc * y.column(i);
            let nrm = v.norm();
            v.unscale_mut(nrm);
            let av = apply_complex(op, v.as_slice());
            let res: f64 = av
                .iter()
                .zip(v.iter())
                .map(|(a, x)| (a - lambda * x).norm_sqr())
                .sum::<f64>()
                .sqrt();
            residuals.push(res / lambda.norm().max(f64::MIN_POSITIVE));
            values.push(lambda);
            vectors.column_mut(col).copy_from(&v);
        }
        let done = residuals.iter().all(|&r| r <= opts.tol);
        let result = Eigenpairs {
            values,
            vectors,
            residuals,
        };
        if done {
            return Ok(result);
        }
        last = Some(result);
        q = orthonormalize(z);
    }
    let worst = last
        .map(|r| r.residuals.iter().cloned().fold(0.0, f64::max))
        .unwrap_or(f64::NAN);
    Err(RecycleError::Eigen(format!(
        "subspace iteration stalled after {} sweeps (worst residual {worst:.3e})",
        opts.max_iter
    )))
}

/// Smallest-magnitude left eigenpairs, i.e. right eigenpairs of the adjoint.
/// Eigenvalues are returned conjugated back so they match [`smallest_eigenpairs`].
pub fn smallest_left_eigenpairs<T, O, I>(
    op: &O,
    inverse: &I,
    nev: usize,
    opts: &EigenOptions,
) -> Result<Eigenpairs, RecycleError>
where
    T: Scalar,
    O: LinearOperator<T> + ?Sized,
    I: LinearOperator<T> + ?Sized,
{
    let mut pairs = smallest_eigenpairs(&Adjoint(op), &Adjoint(inverse), nev, opts)?;
    for v in pairs.values.iter_mut() {
        *v = v.conj();
    }
    Ok(pairs)
}

/// Solves `(W̃* A W) z = θ (W̃* W) z` and its left counterpart for the
/// eigenpairs of smallest `|θ|`; returns `(θ, Z_right, Z_left)` with the
/// coefficient vectors as columns, `count` columns over `T` at most.
///
/// `F = W̃* W` may be singular; the pencil is restricted to the numerically
/// nonsingular part of its SVD.
pub(crate) fn petrov_pairs<T: Scalar>(
    g: &DMatrix<T>,
    f: &DMatrix<T>,
    count: usize,
) -> Result<(Vec<Complex64>, DMatrix<T>, DMatrix<T>), RecycleError> {
    let m = f.nrows();
    let svd = f.clone().svd(true, true);
    let (Some(x), Some(y_adj)) = (svd.u, svd.v_t) else {
        unreachable!("both singular vector sets requested")
    };
    let sigma = svd.singular_values;
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(RecycleError::Eigen("projected pencil is singular".into()));
    }
    let r = sigma.iter().filter(|&&s| s > 1e-10 * smax).count();
    let xr = x.columns(0, r).map(|v| v.to_c64());
    let yr = y_adj.rows(0, r).adjoint().map(|v| v.to_c64());
    let mut xr_scaled = xr.clone();
    for j in 0..r {
        xr_scaled.column_mut(j).unscale_mut(sigma[j]);
    }
    let gc = g.map(|v| v.to_c64());
    let reduced = xr_scaled.ad_mul(&gc) * &yr;
    let (theta, v) = dense_eigen(&reduced)?;
    let vl = left_eigenvectors(&v)?;
    let zr = &yr * v;
    let zl = &xr_scaled * vl;
    let selected = select_smallest::<T>(&theta, count);
    debug_assert!(zr.nrows() == m);
    let right = basis_from_eigenvectors::<T>(&theta, &zr, &selected);
    let left = basis_from_eigenvectors::<T>(&theta, &zl, &selected);
    Ok((selected.iter().map(|&i| theta[i]).collect(), right, left))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precond::ExactInverse;
    use crate::sparse::SparseMatrix;

    fn tridiag(m: usize, lower: f64, diag: f64, upper: f64) -> SparseMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..m {
            t.push((i, i, diag));
            if i > 0 {
                t.push((i, i - 1, lower));
            }
            if i + 1 < m {
                t.push((i, i + 1, upper));
            }
        }
        SparseMatrix::from_triplets(m, m, &t).unwrap()
    }

    #[test]
    fn dense_eigen_matches_characteristic_values() {
        // Companion-like matrix with eigenvalues 1, 2, 3.
        let m = DMatrix::from_row_slice(3, 3, &[6.0, -11.0, 6.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
            .map(|v| Complex64::new(v, 0.0));
        let (vals, vecs) = dense_eigen(&m).unwrap();
        let mut re: Vec<f64> = vals.iter().map(|v| v.re).collect();
        re.sort_by(f64::total_cmp);
        for (got, want) in re.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() <= 1e-10);
        }
        for j in 0..3 {
            let r = &m * vecs.column(j) - vecs.column(j) * vals[j];
            assert!(r.norm() <= 1e-10);
        }
        let left = left_eigenvectors(&vecs).unwrap();
        for j in 0..3 {
            let r = m.adjoint() * left.column(j) - left.column(j) * vals[j].conj();
            assert!(r.norm() <= 1e-9 * left.column(j).norm());
        }
    }

    #[test]
    fn rotation_pair_becomes_real_plane() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 5.0])
            .map(|v| Complex64::new(v, 0.0));
        let (vals, vecs) = dense_eigen(&m).unwrap();
        let sel = select_smallest::<f64>(&vals, 2);
        assert_eq!(sel.len(), 1);
        let basis = basis_from_eigenvectors::<f64>(&vals, &vecs, &sel);
        assert_eq!(basis.ncols(), 2);
        let plane = DMatrix::<f64>::identity(3, 3).columns(0, 2).into_owned();
        let cos = crate::recycle::principal_angle_cosines(&basis, &plane).unwrap();
        assert!(cos.iter().all(|&c| (c - 1.0).abs() <= 1e-12));
        // One free slot cannot hold the pair.
        assert!(select_smallest::<f64>(&vals, 1).is_empty());
    }

    #[test]
    fn shift_invert_finds_analytic_smallest_eigenvalues() {
        // tridiag(-1, 2, -0.8): eigenvalues 2 - 2·sqrt(0.8)·cos(jπ/(m+1)).
        let m = 30;
        let a = tridiag(m, -1.0, 2.0, -0.8);
        let inv = ExactInverse::new(&a).unwrap();
        let pairs = smallest_eigenpairs(&a, &inv, 4, &EigenOptions::default()).unwrap();
        let mut got: Vec<f64> = pairs.values.iter().map(|v| v.re).collect();
        got.sort_by(f64::total_cmp);
        for (j, g) in got.iter().enumerate() {
            let want = 2.0
                - 2.0
                    * 0.8f64.sqrt()
                    * ((j + 1) as f64 * std::f64::consts::PI / (m as f64 + 1.0)).cos();
            assert!((g - want).abs() <= 1e-9 * want, "{g} vs {want}");
        }
        let left = smallest_left_eigenpairs(&a, &inv, 4, &EigenOptions::default()).unwrap();
        for (l, r) in left.values.iter().zip(&pairs.values) {
            assert!((l - r).norm() <= 1e-9);
        }
        let dense = a.to_dense();
        let basis = left.basis::<f64>();
        for j in 0..4 {
            let v = basis.column(j);
            let r = dense.transpose() * v - v * left.values[j].re;
            assert!(r.norm() <= 1e-8);
        }
    }

    #[test]
    fn shift_invert_agrees_with_dense_schur() {
        let n = 80;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 1.0 + i as f64 * 0.25));
            for _ in 0..3 {
                let j = rand::Rng::random_range(&mut rng, 0..n);
                trip.push((i, j, rand::Rng::random_range(&mut rng, -0.3..0.3)));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &trip).unwrap();
        let inv = ExactInverse::new(&a).unwrap();
        let pairs = smallest_eigenpairs(&a, &inv, 5, &EigenOptions::default()).unwrap();
        let (all, _) = dense_eigen(&a.to_dense().map(|v| Complex64::new(v, 0.0))).unwrap();
        let mut mags: Vec<f64> = all.iter().map(|v| v.norm()).collect();
        mags.sort_by(f64::total_cmp);
        let mut got: Vec<f64> = pairs.values.iter().map(|v| v.norm()).collect();
        got.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&mags) {
            assert!((g - w).abs() <= 1e-8 * w);
        }
    }
}
