//! Full-recurrence generalized bi-Lanczos, used to check that the projected
//! operators of RBiCG really give short recurrences.
//!
//! Every new vector is bi-orthogonalized against all previous ones, so the
//! coefficient matrices are upper Hessenberg in general. For a harness that
//! satisfies the coupling conditions below they come out tridiagonal and
//! `H̃ = H*`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::negligible;
use crate::operator::LinearOperator;
use crate::recycle::RecycleSpace;
use crate::scalar::Scalar;
use crate::vector::{dot_unchecked, norm2};

/// Pair of operators `B`, `B̃` with coupling data `C`, `C̃`, `F`, `F̃`.
///
/// The conditions checked by [`defects`](Self::defects) are
/// - (a) `B − B̃* = F̃ C̃* − C F*`
/// - (b) `C̃* B = 0` and `C* B̃ = 0`
/// - (c) `C̃* v₁ = 0` and `C* ṽ₁ = 0` for the starting vectors.
pub struct GenBiLanczosHarness<'a, T: Scalar, O: LinearOperator<T> + ?Sized> {
    op: &'a O,
    space: Option<&'a RecycleSpace<T>>,
    f: DMatrix<T>,
    ft: DMatrix<T>,
}

/// Defects of the coupling conditions, each relative to the size of the
/// terms involved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessDefects {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone)]
pub struct BiLanczosOutput<T: Scalar> {
    /// Primary vectors, unit norm.
    pub v: DMatrix<T>,
    /// Dual vectors scaled so that `(ṽ_j, v_j) = 1`.
    pub vt: DMatrix<T>,
    /// `(j+1) × j` coefficients of `B V_j = V_{j+1} H`.
    pub h: DMatrix<T>,
    /// Coefficients of `B̃ Ṽ_j = Ṽ_{j+1} H̃`.
    pub ht: DMatrix<T>,
    /// Steps completed; less than requested when a Krylov space became
    /// invariant or `(ṽ, v)` vanished.
    pub steps: usize,
    pub invariant: bool,
    pub breakdown: bool,
}

impl<T: Scalar> BiLanczosOutput<T> {
    /// Largest `|H[i, j]|` above the first superdiagonal, relative to `‖H‖_F`.
    pub fn tridiagonal_defect(&self) -> f64 {
        let scale = self.h.norm().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for j in 0..self.h.ncols() {
            for i in 0..j.saturating_sub(1) {
                worst = worst.max(self.h[(i, j)].modulus());
            }
        }
        worst / scale
    }

    /// `max |H − H̃*|` over the square leading block, relative to `‖H‖_F`.
    pub fn transpose_defect(&self) -> f64 {
        let m = self.h.ncols();
        let scale = self.h.norm().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                worst = worst.max((self.h[(i, j)] - self.ht[(j, i)].conjugate()).modulus());
            }
        }
        worst / scale
    }

    /// `max |Ṽ* V − I|`
    pub fn biorthogonality_defect(&self) -> f64 {
        let g = self.vt.ad_mul(&self.v);
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g[(i, j)] - target).modulus());
            }
        }
        worst
    }
}

impl<'a, T: Scalar, O: LinearOperator<T> + ?Sized> GenBiLanczosHarness<'a, T, O> {
    /// `B = A`, `B̃ = A*`, with no coupling terms.
    pub fn classical(op: &'a O) -> Self {
        let n = op.dim();
        Self {
            op,
            space: None,
            f: DMatrix::zeros(n, 0),
            ft: DMatrix::zeros(n, 0),
        }
    }

    /// `B = (I − C Ĉ*) A`, `B̃ = (I − C̃ Č*) A*` for a recycle space
    /// consistent with `op`; then `F = A* C̃ D_c⁻¹` and `F̃ = A C D_c⁻¹`.
    pub fn augmented(op: &'a O, space: &'a RecycleSpace<T>) -> Self {
        let n = op.dim();
        let k = space.k();
        let mut f = DMatrix::zeros(n, k);
        let mut ft = DMatrix::zeros(n, k);
        let mut y = vec![T::zero(); n];
        for j in 0..k {
            let chat: Vec<T> = space.chat().column(j).iter().copied().collect();
            op.apply_adjoint(&chat, &mut y);
            f.column_mut(j).copy_from_slice(&y);
            let ccheck: Vec<T> = space.ccheck().column(j).iter().copied().collect();
            op.apply(&ccheck, &mut y);
            ft.column_mut(j).copy_from_slice(&y);
        }
        Self {
            op,
            space: Some(space),
            f,
            ft,
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn apply_b(&self, x: &[T], y: &mut [T]) {
        self.op.apply(x, y);
        if let Some(s) = self.space {
            s.deflate(y);
        }
    }

    pub fn apply_bt(&self, x: &[T], y: &mut [T]) {
        self.op.apply_adjoint(x, y);
        if let Some(s) = self.space {
            s.deflate_dual(y);
        }
    }

    /// `B̃* x = A (I − Č C̃*) x`
    fn apply_bt_adjoint(&self, x: &[T], y: &mut [T]) {
        let mut w = x.to_vec();
        if let Some(s) = self.space {
            let coeffs: Vec<T> = (0..s.k())
                .map(|j| dot_unchecked(s.ct().column(j).as_slice(), x))
                .collect();
            for (j, &cj) in coeffs.iter().enumerate() {
                for (wi, &h) in w.iter_mut().zip(s.ccheck().column(j).iter()) {
                    *wi -= h * cj;
                }
            }
        }
        self.op.apply(&w, y);
    }

    /// Evaluates the coupling conditions on random probes and the given
    /// starting vectors.
    pub fn defects(&self, v1: &[T], vt1: &[T], seed: u64) -> HarnessDefects {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<T> = (0..n).map(|_| T::sample_unit(&mut rng)).collect();
        let (c, ct) = match self.space {
            Some(s) => (s.c().clone(), s.ct().clone()),
            None => (DMatrix::zeros(n, 0), DMatrix::zeros(n, 0)),
        };
        let col = |v: &[T]| nalgebra::DVector::from_column_slice(v);

        // (a) on the probe x
        let mut bx = vec![T::zero(); n];
        let mut btsx = vec![T::zero(); n];
        self.apply_b(&x, &mut bx);
        self.apply_bt_adjoint(&x, &mut btsx);
        let xv = col(&x);
        let coupling = &self.ft * ct.ad_mul(&xv) - &c * self.f.ad_mul(&xv);
        let lhs = col(&bx) - col(&btsx);
        let a = (lhs - &coupling).norm() / (norm2(&bx) + norm2(&btsx)).max(f64::MIN_POSITIVE);

        // (b)
        let mut btx = vec![T::zero(); n];
        self.apply_bt(&x, &mut btx);
        let b1 = ct.ad_mul(&col(&bx)).norm() / (ct.norm() * norm2(&bx)).max(f64::MIN_POSITIVE);
        let b2 = c.ad_mul(&col(&btx)).norm() / (c.norm() * norm2(&btx)).max(f64::MIN_POSITIVE);

        // (c)
        let c1 = ct.ad_mul(&col(v1)).norm() / (ct.norm() * norm2(v1)).max(f64::MIN_POSITIVE);
        let c2 = c.ad_mul(&col(vt1)).norm() / (c.norm() * norm2(vt1)).max(f64::MIN_POSITIVE);

        HarnessDefects {
            a,
            b: b1.max(b2),
            c: c1.max(c2),
        }
    }
}

/// Runs `m` steps of the full generalized bi-Lanczos recurrences from
/// `v1`, `ṽ1`.
pub fn gen_bilanczos_full<T: Scalar, O: LinearOperator<T> + ?Sized>(
    harness: &GenBiLanczosHarness<'_, T, O>,
    v1: &[T],
    vt1: &[T],
    m: usize,
) -> BiLanczosOutput<T> {
    const TOL: f64 = 1e-14;
    let n = harness.dim();
    let mut v: Vec<Vec<T>> = Vec::with_capacity(m + 1);
    let mut vt: Vec<Vec<T>> = Vec::with_capacity(m + 1);
    let mut h = DMatrix::<T>::zeros(m + 1, m);
    let mut ht = DMatrix::<T>::zeros(m + 1, m);
    let done = |v: Vec<Vec<T>>,
                vt: Vec<Vec<T>>,
                h: DMatrix<T>,
                ht: DMatrix<T>,
                steps,
                invariant,
                breakdown| {
        let cols = v.len();
        let to = |cols_: &[Vec<T>]| {
            let mut out = DMatrix::zeros(n, cols_.len());
            for (j, c) in cols_.iter().enumerate() {
                out.column_mut(j).copy_from_slice(c);
            }
            out
        };
        BiLanczosOutput {
            v: to(&v),
            vt: to(&vt),
            h: h.view((0, 0), (cols, steps)).into_owned(),
            ht: ht.view((0, 0), (cols, steps)).into_owned(),
            steps,
            invariant,
            breakdown,
        }
    };

    let nv = norm2(v1);
    let first: Vec<T> = v1.iter().map(|&x| x.unscale(nv)).collect();
    let d = dot_unchecked(vt1, &first);
    if nv == 0.0 || negligible(d, norm2(vt1), TOL) {
        return done(v, vt, h, ht, 0, false, true);
    }
    let sc = d.conjugate();
    vt.push(vt1.iter().map(|&x| x / sc).collect());
    v.push(first);

    let mut w = vec![T::zero(); n];
    let mut wt = vec![T::zero(); n];
    for j in 0..m {
        harness.apply_b(&v[j], &mut w);
        harness.apply_bt(&vt[j], &mut wt);
        for l in 0..=j {
            let beta = dot_unchecked(&vt[l], &w);
            let beta_t = dot_unchecked(&v[l], &wt);
            h[(l, j)] = beta;
            ht[(l, j)] = beta_t;
            for i in 0..n {
                w[i] -= beta * v[l][i];
                wt[i] -= beta_t * vt[l][i];
            }
        }
        let wn = norm2(&w);
        let scale = h.column(j).norm().max(f64::MIN_POSITIVE);
        if wn <= TOL * scale * 1e2 {
            return done(v, vt, h, ht, j + 1, true, false);
        }
        let next: Vec<T> = w.iter().map(|&x| x.unscale(wn)).collect();
        let d = dot_unchecked(&wt, &next);
        if negligible(d, norm2(&wt), TOL) {
            h[(j + 1, j)] = T::from_real(wn);
            return done(v, vt, h, ht, j + 1, false, true);
        }
        let c = d.conjugate();
        h[(j + 1, j)] = T::from_real(wn);
        ht[(j + 1, j)] = c;
        vt.push(wt.iter().map(|&x| x / c).collect());
        v.push(next);
    }
    done(v, vt, h, ht, m, false, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recycle::biorthonormalize;
    use nalgebra::DVector;

    fn random(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, k, |_, _| f64::sample_unit(&mut rng))
    }

    #[test]
    fn classical_case_is_tridiagonal() {
        let a = random(30, 30, 1);
        let h = GenBiLanczosHarness::classical(&a);
        let v1: Vec<f64> = random(30, 1, 2).as_slice().to_vec();
        let vt1: Vec<f64> = random(30, 1, 3).as_slice().to_vec();
        let out = gen_bilanczos_full(&h, &v1, &vt1, 12);
        assert_eq!(out.steps, 12);
        assert!(
            out.tridiagonal_defect() <= 1e-10,
            "{}",
            out.tridiagonal_defect()
        );
        assert!(out.transpose_defect() <= 1e-10);
        assert!(out.biorthogonality_defect() <= 1e-8);
    }

    fn augmented_setup(seed: u64) -> (DMatrix<f64>, RecycleSpace<f64>) {
        let n = 40;
        let a = random(n, n, seed) + DMatrix::identity(n, n) * 2.0;
        let space = biorthonormalize(&random(n, 3, seed + 1), &random(n, 3, seed + 2), &a).unwrap();
        (a, space)
    }

    #[test]
    fn augmented_harness_meets_the_coupling_conditions() {
        let (a, space) = augmented_setup(10);
        let h = GenBiLanczosHarness::augmented(&a, &space);
        let mut v1: Vec<f64> = random(40, 1, 20).as_slice().to_vec();
        let mut vt1: Vec<f64> = random(40, 1, 21).as_slice().to_vec();
        space.deflate(&mut v1);
        space.deflate_dual(&mut vt1);
        let d = h.defects(&v1, &vt1, 0);
        assert!(d.a <= 1e-12 && d.b <= 1e-12 && d.c <= 1e-12, "{d:?}");
    }

    #[test]
    fn projected_start_gives_short_recurrences() {
        let (a, space) = augmented_setup(30);
        let h = GenBiLanczosHarness::augmented(&a, &space);
        let mut v1: Vec<f64> = random(40, 1, 31).as_slice().to_vec();
        let mut vt1: Vec<f64> = random(40, 1, 32).as_slice().to_vec();
        space.deflate(&mut v1);
        space.deflate_dual(&mut vt1);
        let out = gen_bilanczos_full(&h, &v1, &vt1, 15);
        assert_eq!(out.steps, 15);
        assert!(
            out.tridiagonal_defect() <= 1e-8,
            "{}",
            out.tridiagonal_defect()
        );
        assert!(out.transpose_defect() <= 1e-8, "{}", out.transpose_defect());
        let cv = space.ct().tr_mul(&out.v);
        assert!(cv.norm() <= 1e-10 * out.v.norm());
    }

    #[test]
    fn unprojected_start_breaks_short_recurrences() {
        let (a, space) = augmented_setup(30);
        let h = GenBiLanczosHarness::augmented(&a, &space);
        let v1: Vec<f64> = random(40, 1, 31).as_slice().to_vec();
        let vt1: Vec<f64> = random(40, 1, 32).as_slice().to_vec();
        assert!(h.defects(&v1, &vt1, 0).c > 1e-3);
        let out = gen_bilanczos_full(&h, &v1, &vt1, 15);
        assert!(
            out.tridiagonal_defect() > 1e-6,
            "{}",
            out.tridiagonal_defect()
        );
    }

    #[test]
    fn invariant_start_terminates_early() {
        let a = DMatrix::<f64>::from_diagonal(&DVector::from_vec((1..=8).map(f64::from).collect()));
        let h = GenBiLanczosHarness::classical(&a);
        let mut v1 = vec![0.0; 8];
        v1[0] = 1.0;
        v1[1] = 1.0;
        let out = gen_bilanczos_full(&h, &v1, &v1, 6);
        assert!(out.invariant);
        assert_eq!(out.steps, 2);
    }
}
