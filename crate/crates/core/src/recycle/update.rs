//! Recycle-space construction from the direction vectors of RBiCG cycles.

use nalgebra::DMatrix;

use super::eigen::petrov_pairs;
use super::space::{biorthonormalize_with_images, RecycleError, RecycleSpace};
use crate::scalar::Scalar;
use crate::vector::norm2;

/// Relative singular-value cut when orthonormalizing the captured directions.
const BASIS_TOL: f64 = 1e-6;

/// Vectors stored during one cycle of RBiCG iterations.
///
/// Directions are the unprojected `p_i`, `p̃_i` together with their images
/// `A p_i` and `A* p̃_i`, which the solver computes anyway. The residual
/// blocks hold the (unnormalized) Lanczos vectors `r_i`, `r̃_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CapturedCycle<T: Scalar> {
    pub directions: DMatrix<T>,
    pub images: DMatrix<T>,
    pub dual_directions: DMatrix<T>,
    pub dual_images: DMatrix<T>,
    pub residuals: DMatrix<T>,
    pub dual_residuals: DMatrix<T>,
    /// Step lengths `α_i` of the iterations in this cycle.
    pub alphas: Vec<T>,
    /// Direction-update coefficients `β_i`.
    pub betas: Vec<T>,
}

impl<T: Scalar> CapturedCycle<T> {
    pub fn len(&self) -> usize {
        self.directions.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.ncols() == 0
    }
}

/// Accumulates vectors for the cycle in progress, carrying the last two
/// direction pairs over to the next cycle.
#[derive(Debug)]
pub(crate) struct CycleBuilder<T: Scalar> {
    n: usize,
    carry: usize,
    dirs: Vec<Vec<T>>,
    imgs: Vec<Vec<T>>,
    ddirs: Vec<Vec<T>>,
    dimgs: Vec<Vec<T>>,
    res: Vec<Vec<T>>,
    dres: Vec<Vec<T>>,
    alphas: Vec<T>,
    betas: Vec<T>,
    fresh: usize,
}

fn to_matrix<T: Scalar>(n: usize, cols: &[Vec<T>]) -> DMatrix<T> {
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.column_mut(j).copy_from_slice(c);
    }
    m
}

impl<T: Scalar> CycleBuilder<T> {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            n,
            carry: 2,
            dirs: Vec::new(),
            imgs: Vec::new(),
            ddirs: Vec::new(),
            dimgs: Vec::new(),
            res: Vec::new(),
            dres: Vec::new(),
            alphas: Vec::new(),
            betas: Vec::new(),
            fresh: 0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn push(
        &mut self,
        p: &[T],
        z: &[T],
        pt: &[T],
        zt: &[T],
        r: &[T],
        rt: &[T],
        alpha: T,
        beta: T,
    ) {
        self.dirs.push(p.to_vec());
        self.imgs.push(z.to_vec());
        self.ddirs.push(pt.to_vec());
        self.dimgs.push(zt.to_vec());
        self.res.push(r.to_vec());
        self.dres.push(rt.to_vec());
        self.alphas.push(alpha);
        self.betas.push(beta);
        self.fresh += 1;
    }

    /// Iterations recorded since the last [`finish`](Self::finish).
    pub(crate) fn fresh(&self) -> usize {
        self.fresh
    }

    /// Closes the current cycle and keeps the last direction pairs for the next one.
    pub(crate) fn finish(&mut self) -> CapturedCycle<T> {
        let cycle = CapturedCycle {
            directions: to_matrix(self.n, &self.dirs),
            images: to_matrix(self.n, &self.imgs),
            dual_directions: to_matrix(self.n, &self.ddirs),
            dual_images: to_matrix(self.n, &self.dimgs),
            residuals: to_matrix(self.n, &self.res),
            dual_residuals: to_matrix(self.n, &self.dres),
            alphas: self.alphas.clone(),
            betas: self.betas.clone(),
        };
        let keep = self.carry.min(self.dirs.len());
        for v in [
            &mut self.dirs,
            &mut self.imgs,
            &mut self.ddirs,
            &mut self.dimgs,
            &mut self.res,
            &mut self.dres,
        ] {
            let drop = v.len() - keep;
            v.drain(..drop);
        }
        let drop = self.alphas.len() - keep;
        self.alphas.drain(..drop);
        self.betas.drain(..drop);
        self.fresh = 0;
        cycle
    }
}

fn push_normalized<T: Scalar>(
    basis: &mut Vec<Vec<T>>,
    images: &mut Vec<Vec<T>>,
    v: &[T],
    image: &[T],
) {
    let nrm = norm2(v);
    if nrm > 0.0 && nrm.is_finite() {
        let inv = T::from_real(1.0 / nrm);
        basis.push(v.iter().map(|&x| x * inv).collect());
        images.push(image.iter().map(|&x| x * inv).collect());
    }
}

/// Orthonormal basis `Q` of `span(W)` with its image `A Q`, dropping
/// directions below `BASIS_TOL` relative to the largest singular value.
fn orthonormal_with_images<T: Scalar>(w: &DMatrix<T>, aw: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let svd = w.clone().svd(true, true);
    let (Some(q), Some(v_adj)) = (svd.u, svd.v_t) else {
        unreachable!("both singular vector sets requested")
    };
    let sigma = svd.singular_values;
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let r = sigma.iter().filter(|&&s| s > BASIS_TOL * smax).count();
    let mut t = v_adj.rows(0, r).adjoint();
    for j in 0..r {
        t.column_mut(j).unscale_mut(sigma[j]);
    }
    (q.columns(0, r).into_owned(), aw * t)
}

/// Builds a `k`-dimensional recycle space from captured cycles and,
/// optionally, the previous space.
///
/// With `W = [U_prev, P]`, `W̃ = [Ũ_prev, P̃]`, the `k` Ritz vectors of
/// smallest `|θ|` are taken from `span(W)` for `A` and from `span(W̃)` for
/// `A*`, and the two sets are biorthonormalized. The images `A W` and `A* W̃`
/// come from the stored vectors, so `previous` must already be consistent
/// with the current matrix.
pub fn update_recycle_space<T: Scalar>(
    cycles: &[CapturedCycle<T>],
    previous: Option<&RecycleSpace<T>>,
    k: usize,
) -> Result<RecycleSpace<T>, RecycleError> {
    let n = cycles
        .first()
        .map(|c| c.directions.nrows())
        .or(previous.map(|p| p.n()))
        .unwrap_or(0);
    let mut w = Vec::new();
    let mut aw = Vec::new();
    let mut wt = Vec::new();
    let mut awt = Vec::new();
    let col = |m: &DMatrix<T>, j: usize| m.column(j).iter().copied().collect::<Vec<T>>();
    if let Some(prev) = previous {
        for j in 0..prev.k() {
            push_normalized(&mut w, &mut aw, &col(prev.u(), j), &col(prev.c(), j));
            push_normalized(&mut wt, &mut awt, &col(prev.ut(), j), &col(prev.ct(), j));
        }
    }
    for cycle in cycles {
        for m in [&cycle.images, &cycle.dual_directions, &cycle.dual_images] {
            if m.ncols() != cycle.directions.ncols() || m.nrows() != n {
                return Err(RecycleError::Invariant(
                    "cycle blocks have inconsistent shapes".into(),
                ));
            }
        }
        for j in 0..cycle.len() {
            push_normalized(
                &mut w,
                &mut aw,
                &col(&cycle.directions, j),
                &col(&cycle.images, j),
            );
            push_normalized(
                &mut wt,
                &mut awt,
                &col(&cycle.dual_directions, j),
                &col(&cycle.dual_images, j),
            );
        }
    }
    if k == 0 || w.is_empty() || wt.is_empty() {
        return Ok(RecycleSpace::empty(n));
    }
    let (w, aw) = orthonormal_with_images(&to_matrix(n, &w), &to_matrix(n, &aw));
    let (wt, awt) = orthonormal_with_images(&to_matrix(n, &wt), &to_matrix(n, &awt));
    if w.ncols() == 0 || wt.ncols() == 0 {
        return Ok(RecycleSpace::empty(n));
    }

    // The two-sided pencil (W̃* A W, W̃* W) is ill-posed when the two spaces
    // are nearly orthogonal, so each side gets its own Rayleigh-Ritz step.
    let h = w.ad_mul(&aw);
    let ht = wt.ad_mul(&awt);
    let (_, zr, _) = petrov_pairs(&h, &DMatrix::identity(h.nrows(), h.ncols()), k)?;
    let (_, zl, _) = petrov_pairs(&ht, &DMatrix::identity(ht.nrows(), ht.ncols()), k)?;

    let u = &w * &zr;
    let c = &aw * &zr;
    let ut = &wt * &zl;
    let ct = &awt * &zl;
    Ok(biorthonormalize_with_images(&u, &ut, &c, &ct))
}
