//! Principal angles between column spaces.

use nalgebra::DMatrix;

use super::space::RecycleError;
use crate::error::DimensionMismatch;
use crate::scalar::Scalar;

fn orthonormal_basis<T: Scalar>(m: &DMatrix<T>) -> Result<DMatrix<T>, RecycleError> {
    let qr = m.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols()))
        .map(|i| r[(i, i)].modulus())
        .collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    if diag.len() < m.ncols() || diag.iter().any(|&d| !(d > 1e-12 * dmax)) {
        return Err(RecycleError::RankDeficient);
    }
    Ok(qr.q())
}

/// Cosines of the principal angles between `range(s1)` and `range(s2)`,
/// in descending order.
pub fn principal_angle_cosines<T: Scalar>(
    s1: &DMatrix<T>,
    s2: &DMatrix<T>,
) -> Result<Vec<f64>, RecycleError> {
    if s1.nrows() != s2.nrows() {
        return Err(DimensionMismatch {
            expected: s1.nrows(),
            found: s2.nrows(),
        }
        .into());
    }
    if s1.ncols() == 0 || s2.ncols() == 0 {
        return Ok(Vec::new());
    }
    let q1 = orthonormal_basis(s1)?;
    let q2 = orthonormal_basis(s2)?;
    let cross = q1.ad_mul(&q2);
    let mut cos: Vec<f64> = cross
        .singular_values()
        .iter()
        .map(|&s| s.clamp(0.0, 1.0))
        .collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    Ok(cos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_block<T: Scalar>(n: usize, k: usize, seed: u64) -> DMatrix<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, k, |_, _| T::sample_unit(&mut rng))
    }

    #[test]
    fn identical_spaces_have_unit_cosines() {
        let s = random_block::<f64>(20, 4, 1);
        let cos = principal_angle_cosines(&s, &s).unwrap();
        assert_eq!(cos.len(), 4);
        assert!(cos.iter().all(|&c| (c - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn orthogonal_complements_have_zero_cosines() {
        let eye = DMatrix::<f64>::identity(6, 6);
        let cos = principal_angle_cosines(
            &eye.columns(0, 3).into_owned(),
            &eye.columns(3, 3).into_owned(),
        )
        .unwrap();
        assert!(cos.iter().all(|&c| c.abs() <= 1e-15));
    }

    #[test]
    fn known_angle_in_the_plane() {
        let theta: f64 = 0.3;
        let s1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let s2 = DMatrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()]);
        let cos = principal_angle_cosines(&s1, &s2).unwrap();
        assert!((cos[0] - theta.cos()).abs() <= 1e-15);
    }

    #[test]
    fn rank_deficient_input_is_rejected() {
        let mut s = random_block::<f64>(10, 3, 2);
        let c0 = s.column(0).clone_owned();
        s.column_mut(1).copy_from(&(c0 * 2.0));
        assert_eq!(
            principal_angle_cosines(&s, &s),
            Err(RecycleError::RankDeficient)
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn symmetric_and_basis_invariant(seed in 0u64..100_000, d in 1usize..5) {
            let s1 = random_block::<Complex64>(12, d, seed);
            let s2 = random_block::<Complex64>(12, d, seed + 1);
            let m = random_block::<Complex64>(d, d, seed + 2) + DMatrix::identity(d, d) * Complex64::new(3.0, 0.0);
            let a = principal_angle_cosines(&s1, &s2).unwrap();
            let b = principal_angle_cosines(&s2, &s1).unwrap();
            let c = principal_angle_cosines(&(&s1 * &m), &s2).unwrap();
            for i in 0..d {
                prop_assert!((a[i] - b[i]).abs() <= 1e-10);
                prop_assert!((a[i] - c[i]).abs() <= 1e-10);
                prop_assert!((0.0..=1.0).contains(&a[i]));
            }
        }
    }
}
