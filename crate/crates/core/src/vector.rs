//! Dense vector kernels.
//!
//! Vectors are plain slices. The checked functions are the public contract;
//! solvers use the `*_unchecked` variants on buffers they sized themselves.

use crate::error::DimensionMismatch;
use crate::scalar::Scalar;

fn check(expected: usize, found: usize) -> Result<(), DimensionMismatch> {
    if expected == found {
        Ok(())
    } else {
        Err(DimensionMismatch { expected, found })
    }
}

/// `(x, y) = x* y`, conjugating the first argument.
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> Result<T, DimensionMismatch> {
    check(x.len(), y.len())?;
    Ok(dot_unchecked(x, y))
}

/// Returns `alpha * x + y` as a new vector.
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &[T]) -> Result<Vec<T>, DimensionMismatch> {
    check(x.len(), y.len())?;
    Ok(x.iter().zip(y).map(|(&xi, &yi)| alpha * xi + yi).collect())
}

/// Euclidean norm, scaled so tiny and huge entries neither underflow nor overflow.
pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    let scale = x.iter().map(|v| v.modulus()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let inv = 1.0 / scale;
    scale
        * x.iter()
            .map(|v| (v.modulus() * inv).powi(2))
            .sum::<f64>()
            .sqrt()
}

#[inline]
pub(crate) fn dot_unchecked<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        acc += a.conjugate() * b;
    }
    acc
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy_in_place<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Relative difference `‖x - y‖ / max(‖y‖, tiny)`.
pub fn relative_difference<T: Scalar>(x: &[T], y: &[T]) -> f64 {
    let diff: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (a - b).modulus_squared())
        .sum::<f64>()
        .sqrt();
    diff / norm2(y).max(f64::MIN_POSITIVE)
}
