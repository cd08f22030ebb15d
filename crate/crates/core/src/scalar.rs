//! Scalar field abstraction shared by every kernel and solver.
//!
//! Solvers are generic over real (`f64`) and complex (`Complex64`) double
//! precision. Recycle bases built from Ritz vectors of a real non-symmetric
//! matrix are complex in general, so the complex instantiation is a first-class
//! citizen even though the test operators are real.

use nalgebra::ComplexField;
use num_complex::Complex64;
use rand::Rng;

/// A real or complex double-precision scalar.
pub trait Scalar: ComplexField<RealField = f64> + Copy + Default + Send + Sync + 'static {
    /// `true` for the complex instantiation.
    const IS_COMPLEX: bool;
    /// Tag used by the binary recycle-space format.
    const TAG: u8;

    /// Embeds a complex number; the real instantiation keeps only the real part.
    fn from_c64(z: Complex64) -> Self;

    fn to_c64(self) -> Complex64;

    /// Draws each component uniformly from `[-1, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;
    const TAG: u8 = 0;

    #[inline]
    fn from_c64(z: Complex64) -> Self {
        z.re
    }

    #[inline]
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random_range(-1.0..1.0)
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;
    const TAG: u8 = 1;

    #[inline]
    fn from_c64(z: Complex64) -> Self {
        z
    }

    #[inline]
    fn to_c64(self) -> Complex64 {
        self
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugation_is_an_involution() {
        let z = Complex64::new(1.5, -2.0);
        assert_eq!(z.conjugate().conjugate(), z);
        assert_eq!(ComplexField::conjugate(3.0_f64), 3.0);
    }

    #[test]
    fn real_embedding_drops_imaginary_part() {
        assert_eq!(f64::from_c64(Complex64::new(2.0, 7.0)), 2.0);
        assert_eq!(
            Complex64::from_c64(Complex64::new(2.0, 7.0)),
            Complex64::new(2.0, 7.0)
        );
    }
}
