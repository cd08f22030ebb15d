//! Square linear operators as seen by the Krylov solvers.

use std::cell::Cell;

use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

/// A square operator with forward and adjoint actions.
///
/// Implementations may assume `x` and `y` both have length [`dim`](Self::dim).
pub trait LinearOperator<T: Scalar> {
    fn dim(&self) -> usize;

    /// `y = A x`
    fn apply(&self, x: &[T], y: &mut [T]);

    /// `y = A* x`
    fn apply_adjoint(&self, x: &[T], y: &mut [T]);
}

impl<T: Scalar, O: LinearOperator<T> + ?Sized> LinearOperator<T> for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }

    fn apply_adjoint(&self, x: &[T], y: &mut [T]) {
        (**self).apply_adjoint(x, y)
    }
}

impl<T: Scalar> LinearOperator<T> for SparseMatrix<T> {
    fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.nrows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matvec_into(x, y);
    }

    fn apply_adjoint(&self, x: &[T], y: &mut [T]) {
        self.matvec_adjoint_into(x, y);
    }
}

/// Counts forward and adjoint applications of the wrapped operator.
pub struct CountingOperator<O> {
    inner: O,
    forward: Cell<usize>,
    adjoint: Cell<usize>,
}

impl<O> CountingOperator<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            forward: Cell::new(0),
            adjoint: Cell::new(0),
        }
    }

    pub fn forward_count(&self) -> usize {
        self.forward.get()
    }

    pub fn adjoint_count(&self) -> usize {
        self.adjoint.get()
    }

    pub fn total(&self) -> usize {
        self.forward.get() + self.adjoint.get()
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<T: Scalar, O: LinearOperator<T>> LinearOperator<T> for CountingOperator<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.forward.set(self.forward.get() + 1);
        self.inner.apply(x, y);
    }

    fn apply_adjoint(&self, x: &[T], y: &mut [T]) {
        self.adjoint.set(self.adjoint.get() + 1);
        self.inner.apply_adjoint(x, y);
    }
}

/// Swaps the forward and adjoint actions of the wrapped operator.
pub struct Adjoint<O>(pub O);

impl<T: Scalar, O: LinearOperator<T>> LinearOperator<T> for Adjoint<O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.0.apply_adjoint(x, y);
    }

    fn apply_adjoint(&self, x: &[T], y: &mut [T]) {
        self.0.apply(x, y);
    }
}

/// Dense operator, mostly useful for small oracles and tests.
impl<T: Scalar> LinearOperator<T> for nalgebra::DMatrix<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self
                .row(i)
                .iter()
                .zip(x)
                .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        }
    }

    fn apply_adjoint(&self, x: &[T], y: &mut [T]) {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = self
                .column(j)
                .iter()
                .zip(x)
                .fold(T::zero(), |acc, (&a, &b)| acc + a.conjugate() * b);
        }
    }
}

/// Applies `op` to a fresh vector.
pub fn apply<T: Scalar, O: LinearOperator<T> + ?Sized>(op: &O, x: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); op.dim()];
    op.apply(x, &mut y);
    y
}

/// Applies `op*` to a fresh vector.
pub fn apply_adjoint<T: Scalar, O: LinearOperator<T> + ?Sized>(op: &O, x: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); op.dim()];
    op.apply_adjoint(x, &mut y);
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_wrapper_tracks_both_directions() {
        let a = SparseMatrix::<f64>::identity(4);
        let counted = CountingOperator::new(&a);
        let _ = apply(&counted, &[1.0; 4]);
        let _ = apply(&counted, &[1.0; 4]);
        let _ = apply_adjoint(&counted, &[1.0; 4]);
        assert_eq!(counted.forward_count(), 2);
        assert_eq!(counted.adjoint_count(), 1);
        assert_eq!(counted.total(), 3);
    }

    #[test]
    fn dense_and_sparse_agree() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 1, 2.0), (1, 2, -1.0), (2, 0, 4.0), (2, 2, 1.0)],
        )
        .unwrap();
        let d = a.to_dense();
        let x = [1.0, 2.0, 3.0];
        assert_eq!(apply(&a, &x), apply(&d, &x));
        assert_eq!(apply_adjoint(&a, &x), apply_adjoint(&d, &x));
    }
}
