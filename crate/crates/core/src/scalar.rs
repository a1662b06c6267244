//! Scalar abstraction shared by every numerical module.
//!
//! All geometry, boundary-element and heating code is written against
//! [`Real`], so a whole pipeline can be instantiated in `f64` (the default,
//! see the aliases in the crate root) or in `f32` when memory for the dense
//! influence matrix is the limiting factor.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use faer::linalg::solvers::{PartialPivLu, SelfAdjointEigen, Solve};
use faer::{Mat, Side};
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Dense kernels that need a concrete element type (LU, symmetric eigen).
///
/// Kept separate from the arithmetic bounds so generic code never sees two
/// traits offering `zero()`/`abs()` at once.
pub trait DenseBackend: Sized + Copy + Send + Sync + 'static {
    type Lu: Send + Sync;

    /// Factor a column-major `n × n` matrix.
    fn lu_factor(col_major: &[Self], n: usize) -> Self::Lu;

    /// Overwrite `rhs` with the solution of `A x = rhs`.
    fn lu_solve(lu: &Self::Lu, rhs: &mut [Self]);

    /// Solve for `ncols` right-hand sides stored column-major in `rhs`.
    fn lu_solve_many(lu: &Self::Lu, rhs: &mut [Self], ncols: usize);

    /// Diagonal of the upper factor, used for a cheap conditioning estimate.
    fn lu_u_diagonal(lu: &Self::Lu) -> Vec<Self>;

    /// Eigen-decomposition of a symmetric 3×3 matrix (row-major).
    /// Eigenvalues ascending; eigenvectors are returned as columns.
    fn sym_eigen3(m: [[Self; 3]; 3]) -> ([Self; 3], [[Self; 3]; 3]);
}

macro_rules! impl_dense_backend {
    ($t:ty) => {
        impl DenseBackend for $t {
            type Lu = PartialPivLu<$t>;

            fn lu_factor(col_major: &[$t], n: usize) -> Self::Lu {
                let a = faer::MatRef::from_column_major_slice(col_major, n, n);
                PartialPivLu::new(a)
            }

            fn lu_solve(lu: &Self::Lu, rhs: &mut [$t]) {
                let n = rhs.len();
                let b = faer::MatMut::from_column_major_slice_mut(rhs, n, 1);
                lu.solve_in_place(b);
            }

            fn lu_solve_many(lu: &Self::Lu, rhs: &mut [$t], ncols: usize) {
                let n = rhs.len() / ncols.max(1);
                let b = faer::MatMut::from_column_major_slice_mut(rhs, n, ncols);
                lu.solve_in_place(b);
            }

            fn lu_u_diagonal(lu: &Self::Lu) -> Vec<$t> {
                let u = lu.U();
                (0..u.nrows()).map(|i| u[(i, i)]).collect()
            }

            fn sym_eigen3(m: [[$t; 3]; 3]) -> ([$t; 3], [[$t; 3]; 3]) {
                let a = Mat::<$t>::from_fn(3, 3, |i, j| m[i][j]);
                let eig = SelfAdjointEigen::new(a.as_ref(), Side::Lower)
                    .expect("3x3 symmetric eigen-decomposition");
                let s = eig.S();
                let u = eig.U();
                let mut values = [0.0; 3];
                let mut vectors = [[0.0; 3]; 3];
                for k in 0..3 {
                    values[k] = s[k];
                    for i in 0..3 {
                        vectors[i][k] = u[(i, k)];
                    }
                }
                (values, vectors)
            }
        }
    };
}

impl_dense_backend!(f32);
impl_dense_backend!(f64);

/// Floating-point scalar usable throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + DenseBackend
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal fits the scalar type")
    }

    /// Lossy conversion to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sum with a fixed pairwise tree so results never depend on scheduling.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        let mut acc = T::zero();
        for &v in values {
            acc = acc + v;
        }
        acc
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }

    #[test]
    fn lu_round_trip() {
        // column-major [[4, 1], [2, 3]]
        let a = [4.0_f64, 2.0, 1.0, 3.0];
        let lu = f64::lu_factor(&a, 2);
        let mut b = [1.0, 2.0];
        f64::lu_solve(&lu, &mut b);
        assert!((4.0 * b[0] + 1.0 * b[1] - 1.0).abs() < 1e-14);
        assert!((2.0 * b[0] + 3.0 * b[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn eigen3_diagonal() {
        let (vals, vecs) = f64::sym_eigen3([[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
        assert_eq!(vals, [1.0, 2.0, 3.0]);
        assert!((vecs[1][0].abs() - 1.0).abs() < 1e-12);
    }
}
