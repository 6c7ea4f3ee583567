//! Small dense helpers on top of ndarray: norms, determinants, invertibility.
//!
//! Everything here is desk-scale (dimensions of a handful), so plain
//! Gaussian elimination with partial pivoting is all we need. LAPACK-backed
//! routines would pin the scalar type to f32/f64 and are not worth the
//! dependency at these sizes.

use ndarray::{Array1, Array2, ArrayView1};

use crate::scalar::Scalar;

/// Max-norm of a vector; 0 for the empty vector.
pub fn inf_norm<T: Scalar>(v: ArrayView1<'_, T>) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// Euclidean norm.
pub fn two_norm<T: Scalar>(v: ArrayView1<'_, T>) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt()
}

/// Largest absolute entry of a matrix; 0 for an empty matrix.
pub fn max_abs<T: Scalar>(m: &Array2<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// Standard basis vector e_i of length n.
pub fn basis_vector<T: Scalar>(n: usize, i: usize) -> Array1<T> {
    let mut v = Array1::zeros(n);
    v[i] = T::one();
    v
}

/// Determinant by LU with partial pivoting. The empty matrix has determinant 1.
pub fn determinant<T: Scalar>(m: &Array2<T>) -> T {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "determinant requires a square matrix");
    if n == 0 {
        return T::one();
    }
    let mut a = m.clone();
    let mut det = T::one();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                a[[i, col]]
                    .abs()
                    .partial_cmp(&a[[j, col]].abs())
                    .expect("non-finite entry in determinant")
            })
            .unwrap();
        if a[[pivot_row, col]] == T::zero() {
            return T::zero();
        }
        if pivot_row != col {
            for k in 0..n {
                let tmp = a[[col, k]];
                a[[col, k]] = a[[pivot_row, k]];
                a[[pivot_row, k]] = tmp;
            }
            det = -det;
        }
        let pivot = a[[col, col]];
        det = det * pivot;
        for row in col + 1..n {
            let factor = a[[row, col]] / pivot;
            for k in col..n {
                let sub = factor * a[[col, k]];
                a[[row, k]] = a[[row, k]] - sub;
            }
        }
    }
    det
}

/// Whether a square matrix is (numerically) invertible: every LU pivot clears
/// a scale-relative threshold.
pub fn is_invertible<T: Scalar>(m: &Array2<T>) -> bool {
    let n = m.nrows();
    if n != m.ncols() {
        return false;
    }
    if n == 0 {
        return true;
    }
    let scale = max_abs(m).max(T::one());
    let tol = scale * T::epsilon() * crate::scalar::real::<T>(n as f64 * 16.0);
    let mut a = m.clone();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                a[[i, col]]
                    .abs()
                    .partial_cmp(&a[[j, col]].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if !a[[pivot_row, col]].is_finite() || a[[pivot_row, col]].abs() <= tol {
            return false;
        }
        if pivot_row != col {
            for k in 0..n {
                let tmp = a[[col, k]];
                a[[col, k]] = a[[pivot_row, k]];
                a[[pivot_row, k]] = tmp;
            }
        }
        let pivot = a[[col, col]];
        for row in col + 1..n {
            let factor = a[[row, col]] / pivot;
            for k in col..n {
                let sub = factor * a[[col, k]];
                a[[row, k]] = a[[row, k]] - sub;
            }
        }
    }
    true
}
