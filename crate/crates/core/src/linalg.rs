//! Dense vector helpers plus the few matrix routines the generators need.
//!
//! Vectors are plain slices. The symmetric eigenvalue and least-squares
//! routines delegate to nalgebra in `f64`; they only run at problem
//! construction time.

use nalgebra::DMatrix;

use crate::Scalar;

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

pub fn dist_sq<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// `y += alpha * x`
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale<T: Scalar>(alpha: T, x: &mut [T]) {
    for v in x {
        *v *= alpha;
    }
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn is_finite<T: Scalar>(a: &[T]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Extreme eigenvalues of a symmetric positive semidefinite matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub min: f64,
    pub max: f64,
    /// Smallest eigenvalue above the numerical-rank cutoff (equals `min` at full rank).
    pub min_positive: f64,
    pub rank: usize,
}

/// Spectrum of `AᵀA / n` for a row-major `n x d` matrix.
pub fn normalized_gram_spectrum<T: Scalar>(rows: &[T], n: usize, d: usize) -> Spectrum {
    let a = to_dmatrix(rows, n, d);
    let mut gram = a.transpose() * &a;
    gram /= n as f64;
    symmetric_spectrum(gram)
}

/// `AᵀA / n` as a row-major `d x d` buffer.
pub fn normalized_gram<T: Scalar>(rows: &[T], n: usize, d: usize) -> Vec<T> {
    let a = to_dmatrix(rows, n, d);
    let gram = a.transpose() * &a;
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(T::of(gram[(i, j)] / n as f64));
        }
    }
    out
}

fn symmetric_spectrum(m: DMatrix<f64>) -> Spectrum {
    let eig = m.symmetric_eigen();
    let vals = eig.eigenvalues;
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let cutoff = max.abs() * 1e-10 * vals.len() as f64;
    let positive: Vec<f64> = vals.iter().cloned().filter(|&v| v > cutoff).collect();
    let min_positive = positive.iter().cloned().fold(f64::INFINITY, f64::min);
    Spectrum {
        min,
        max,
        min_positive: if positive.is_empty() { 0.0 } else { min_positive },
        rank: positive.len(),
    }
}

/// Minimum-norm solution of `min ‖Ax − y‖²`.
pub fn least_squares_solve<T: Scalar>(rows: &[T], y: &[T], n: usize, d: usize) -> Vec<T> {
    let a = to_dmatrix(rows, n, d);
    let b = DMatrix::from_iterator(n, 1, y.iter().map(|v| v.to_f64_lossy()));
    let svd = a.svd(true, true);
    let eps = svd.singular_values.max() * 1e-12 * n.max(d) as f64;
    let sol = svd
        .solve(&b, eps)
        .expect("u and v were requested from the SVD");
    sol.iter().map(|&v| T::of(v)).collect()
}

fn to_dmatrix<T: Scalar>(rows: &[T], n: usize, d: usize) -> DMatrix<f64> {
    assert_eq!(rows.len(), n * d, "row buffer does not match n x d");
    DMatrix::from_row_iterator(n, d, rows.iter().map(|v| v.to_f64_lossy()))
}
