//! Thin bridge to `faer` for the dense decompositions nalgebra is shaky on.

use faer::Mat;
use nalgebra::{Matrix3, Matrix4};
use num_complex::Complex64;

/// Eigenvalues of a complex 4×4 matrix, unordered.
pub(crate) fn eigenvalues4(m: &Matrix4<Complex64>) -> Vec<Complex64> {
    let a = Mat::<Complex64>::from_fn(4, 4, |i, j| m[(i, j)]);
    // faer's QR iteration converges for every finite input of this size
    a.eigenvalues().expect("eigenvalue iteration failed on a finite 4x4 matrix")
}

/// Eigenvalues of a real 3×3 matrix, unordered.
pub(crate) fn eigenvalues3(m: &Matrix3<f64>) -> Vec<Complex64> {
    let a = Mat::<f64>::from_fn(3, 3, |i, j| m[(i, j)]);
    a.eigenvalues().expect("eigenvalue iteration failed on a finite 3x3 matrix")
}
