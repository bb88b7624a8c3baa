//! Linear algebra kernels: banded LU, tridiagonal and banded Hermitian
//! eigenvalue tools, dense helpers on top of nalgebra.

mod banded;
mod eigen;

pub use banded::{BandedLu, BandedMatrix};
pub use eigen::{
    banded_sturm_count, dense_hermitian_eigen, kth_eigenvalue, tridiag_eigenvalues,
};

use crate::numeric::LogDet;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Log-determinant of a dense square matrix, through the banded LU with full bandwidth.
pub fn dense_log_det(m: &DMatrix<Complex64>) -> LogDet {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    if n == 0 {
        return LogDet::ONE;
    }
    let k = n.saturating_sub(1);
    let mut b = BandedMatrix::zeros(n, k, k);
    for i in 0..n {
        for j in 0..n {
            b.set(i, j, m[(i, j)]);
        }
    }
    b.lu().log_det()
}

/// Dense determinant as a complex number.
pub fn dense_det(m: &DMatrix<Complex64>) -> Complex64 {
    dense_log_det(m).to_complex()
}

/// Operator 1-norm of a dense matrix.
pub fn norm1(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn frob(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectral norm via the largest singular value.
pub fn norm2(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 2 && m.ncols() == 2 {
        return norm2_2x2([m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]);
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Spectral norm of a 2×2 complex matrix [[a,b],[c,d]] in closed form.
pub fn norm2_2x2(m: [Complex64; 4]) -> f64 {
    let f = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let det = (m[0] * m[3] - m[1] * m[2]).norm();
    let disc = (f * f - 4.0 * det * det).max(0.0).sqrt();
    ((f + disc) / 2.0).sqrt()
}

/// Matrix of all m×m minors (the m-th exterior power), rows and columns
/// indexed by m-subsets in lexicographic order.
pub fn exterior_power(m: &DMatrix<Complex64>, k: usize) -> DMatrix<Complex64> {
    let rows = combinations(m.nrows(), k);
    let cols = combinations(m.ncols(), k);
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    let mut sub = DMatrix::zeros(k, k);
    for (a, r) in rows.iter().enumerate() {
        for (b, c) in cols.iter().enumerate() {
            for (x, &ri) in r.iter().enumerate() {
                for (y, &cj) in c.iter().enumerate() {
                    sub[(x, y)] = m[(ri, cj)];
                }
            }
            out[(a, b)] = small_det(&sub);
        }
    }
    out
}

/// Determinant of a small dense matrix (no log form).
pub fn small_det(m: &DMatrix<Complex64>) -> Complex64 {
    match m.nrows() {
        0 => Complex64::new(1.0, 0.0),
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => dense_det(m),
    }
}

/// All k-subsets of 0..n in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
