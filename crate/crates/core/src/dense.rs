//! Dense linear algebra used on the coarsest level and in diagnostics.
//! Everything here delegates to `faer`.

pub use faer::Mat;
use faer::Side;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub fn to_mat(m: &SparseMatrix) -> Mat<f64> {
    let mut d = Mat::<f64>::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplets() {
        d[(i, j)] = v;
    }
    d
}

pub fn from_rows(rows: &[Vec<f64>]) -> Mat<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

/// Eigenvalues and (unit-norm) eigenvectors of a general real matrix.
pub struct DenseEigen {
    pub values: Vec<Complex64>,
    /// One column per eigenvalue.
    pub vectors: Vec<Vec<Complex64>>,
}

pub fn eigen(a: &Mat<f64>) -> Result<DenseEigen> {
    let evd = a.eigen().map_err(|_| Error::EigenSolve)?;
    let n = a.nrows();
    let s = evd.S();
    let u = evd.U();
    let values = (0..n).map(|k| s.column_vector()[k]).collect();
    let vectors = (0..n)
        .map(|k| {
            let col: Vec<Complex64> = (0..n).map(|i| u[(i, k)]).collect();
            let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                col.into_iter().map(|z| z / norm).collect()
            } else {
                col
            }
        })
        .collect();
    Ok(DenseEigen { values, vectors })
}

pub fn eigenvalues(a: &Mat<f64>) -> Result<Vec<Complex64>> {
    a.eigenvalues().map_err(|_| Error::EigenSolve)
}

/// Largest eigenvalue and its eigenvector of a complex Hermitian matrix.
pub fn hermitian_max(h: &Mat<Complex64>) -> Result<(f64, Vec<Complex64>)> {
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::EigenSolve)?;
    let n = h.nrows();
    let last = n - 1;
    let val = evd.S().column_vector()[last].re;
    let u = evd.U();
    Ok((val, (0..n).map(|i| u[(i, last)]).collect()))
}

/// Singular values, largest first.
pub fn singular_values(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.singular_values().map_err(|_| Error::EigenSolve)
}

/// Moore-Penrose inverse with singular values below `rel_tol * s_max`
/// treated as zero.
pub fn pseudoinverse(a: &Mat<f64>, rel_tol: f64) -> Result<Mat<f64>> {
    let svd = a.svd().map_err(|_| Error::EigenSolve)?;
    let s = svd.S().column_vector();
    let (u, v) = (svd.U(), svd.V());
    let k = s.nrows();
    let smax = if k > 0 { s[0] } else { 0.0 };
    let cut = rel_tol * smax;
    let mut pinv = Mat::<f64>::zeros(a.ncols(), a.nrows());
    for r in 0..k {
        if s[r] <= cut || s[r] == 0.0 {
            continue;
        }
        let inv = 1.0 / s[r];
        for i in 0..a.ncols() {
            let vi = v[(i, r)] * inv;
            if vi == 0.0 {
                continue;
            }
            for j in 0..a.nrows() {
                pinv[(i, j)] += vi * u[(j, r)];
            }
        }
    }
    Ok(pinv)
}

/// Inverse through partial-pivot LU together with a 1-norm condition
/// estimate `||A||_1 ||A^-1||_1`.
pub fn inverse_with_cond(a: &Mat<f64>) -> (Mat<f64>, f64) {
    use faer::linalg::solvers::DenseSolveCore;
    let n = a.nrows();
    let lu = a.partial_piv_lu();
    let inv = lu.inverse();
    let finite = (0..n).all(|j| (0..n).all(|i| inv[(i, j)].is_finite()));
    let cond = norm1(a) * norm1(&inv);
    let cond = if finite && cond.is_finite() { cond } else { f64::INFINITY };
    debug_assert_eq!(inv.nrows(), n);
    (inv, cond)
}

fn norm1(a: &Mat<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

pub fn matmul(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    a * b
}

/// Solves `A x = b` with partial-pivot LU.
pub fn solve(a: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    use faer::linalg::solvers::Solve;
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = a.partial_piv_lu().solve(&rhs);
    (0..b.len()).map(|i| x[(i, 0)]).collect()
}
