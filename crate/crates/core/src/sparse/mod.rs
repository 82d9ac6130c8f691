//! Compressed sparse row storage and the handful of kernels the solver needs.

pub mod graph;
pub mod mtx;

use crate::coarsening::CfPartition;
use crate::error::{Error, Result};
use crate::par;

pub use graph::{neighborhood, strong_components};

/// Relative drop tolerance applied to sparse products.
pub const DEFAULT_DROP_TOL: f64 = 1e-15;

/// Real sparse matrix in row-major compressed layout with sorted, unique
/// column indices per row and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

/// The four blocks of a matrix split by a C/F partition, F first.
#[derive(Debug, Clone)]
pub struct Blocks {
    pub ff: SparseMatrix,
    pub fc: SparseMatrix,
    pub cf: SparseMatrix,
    pub cc: SparseMatrix,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros (after summation) are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    indices.push(c);
                    data.push(sum);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        })
    }

    /// Assembles a matrix from already-sorted rows. Zeros are dropped.
    pub(crate) fn from_sorted_rows(
        nrows: usize,
        ncols: usize,
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Self {
        debug_assert_eq!(rows.len(), nrows);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut data = Vec::with_capacity(nnz);
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                debug_assert!(c < ncols);
                if v != 0.0 {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Dense row-major input, mostly for tests and tiny operators.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let rows = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self::from_sorted_rows(nrows, ncols, rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[range.clone()], &self.data[range])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Iterates over all stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// `y = M x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_cols("matvec", x.len())?;
        let mut y = vec![0.0; self.nrows];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `y = M x` into a caller buffer. Panics on dimension mismatch.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec: x has wrong length");
        assert_eq!(y.len(), self.nrows, "matvec: y has wrong length");
        par::fill(y, |i| self.row_dot(i, x));
    }

    /// Single-threaded product, regardless of the `parallel` feature.
    pub fn apply_into_serial(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec: x has wrong length");
        assert_eq!(y.len(), self.nrows, "matvec: y has wrong length");
        par::fill_serial(y, |i| self.row_dot(i, x));
    }

    /// Row-parallel product.
    #[cfg(feature = "parallel")]
    pub fn apply_into_par(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec: x has wrong length");
        assert_eq!(y.len(), self.nrows, "matvec: y has wrong length");
        par::fill_par(y, |i| self.row_dot(i, x));
    }

    /// Allocating form of [`apply_into`](Self::apply_into).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.apply_into(x, &mut y);
        y
    }

    #[inline]
    pub(crate) fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let k = next[j];
                indices[k] = i;
                data[k] = v;
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            data,
        }
    }

    /// Sparse product with the default relative drop tolerance.
    pub fn matmul(&self, rhs: &SparseMatrix) -> Result<SparseMatrix> {
        self.matmul_with_drop(rhs, DEFAULT_DROP_TOL)
    }

    /// Sparse product `self * rhs`; entries with magnitude below
    /// `drop_tol * max|entry|` are removed.
    pub fn matmul_with_drop(&self, rhs: &SparseMatrix, drop_tol: f64) -> Result<SparseMatrix> {
        if self.ncols != rhs.nrows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                expected: self.ncols,
                got: rhs.nrows,
            });
        }
        let ncols = rhs.ncols;
        let rows: Vec<Vec<(usize, f64)>> = par::map_collect(self.nrows, |i| {
            let (acols, avals) = self.row(i);
            let mut acc: Vec<(usize, f64)> = Vec::new();
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = rhs.row(k);
                acc.extend(bcols.iter().zip(bvals).map(|(&j, &b)| (j, a * b)));
            }
            acc.sort_by_key(|&(j, _)| j);
            let mut out: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
            for (j, v) in acc {
                match out.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => out.push((j, v)),
                }
            }
            out
        });
        let maxabs = rows
            .iter()
            .flatten()
            .fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
        let cut = drop_tol * maxabs;
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().filter(|&(_, v)| v.abs() > cut).collect())
            .collect();
        Ok(SparseMatrix::from_sorted_rows(self.nrows, ncols, rows))
    }

    /// `alpha * self + beta * rhs`.
    pub fn add_scaled(&self, alpha: f64, rhs: &SparseMatrix, beta: f64) -> Result<SparseMatrix> {
        if self.nrows != rhs.nrows || self.ncols != rhs.ncols {
            return Err(Error::DimensionMismatch {
                op: "add",
                expected: self.nrows * self.ncols,
                got: rhs.nrows * rhs.ncols,
            });
        }
        let rows = (0..self.nrows)
            .map(|i| {
                let (ac, av) = self.row(i);
                let (bc, bv) = rhs.row(i);
                let (mut p, mut q) = (0, 0);
                let mut out = Vec::with_capacity(ac.len() + bc.len());
                while p < ac.len() || q < bc.len() {
                    let ja = ac.get(p).copied().unwrap_or(usize::MAX);
                    let jb = bc.get(q).copied().unwrap_or(usize::MAX);
                    if ja == jb {
                        out.push((ja, alpha * av[p] + beta * bv[q]));
                        p += 1;
                        q += 1;
                    } else if ja < jb {
                        out.push((ja, alpha * av[p]));
                        p += 1;
                    } else {
                        out.push((jb, beta * bv[q]));
                        q += 1;
                    }
                }
                out
            })
            .collect();
        Ok(SparseMatrix::from_sorted_rows(self.nrows, self.ncols, rows))
    }

    /// `I - self`, used to form the singular M-matrix from a transition matrix.
    pub fn identity_minus(&self) -> Result<SparseMatrix> {
        SparseMatrix::identity(self.nrows).add_scaled(1.0, self, -1.0)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.ncols];
        for (_, j, v) in self.triplets() {
            s[j] += v;
        }
        s
    }

    /// Rows and columns picked out by the given index lists, in that order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut colmap = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            colmap[c] = k;
        }
        let out = rows
            .iter()
            .map(|&i| {
                let (rc, rv) = self.row(i);
                let mut r: Vec<(usize, f64)> = rc
                    .iter()
                    .zip(rv)
                    .filter(|(&j, _)| colmap[j] != usize::MAX)
                    .map(|(&j, &v)| (colmap[j], v))
                    .collect();
                r.sort_by_key(|&(j, _)| j);
                r
            })
            .collect();
        SparseMatrix::from_sorted_rows(rows.len(), cols.len(), out)
    }

    /// Splits a square matrix into `(ff, fc, cf, cc)` blocks.
    pub fn extract_blocks(&self, part: &CfPartition) -> Result<Blocks> {
        part.validate()?;
        if part.n() != self.nrows || !self.is_square() {
            return Err(Error::DimensionMismatch {
                op: "extract_blocks",
                expected: self.nrows,
                got: part.n(),
            });
        }
        let (f, c) = (part.fset(), part.cset());
        Ok(Blocks {
            ff: self.submatrix(f, f),
            fc: self.submatrix(f, c),
            cf: self.submatrix(c, f),
            cc: self.submatrix(c, c),
        })
    }

    /// Multiplies every stored value by `s`.
    pub fn scaled(&self, s: f64) -> SparseMatrix {
        if s == 0.0 {
            return SparseMatrix::zeros(self.nrows, self.ncols);
        }
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Largest stored magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Dense copy in row-major order.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    fn check_cols(&self, op: &'static str, got: usize) -> Result<()> {
        if got != self.ncols {
            return Err(Error::DimensionMismatch {
                op,
                expected: self.ncols,
                got,
            });
        }
        Ok(())
    }
}
