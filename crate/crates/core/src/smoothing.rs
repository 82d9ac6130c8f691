//! Damped Jacobi relaxation: full, F-only (compatible relaxation) and
//! shifted for eigenvector updates.

use crate::coarsening::CfPartition;
use crate::error::{Error, Result};
use crate::par;
use crate::sparse::SparseMatrix;

/// Diagonal entries at or below this magnitude make Jacobi undefined.
pub const MIN_DIAG: f64 = 1e-14;
/// Shifted rows with `|b_ii - lambda t_ii|` at or below this are skipped.
pub const MIN_SHIFTED_DIAG: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherParams {
    pub omega: f64,
    pub sweeps: usize,
}

impl Default for SmootherParams {
    fn default() -> Self {
        Self {
            omega: 0.7,
            sweeps: 2,
        }
    }
}

impl SmootherParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "omega must lie in (0, 1], got {}",
                self.omega
            )));
        }
        Ok(())
    }
}

/// Precomputed inverse diagonal for repeated Jacobi sweeps on one matrix.
#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
    params: SmootherParams,
}

impl Jacobi {
    pub fn new(b: &SparseMatrix, params: SmootherParams) -> Result<Self> {
        params.validate()?;
        let inv_diag = b
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d.abs() <= MIN_DIAG {
                    Err(Error::ZeroDiagonal { row: i, value: d })
                } else {
                    Ok(1.0 / d)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { inv_diag, params })
    }

    pub fn params(&self) -> SmootherParams {
        self.params
    }

    /// `params.sweeps` sweeps of `x <- x + omega D^-1 (rhs - B x)`. A `None`
    /// right-hand side means the homogeneous system.
    pub fn relax(&self, b: &SparseMatrix, x: &mut Vec<f64>, rhs: Option<&[f64]>) {
        let mut next = vec![0.0; x.len()];
        for _ in 0..self.params.sweeps {
            self.sweep_into(b, x, rhs, &mut next);
            std::mem::swap(x, &mut next);
        }
    }

    fn sweep_into(&self, b: &SparseMatrix, x: &[f64], rhs: Option<&[f64]>, out: &mut [f64]) {
        let w = self.params.omega;
        let inv = &self.inv_diag;
        match rhs {
            Some(f) => par::fill(out, |i| x[i] + w * inv[i] * (f[i] - b.row_dot(i, x))),
            None => par::fill(out, |i| x[i] - w * inv[i] * b.row_dot(i, x)),
        }
    }

    /// One sweep without the `parallel` dispatch, for benchmarking.
    pub fn sweep_serial(&self, b: &SparseMatrix, x: &[f64], out: &mut [f64]) {
        let w = self.params.omega;
        let inv = &self.inv_diag;
        par::fill_serial(out, |i| x[i] - w * inv[i] * b.row_dot(i, x));
    }

    #[cfg(feature = "parallel")]
    pub fn sweep_par(&self, b: &SparseMatrix, x: &[f64], out: &mut [f64]) {
        let w = self.params.omega;
        let inv = &self.inv_diag;
        par::fill_par(out, |i| x[i] - w * inv[i] * b.row_dot(i, x));
    }
}

/// Damped Jacobi on `B x = rhs`, `p.sweeps` times.
pub fn jacobi_sweep(
    b: &SparseMatrix,
    x: &[f64],
    rhs: &[f64],
    p: SmootherParams,
) -> Result<Vec<f64>> {
    check_len("jacobi_sweep", b, x.len())?;
    check_len("jacobi_sweep", b, rhs.len())?;
    let j = Jacobi::new(b, p)?;
    let mut out = x.to_vec();
    j.relax(b, &mut out, Some(rhs));
    Ok(out)
}

/// F-relaxation on the homogeneous system: `u_f <- (I - omega D_ff^-1 B_ff) u_f`
/// repeated `p.sweeps` times; C entries are left untouched.
pub fn f_relax_sweep(
    b: &SparseMatrix,
    part: &CfPartition,
    u: &[f64],
    p: SmootherParams,
) -> Result<Vec<f64>> {
    check_len("f_relax_sweep", b, u.len())?;
    let fset = part.fset();
    let bff = b.submatrix(fset, fset);
    let jac = Jacobi::new(&bff, p).map_err(|e| match e {
        Error::ZeroDiagonal { row, value } => Error::ZeroDiagonal {
            row: fset[row],
            value,
        },
        other => other,
    })?;
    let mut uf: Vec<f64> = fset.iter().map(|&i| u[i]).collect();
    jac.relax(&bff, &mut uf, None);
    let mut out = u.to_vec();
    for (k, &i) in fset.iter().enumerate() {
        out[i] = uf[k];
    }
    Ok(out)
}

/// Damped Jacobi on the homogeneous shifted system `(B - lambda T) x = 0`.
/// Rows whose shifted diagonal is (near) zero are left unchanged; their
/// count is returned alongside the iterate.
pub fn shifted_relax(
    b: &SparseMatrix,
    t: &SparseMatrix,
    lambda: f64,
    x: &[f64],
    p: SmootherParams,
) -> Result<(Vec<f64>, usize)> {
    p.validate()?;
    check_len("shifted_relax", b, x.len())?;
    check_len("shifted_relax", t, x.len())?;
    let bd = b.diagonal();
    let td = t.diagonal();
    let inv: Vec<f64> = bd
        .iter()
        .zip(&td)
        .map(|(&bi, &ti)| {
            let d = bi - lambda * ti;
            if d.abs() <= MIN_SHIFTED_DIAG {
                0.0
            } else {
                1.0 / d
            }
        })
        .collect();
    let skipped = inv.iter().filter(|&&v| v == 0.0).count();
    let w = p.omega;
    let mut cur = x.to_vec();
    let mut next = vec![0.0; x.len()];
    for _ in 0..p.sweeps {
        par::fill(&mut next, |i| {
            if inv[i] == 0.0 {
                cur[i]
            } else {
                let r = b.row_dot(i, &cur) - lambda * t.row_dot(i, &cur);
                cur[i] - w * inv[i] * r
            }
        });
        std::mem::swap(&mut cur, &mut next);
    }
    Ok((cur, skipped))
}

fn check_len(op: &'static str, m: &SparseMatrix, got: usize) -> Result<()> {
    if m.ncols() != got || m.nrows() != got {
        return Err(Error::DimensionMismatch {
            op,
            expected: m.ncols(),
            got,
        });
    }
    Ok(())
}
