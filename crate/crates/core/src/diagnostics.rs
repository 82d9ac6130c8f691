//! Dense spectra and numerical ranges of the iteration operators.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64;

use crate::dense;
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::krylov::vcycle_apply;
use crate::par;
use crate::sparse::SparseMatrix;

/// Largest operator formed densely.
pub const DENSE_LIMIT: usize = 1200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Operator {
    /// The transition matrix `A`.
    Transition,
    /// `I - τB`.
    Richardson { tau: f64 },
    /// Multigrid error propagator `I - C B`.
    MgPropagator,
    /// `C B`.
    Preconditioned,
}

impl std::str::FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "transition" => Ok(Self::Transition),
            "mg" | "propagator" => Ok(Self::MgPropagator),
            "cb" | "preconditioned" => Ok(Self::Preconditioned),
            _ => {
                if let Some(t) = s.strip_prefix("richardson") {
                    let tau = t.trim_start_matches([':', '=']);
                    let tau = if tau.is_empty() { 0.7 } else {
                        tau.parse().map_err(|_| Error::InvalidParameter(format!("bad tau in {s:?}")))?
                    };
                    Ok(Self::Richardson { tau })
                } else {
                    Err(Error::InvalidParameter(format!("unknown operator {s:?}")))
                }
            }
        }
    }
}

/// Dense `C B` with columns `C (B e_j)`.
pub fn dense_preconditioned(h: &Hierarchy) -> Result<Mat<f64>> {
    let b = &h.finest().b;
    let n = b.nrows();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
    }
    let bt = b.transpose();
    let cols = par::map_collect_coarse(n, |j| {
        let mut col = vec![0.0; n];
        let (rows, vals) = bt.row(j);
        for (&i, &v) in rows.iter().zip(vals) {
            col[i] = v;
        }
        vcycle_apply(h, &col, 0)
    });
    Ok(Mat::from_fn(n, n, |i, j| cols[j][i]))
}

/// Forms the chosen operator densely. `a` is the transition matrix; the
/// multigrid variants need the hierarchy built for `I - A`.
pub fn dense_operator(a: &SparseMatrix, h: Option<&Hierarchy>, op: Operator) -> Result<Mat<f64>> {
    let n = a.nrows();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
    }
    let need = || h.ok_or_else(|| Error::InvalidParameter("operator needs a hierarchy".into()));
    Ok(match op {
        Operator::Transition => dense::to_mat(a),
        Operator::Richardson { tau } => {
            let b = a.identity_minus()?;
            let m = SparseMatrix::identity(n).add_scaled(1.0, &b, -tau)?;
            dense::to_mat(&m)
        }
        Operator::Preconditioned => dense_preconditioned(need()?)?,
        Operator::MgPropagator => {
            let cb = dense_preconditioned(need()?)?;
            Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - cb[(i, j)])
        }
    })
}

/// All eigenvalues, sorted by decreasing modulus.
pub fn spectrum(m: &Mat<f64>) -> Result<Vec<Complex64>> {
    if m.nrows() > DENSE_LIMIT {
        return Err(Error::TooLarge {
            n: m.nrows(),
            limit: DENSE_LIMIT,
        });
    }
    let mut ev = dense::eigenvalues(m)?;
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.re.total_cmp(&b.re)).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

/// Boundary points of the field of values `{v* M v : ||v|| = 1}` at the
/// angles `2πj/m`: the top eigenvector of the Hermitian part of `e^{iθ} M`
/// gives the support point in direction `e^{-iθ}`.
pub fn field_of_values(m: &Mat<f64>, angles: usize) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
    }
    if angles == 0 {
        return Err(Error::InvalidParameter("need at least one angle".into()));
    }
    let pts = par::map_collect_coarse(angles, |j| -> Result<Complex64> {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / angles as f64;
        let rot = Complex64::from_polar(1.0, theta);
        let herm = Mat::<Complex64>::from_fn(n, n, |r, c| {
            (rot * m[(r, c)] + rot.conj() * m[(c, r)]) * 0.5
        });
        let (_, v) = dense::hermitian_max(&herm)?;
        let mut q = Complex64::new(0.0, 0.0);
        for r in 0..n {
            let mut mv = Complex64::new(0.0, 0.0);
            for c in 0..n {
                mv += v[c] * m[(r, c)];
            }
            q += v[r].conj() * mv;
        }
        Ok(q)
    });
    pts.into_iter().collect()
}

pub fn write_complex_csv<W: Write>(values: &[Complex64], w: &mut W) -> Result<()> {
    writeln!(w, "re,im")?;
    for z in values {
        writeln!(w, "{:e},{:e}", z.re, z.im)?;
    }
    Ok(())
}
