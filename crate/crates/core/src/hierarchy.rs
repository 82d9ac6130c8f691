//! The multilevel operator stack: Petrov-Galerkin coarse operators built
//! with an averaging restriction.

use std::fmt::Write as _;
use std::io::Write;

use faer::Mat;

use crate::coarsening::CfPartition;
use crate::dense;
use crate::error::{Error, Result};
use crate::smoothing::{Jacobi, SmootherParams};
use crate::sparse::SparseMatrix;

/// Singular values below this fraction of the largest are dropped in the
/// coarsest-level pseudoinverse.
pub const PINV_REL_TOL: f64 = 1e-12;

/// Transfer operators between level `l` and `l + 1`, stored on level `l`.
#[derive(Debug, Clone)]
pub struct Transfer {
    /// Interpolation, `n_l × n_{l+1}`.
    pub p: SparseMatrix,
    /// Averaging restriction, `n_{l+1} × n_l`.
    pub q: SparseMatrix,
    pub part: CfPartition,
}

#[derive(Debug, Clone)]
pub struct Level {
    pub b: SparseMatrix,
    /// Mass matrix; the identity on the finest level.
    pub t: SparseMatrix,
    pub transfer: Option<Transfer>,
    pub smoother: Option<Jacobi>,
    /// Side length when the level is a full-coarsened lattice.
    pub grid_side: Option<usize>,
}

impl Level {
    pub fn new(b: SparseMatrix, t: SparseMatrix) -> Self {
        Self {
            b,
            t,
            transfer: None,
            smoother: None,
            grid_side: None,
        }
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub n: usize,
    pub nnz: usize,
    pub grid_side: Option<usize>,
}

/// Finest level first. Every level but the last carries its transfer and
/// smoother; the last carries a dense pseudoinverse of its operator.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    levels: Vec<Level>,
    coarse_pinv: Mat<f64>,
}

impl Hierarchy {
    pub fn new(mut levels: Vec<Level>, smoother: SmootherParams) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("hierarchy needs a level".into()));
        }
        let last = levels.len() - 1;
        for l in 0..levels.len() {
            let n = levels[l].n();
            if levels[l].t.nrows() != n || !levels[l].b.is_square() {
                return Err(Error::DimensionMismatch {
                    op: "hierarchy level",
                    expected: n,
                    got: levels[l].t.nrows(),
                });
            }
            if l < last {
                let nc = levels[l + 1].n();
                if nc >= n {
                    return Err(Error::InvalidParameter(format!(
                        "level {} has {nc} unknowns, not fewer than {n}",
                        l + 1
                    )));
                }
                let tr = levels[l].transfer.as_ref().ok_or_else(|| {
                    Error::InvalidParameter(format!("level {l} lacks a transfer"))
                })?;
                if tr.p.nrows() != n || tr.p.ncols() != nc || tr.q.nrows() != nc || tr.q.ncols() != n {
                    return Err(Error::DimensionMismatch {
                        op: "hierarchy transfer",
                        expected: nc,
                        got: tr.p.ncols(),
                    });
                }
                if levels[l].smoother.is_none() {
                    levels[l].smoother = Some(Jacobi::new(&levels[l].b, smoother)?);
                }
            } else {
                levels[l].transfer = None;
            }
        }
        let coarse_pinv = dense::pseudoinverse(&dense::to_mat(&levels[last].b), PINV_REL_TOL)?;
        Ok(Self {
            levels,
            coarse_pinv,
        })
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &Level {
        &self.levels[0]
    }

    pub fn coarsest(&self) -> &Level {
        self.levels.last().unwrap()
    }

    pub fn coarse_pinv(&self) -> &Mat<f64> {
        &self.coarse_pinv
    }

    pub fn stats(&self) -> Vec<LevelStats> {
        self.levels
            .iter()
            .enumerate()
            .map(|(level, l)| LevelStats {
                level,
                n: l.n(),
                nnz: l.b.nnz(),
                grid_side: l.grid_side,
            })
            .collect()
    }

    /// `max_j |(B_l^t 1)_j|` per level.
    pub fn column_sum_defects(&self) -> Vec<f64> {
        self.levels
            .iter()
            .map(|l| l.b.column_sums().into_iter().fold(0.0_f64, |m, s| m.max(s.abs())))
            .collect()
    }

    pub fn stats_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>5} {:>9} {:>10} {:>6}", "level", "n", "nnz", "grid");
        for st in self.stats() {
            let g = st.grid_side.map_or("-".to_string(), |g| format!("{g}x{g}"));
            let _ = writeln!(s, "{:>5} {:>9} {:>10} {:>6}", st.level, st.n, st.nnz, g);
        }
        let _ = writeln!(s, "operator complexity {:.3}", operator_complexity(self));
        s
    }

    pub fn write_stats_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "level,n,nnz,grid_side")?;
        for st in self.stats() {
            let g = st.grid_side.map_or(String::new(), |g| g.to_string());
            writeln!(w, "{},{},{},{}", st.level, st.n, st.nnz, g)?;
        }
        Ok(())
    }
}

/// Restriction with the sparsity of `P^t` whose column `i` averages over the
/// interpolatory set of fine point `i`, so that `1^t Q = 1^t`.
pub fn build_averaging_restriction(p: &SparseMatrix) -> Result<SparseMatrix> {
    let mut used = vec![false; p.ncols()];
    let mut trip = Vec::with_capacity(p.nnz());
    for i in 0..p.nrows() {
        let (cols, _) = p.row(i);
        if cols.is_empty() {
            return Err(Error::EmptyInterpolationRow { row: i });
        }
        let w = 1.0 / cols.len() as f64;
        for &j in cols {
            used[j] = true;
            trip.push((j, i, w));
        }
    }
    if let Some(col) = used.iter().position(|u| !u) {
        return Err(Error::EmptyInterpolationColumn { col });
    }
    SparseMatrix::from_triplets(p.ncols(), p.nrows(), &trip)
}

/// `(Q B P, Q T P)`.
pub fn coarsen_level(
    b: &SparseMatrix,
    t: &SparseMatrix,
    p: &SparseMatrix,
    q: &SparseMatrix,
) -> Result<(SparseMatrix, SparseMatrix)> {
    let bc = q.matmul(&b.matmul(p)?)?;
    let tc = q.matmul(&t.matmul(p)?)?;
    Ok((bc, tc))
}

/// Values of `x` at the coarse points, in coarse order.
pub fn injection_restrict(part: &CfPartition, x: &[f64]) -> Vec<f64> {
    part.cset().iter().map(|&c| x[c]).collect()
}

/// `Σ_l nnz(B_l) / nnz(B_0)`.
pub fn operator_complexity(h: &Hierarchy) -> f64 {
    let total: usize = h.levels.iter().map(|l| l.b.nnz()).sum();
    total as f64 / h.levels[0].b.nnz() as f64
}
