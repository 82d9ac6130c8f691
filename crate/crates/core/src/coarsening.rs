//! Choosing the coarse variable set: geometric full coarsening for lattice
//! problems, compatible relaxation for everything else.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::smoothing::{Jacobi, SmootherParams};
use crate::sparse::SparseMatrix;

/// Splitting of `0..n` into coarse (C) and fine (F) indices, both sorted.
/// The coarse ordering of level `l+1` is the order of `cset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfPartition {
    n: usize,
    cset: Vec<usize>,
    fset: Vec<usize>,
    coarse_index: Vec<Option<usize>>,
}

impl CfPartition {
    /// Partition with the given coarse set; F is the complement.
    pub fn from_cset(n: usize, mut cset: Vec<usize>) -> Result<Self> {
        cset.sort_unstable();
        let len = cset.len();
        cset.dedup();
        if cset.len() != len {
            return Err(Error::InvalidPartition {
                n,
                reason: "duplicate coarse index".into(),
            });
        }
        if let Some(&bad) = cset.iter().find(|&&c| c >= n) {
            return Err(Error::InvalidPartition {
                n,
                reason: format!("coarse index {bad} out of range"),
            });
        }
        let mut coarse_index = vec![None; n];
        for (k, &c) in cset.iter().enumerate() {
            coarse_index[c] = Some(k);
        }
        let fset = (0..n).filter(|&i| coarse_index[i].is_none()).collect();
        Ok(Self {
            n,
            cset,
            fset,
            coarse_index,
        })
    }

    /// Partition from explicit C and F lists; they must be a disjoint cover.
    pub fn from_sets(n: usize, cset: Vec<usize>, fset: Vec<usize>) -> Result<Self> {
        let part = Self::from_cset(n, cset)?;
        let mut f = fset;
        f.sort_unstable();
        if f != part.fset {
            return Err(Error::InvalidPartition {
                n,
                reason: "F is not the complement of C".into(),
            });
        }
        Ok(part)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.n];
        for &i in self.cset.iter().chain(&self.fset) {
            if i >= self.n || seen[i] {
                return Err(Error::InvalidPartition {
                    n: self.n,
                    reason: format!("index {i} repeated or out of range"),
                });
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidPartition {
                n: self.n,
                reason: "indices missing".into(),
            });
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cset(&self) -> &[usize] {
        &self.cset
    }

    pub fn fset(&self) -> &[usize] {
        &self.fset
    }

    pub fn n_coarse(&self) -> usize {
        self.cset.len()
    }

    pub fn is_coarse(&self, i: usize) -> bool {
        self.coarse_index[i].is_some()
    }

    /// Position of fine index `i` in the coarse ordering.
    pub fn coarse_index(&self, i: usize) -> Option<usize> {
        self.coarse_index[i]
    }

    /// Boolean mask of C membership.
    pub fn coarse_mask(&self) -> Vec<bool> {
        self.coarse_index.iter().map(Option::is_some).collect()
    }
}

/// Every other lattice point in both directions of an `n x n` grid
/// (row-major, index `x * n + y`).
pub fn full_coarsen_grid(n: usize) -> Result<CfPartition> {
    if n < 5 || n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "full coarsening needs an odd grid side >= 5, got {n}"
        )));
    }
    let cset = (0..n)
        .step_by(2)
        .flat_map(|x| (0..n).step_by(2).map(move |y| x * n + y))
        .collect();
    CfPartition::from_cset(n * n, cset)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrParams {
    /// Target convergence factor of F-relaxation.
    pub theta: f64,
    /// F-relaxation sweeps per measurement.
    pub nu: usize,
    /// Range of the random initial guess.
    pub init_range: (f64, f64),
    pub omega: f64,
}

impl Default for CrParams {
    fn default() -> Self {
        Self {
            theta: 0.85,
            nu: 8,
            init_range: (1.0, 2.0),
            omega: 0.7,
        }
    }
}

impl CrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "CR theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        if self.nu == 0 {
            return Err(Error::InvalidParameter("CR needs nu >= 1".into()));
        }
        if !(self.init_range.0 < self.init_range.1) {
            return Err(Error::InvalidParameter("empty CR init range".into()));
        }
        Ok(())
    }
}

/// Result of one compatible-relaxation measurement.
#[derive(Debug, Clone)]
pub struct CrMeasure {
    /// `(||u^nu|| / ||u^0||)^(1/nu)`.
    pub rho: f64,
    /// `|u_i^nu| / |u_i^(nu-1)|` for each fine point, in `fset` order.
    /// Points whose previous iterate is below `1e-14` report 0.
    pub ratios: Vec<f64>,
}

/// Estimates the F-relaxation convergence factor from a random start.
pub fn cr_quality(
    b: &SparseMatrix,
    part: &CfPartition,
    p: &CrParams,
    seed: u64,
) -> Result<CrMeasure> {
    p.validate()?;
    let f = part.fset();
    if f.is_empty() {
        return Ok(CrMeasure {
            rho: 0.0,
            ratios: Vec::new(),
        });
    }
    let bff = b.submatrix(f, f);
    let jac = Jacobi::new(
        &bff,
        SmootherParams {
            omega: p.omega,
            sweeps: 1,
        },
    )
    .map_err(|e| match e {
        Error::ZeroDiagonal { row, value } => Error::ZeroDiagonal { row: f[row], value },
        other => other,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = p.init_range;
    let u0: Vec<f64> = (0..f.len()).map(|_| rng.random_range(lo..hi)).collect();
    let mut prev = u0.clone();
    let mut cur = u0.clone();
    for _ in 0..p.nu {
        prev.clone_from(&cur);
        jac.relax(&bff, &mut cur, None);
    }
    let rho = (norm(&cur) / norm(&u0)).powf(1.0 / p.nu as f64);
    let ratios = cur
        .iter()
        .zip(&prev)
        .map(|(&c, &q)| if q.abs() < 1e-14 { 0.0 } else { c.abs() / q.abs() })
        .collect();
    Ok(CrMeasure { rho, ratios })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Symmetrised off-diagonal adjacency lists of G(M).
fn symmetric_adjacency(g: &SparseMatrix) -> Vec<Vec<usize>> {
    let n = g.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in g.triplets() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Maximal independent subset of `candidates` in the symmetrised graph of
/// `g`, chosen greedily by descending degree within the candidate set
/// (ties to the lowest index). Returned sorted.
pub fn greedy_independent_set(g: &SparseMatrix, candidates: &[usize]) -> Vec<usize> {
    let adj = symmetric_adjacency(g);
    independent_set_with(&adj, candidates)
}

fn independent_set_with(adj: &[Vec<usize>], candidates: &[usize]) -> Vec<usize> {
    let n = adj.len();
    let mut is_cand = vec![false; n];
    for &c in candidates {
        is_cand[c] = true;
    }
    let mut order: Vec<(usize, usize)> = candidates
        .iter()
        .map(|&c| (adj[c].iter().filter(|&&j| is_cand[j]).count(), c))
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    order.dedup_by_key(|o| o.1);
    let mut blocked = vec![false; n];
    let mut chosen = Vec::new();
    for (_, v) in order {
        if blocked[v] {
            continue;
        }
        chosen.push(v);
        blocked[v] = true;
        for &w in &adj[v] {
            blocked[w] = true;
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Outcome of compatible-relaxation coarsening.
#[derive(Debug, Clone)]
pub struct CrOutcome {
    pub part: CfPartition,
    /// Final measured F-relaxation factor.
    pub rho: f64,
    /// Number of times C was enlarged.
    pub passes: usize,
    /// Set when C swallowed every point without reaching `theta`.
    pub exhausted: bool,
    /// `|C|` after each pass, starting with `|c0|`.
    pub c_sizes: Vec<usize>,
}

/// Compatible-relaxation coarsening. Starting from `c0`, repeatedly adds
/// an independent set of the slow-to-converge F points until the measured
/// F-relaxation factor drops to `theta`.
pub fn cr_coarsen(
    b: &SparseMatrix,
    c0: &[usize],
    p: &CrParams,
    seed: u64,
) -> Result<CrOutcome> {
    p.validate()?;
    let n = b.nrows();
    let adj = symmetric_adjacency(b);
    let mut part = CfPartition::from_cset(n, c0.to_vec())?;
    let mut measure = cr_quality(b, &part, p, seed)?;
    let mut passes = 0;
    let mut c_sizes = vec![part.n_coarse()];
    while measure.rho > p.theta {
        let fset = part.fset();
        let mut slow: Vec<usize> = fset
            .iter()
            .zip(&measure.ratios)
            .filter(|(_, &r)| r > p.theta)
            .map(|(&i, _)| i)
            .collect();
        if slow.is_empty() {
            slow = fset.to_vec();
        }
        let added = independent_set_with(&adj, &slow);
        let mut cset = part.cset().to_vec();
        cset.extend(added);
        part = CfPartition::from_cset(n, cset)?;
        passes += 1;
        c_sizes.push(part.n_coarse());
        measure = cr_quality(b, &part, p, seed.wrapping_add(passes as u64))?;
        if part.fset().is_empty() {
            break;
        }
    }
    let exhausted = measure.rho > p.theta || (part.fset().is_empty() && n > 0);
    if exhausted {
        log::warn!("compatible relaxation put every point in C (rho = {:.3})", measure.rho);
    }
    Ok(CrOutcome {
        part,
        rho: measure.rho,
        passes,
        exhausted,
        c_sizes,
    })
}
