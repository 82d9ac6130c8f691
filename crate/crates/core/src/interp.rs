//! Least-squares interpolation.
//!
//! Every F-row of `P` is fitted independently: a greedy search picks up to
//! `caliber` coarse neighbours whose values best reproduce the test vectors
//! at the fine point, in a residual-weighted least-squares sense.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coarsening::CfPartition;
use crate::dense;
use crate::error::{Error, Result};
use crate::par;
use crate::sparse::{graph, SparseMatrix};

/// Origin of a test vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvKind {
    Random,
    State,
    Eigen,
}

/// Test vectors of one level. One slot is always the current approximation
/// of the state vector.
#[derive(Debug, Clone)]
pub struct TestVectorSet {
    vectors: Vec<Vec<f64>>,
    kinds: Vec<TvKind>,
    state_slot: usize,
}

impl TestVectorSet {
    pub fn new(vectors: Vec<Vec<f64>>, kinds: Vec<TvKind>, state_slot: usize) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidParameter("empty test vector set".into()));
        }
        if kinds.len() != vectors.len() {
            return Err(Error::DimensionMismatch {
                op: "test vector kinds",
                expected: vectors.len(),
                got: kinds.len(),
            });
        }
        let n = vectors[0].len();
        if let Some(v) = vectors.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch {
                op: "test vector length",
                expected: n,
                got: v.len(),
            });
        }
        if state_slot >= vectors.len() {
            return Err(Error::InvalidParameter(format!(
                "state slot {state_slot} out of range for {} vectors",
                vectors.len()
            )));
        }
        Ok(Self {
            vectors,
            kinds,
            state_slot,
        })
    }

    /// `r` vectors with entries uniform in `[1, 2]`, each scaled to unit
    /// norm. Slot 0 doubles as the initial state approximation.
    pub fn random_positive(n: usize, r: usize, seed: u64) -> Result<Self> {
        if r == 0 || n == 0 {
            return Err(Error::InvalidParameter("need r >= 1 and n >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors = (0..r)
            .map(|_| {
                let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
                normalize(&mut v);
                v
            })
            .collect();
        Self::new(vectors, vec![TvKind::Random; r], 0)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.vectors
    }

    pub fn kinds(&self) -> &[TvKind] {
        &self.kinds
    }

    pub fn state_slot(&self) -> usize {
        self.state_slot
    }

    pub fn state(&self) -> &[f64] {
        &self.vectors[self.state_slot]
    }

    pub fn set_state(&mut self, v: Vec<f64>) {
        assert_eq!(v.len(), self.dim());
        self.vectors[self.state_slot] = v;
        self.kinds[self.state_slot] = TvKind::State;
    }

    /// Replaces every eigenvector slot with `eig`.
    pub fn set_eigen(&mut self, eig: Vec<Vec<f64>>) {
        let mut k = 0;
        while k < self.vectors.len() {
            if self.kinds[k] == TvKind::Eigen {
                self.vectors.remove(k);
                self.kinds.remove(k);
                if k < self.state_slot {
                    self.state_slot -= 1;
                }
            } else {
                k += 1;
            }
        }
        for v in eig {
            assert_eq!(v.len(), self.dim());
            self.vectors.push(v);
            self.kinds.push(TvKind::Eigen);
        }
    }

    /// Injection of every vector onto the coarse points of `part`.
    pub fn restrict(&self, part: &CfPartition) -> Self {
        Self {
            vectors: self
                .vectors
                .iter()
                .map(|v| part.cset().iter().map(|&c| v[c]).collect())
                .collect(),
            kinds: self.kinds.clone(),
            state_slot: self.state_slot,
        }
    }
}

pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

/// Graph in which coarse neighbours are searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborGraph {
    /// Edges `i -> j` for `b_ij != 0`: only states feeding into `i`.
    Directed,
    /// Edges in both directions, so successors count as well.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsParams {
    /// Maximum interpolatory points per F-row.
    pub caliber: usize,
    /// Path length the neighbour search starts from.
    pub min_z: usize,
    /// Largest path length searched for coarse neighbours.
    pub max_z: usize,
    /// Regulariser in the test-vector weights.
    pub eps: f64,
    pub graph: NeighborGraph,
}

impl Default for LsParams {
    fn default() -> Self {
        Self {
            caliber: 2,
            min_z: 1,
            max_z: 3,
            eps: 1e-16,
            graph: NeighborGraph::Symmetric,
        }
    }
}

impl LsParams {
    pub fn validate(&self) -> Result<()> {
        if self.caliber == 0 {
            return Err(Error::InvalidParameter("caliber must be >= 1".into()));
        }
        if !(1..=3).contains(&self.max_z) || !(1..=self.max_z).contains(&self.min_z) {
            return Err(Error::InvalidParameter(
                "need 1 <= min_z <= max_z <= 3".into(),
            ));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter("eps must be positive".into()));
        }
        Ok(())
    }
}

/// `ω_k = 1 / (||B x_k||² + eps ||x_k||²)`.
pub fn tv_weights(b: &SparseMatrix, tvs: &TestVectorSet, eps: f64) -> Vec<f64> {
    tvs.vectors
        .iter()
        .map(|x| {
            let r = b.apply(x);
            let rr: f64 = r.iter().map(|v| v * v).sum();
            let xx: f64 = x.iter().map(|v| v * v).sum();
            1.0 / (rr + eps * xx)
        })
        .collect()
}

/// Weighted least-squares fit of `x_i` from `x_J` over all test vectors.
/// Returns the minimum-norm minimiser and the value of the functional.
pub fn ls_fit_row(
    vectors: &[Vec<f64>],
    weights: &[f64],
    i: usize,
    cols: &[usize],
) -> (Vec<f64>, f64) {
    let r = vectors.len();
    let m = cols.len();
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let coef = if m == 1 {
        let j = cols[0];
        let (mut num, mut den) = (0.0, 0.0);
        for (k, x) in vectors.iter().enumerate() {
            num += weights[k] * x[i] * x[j];
            den += weights[k] * x[j] * x[j];
        }
        vec![if den > 0.0 { num / den } else { 0.0 }]
    } else {
        let a = Mat::from_fn(r, m, |k, c| sw[k] * vectors[k][cols[c]]);
        let rhs: Vec<f64> = (0..r).map(|k| sw[k] * vectors[k][i]).collect();
        match dense::pseudoinverse(&a, 1e-13) {
            Ok(pinv) => dense::matvec(&pinv, &rhs),
            Err(_) => vec![0.0; m],
        }
    };
    let l = ls_value(vectors, weights, i, cols, &coef);
    (coef, l)
}

fn ls_value(vectors: &[Vec<f64>], weights: &[f64], i: usize, cols: &[usize], p: &[f64]) -> f64 {
    vectors
        .iter()
        .zip(weights)
        .map(|(x, w)| {
            let fit: f64 = cols.iter().zip(p).map(|(&j, pj)| pj * x[j]).sum();
            let e = x[i] - fit;
            w * e * e
        })
        .sum()
}

/// One fitted F-row together with the functional value after each greedy
/// step (`trace[0]` is the value with no interpolatory points).
#[derive(Debug, Clone)]
pub struct RowFit {
    pub row: usize,
    pub cols: Vec<usize>,
    pub coef: Vec<f64>,
    pub trace: Vec<f64>,
    pub radius: usize,
}

fn fit_row(
    b: &SparseMatrix,
    mask: &[bool],
    vectors: &[Vec<f64>],
    weights: &[f64],
    i: usize,
    p: &LsParams,
) -> Result<RowFit> {
    let mut radius = 0;
    let mut cand = Vec::new();
    for z in p.min_z..=p.max_z {
        cand = graph::neighborhood(b, i, z, mask);
        radius = z;
        if !cand.is_empty() {
            break;
        }
    }
    if cand.is_empty() {
        return Err(Error::IsolatedFinePoint { point: i });
    }
    let mut cols: Vec<usize> = Vec::with_capacity(p.caliber);
    let mut coef = Vec::new();
    let mut trace = vec![ls_value(vectors, weights, i, &[], &[])];
    while cols.len() < p.caliber && !cand.is_empty() {
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        let mut trial = cols.clone();
        trial.push(0);
        for (pos, &g) in cand.iter().enumerate() {
            *trial.last_mut().unwrap() = g;
            let (c, l) = ls_fit_row(vectors, weights, i, &trial);
            if best.as_ref().is_none_or(|(_, _, bl)| l < *bl) {
                best = Some((pos, c, l));
            }
        }
        let (pos, c, l) = best.expect("candidate set is non-empty");
        cols.push(cand.remove(pos));
        coef = c;
        trace.push(l);
    }
    Ok(RowFit {
        row: i,
        cols,
        coef,
        trace,
        radius,
    })
}

/// Builds `P` (n × n_coarse) and returns the per-row fits as well.
pub fn build_interpolation_traced(
    b: &SparseMatrix,
    part: &CfPartition,
    tvs: &TestVectorSet,
    p: &LsParams,
) -> Result<(SparseMatrix, Vec<RowFit>)> {
    p.validate()?;
    let n = b.nrows();
    if part.n() != n || tvs.dim() != n {
        return Err(Error::DimensionMismatch {
            op: "build_interpolation",
            expected: n,
            got: if part.n() != n { part.n() } else { tvs.dim() },
        });
    }
    let weights = tv_weights(b, tvs, p.eps);
    let mask = part.coarse_mask();
    let fset = part.fset();
    let sym;
    let g = match p.graph {
        NeighborGraph::Directed => b,
        NeighborGraph::Symmetric => {
            sym = graph::symmetrized_pattern(b);
            &sym
        }
    };
    let fits = par::map_collect(fset.len(), |k| {
        fit_row(g, &mask, &tvs.vectors, &weights, fset[k], p)
    });
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;

    let mut trip = Vec::with_capacity(part.n_coarse() + fits.len() * p.caliber);
    for (k, &c) in part.cset().iter().enumerate() {
        trip.push((c, k, 1.0));
    }
    for f in &fits {
        if f.coef.iter().all(|&v| v == 0.0) {
            return Err(Error::EmptyInterpolationRow { row: f.row });
        }
        for (&j, &v) in f.cols.iter().zip(&f.coef) {
            let cj = part.coarse_index(j).expect("neighbourhood yields C points");
            trip.push((f.row, cj, v));
        }
    }
    let pm = SparseMatrix::from_triplets(n, part.n_coarse(), &trip)?;
    Ok((pm, fits))
}

pub fn build_interpolation(
    b: &SparseMatrix,
    part: &CfPartition,
    tvs: &TestVectorSet,
    p: &LsParams,
) -> Result<SparseMatrix> {
    build_interpolation_traced(b, part, tvs, p).map(|(pm, _)| pm)
}
