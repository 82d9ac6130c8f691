//! Bootstrap multilevel eigensolver (MLE) setup.
//!
//! Each cycle relaxes the test vectors on the way down, fits least-squares
//! interpolation from them, solves the coarsest eigenproblem exactly and
//! then carries the eigenvector approximations back up with shifted
//! relaxation. The lowest of these approximates the state vector; the
//! others enrich the test set for the next cycle.

use std::io::Write;

use num_complex::Complex64;

use crate::chain::ChainProblem;
use crate::coarsening::{cr_coarsen, full_coarsen_grid, greedy_independent_set, CfPartition, CrParams};
use crate::dense;
use crate::error::{Error, Result};
use crate::hierarchy::{build_averaging_restriction, coarsen_level, Hierarchy, Level, Transfer};
use crate::interp::{build_interpolation, normalize, LsParams, TestVectorSet};
use crate::smoothing::{shifted_relax, Jacobi, SmootherParams};
use crate::sparse::SparseMatrix;

/// Mass matrices whose 1-norm condition estimate exceeds this are rejected.
pub const MAX_MASS_COND: f64 = 1e12;
/// Largest coarsest level the dense eigensolve accepts.
pub const MAX_DENSE_COARSEST: usize = 2000;

#[derive(Debug, Clone)]
pub struct EigenPair {
    /// Real part of the eigenvalue; used as the relaxation shift.
    pub lambda: f64,
    /// Imaginary part reported by the coarsest solve (0 for real pairs).
    pub imag: f64,
    pub v: Vec<f64>,
}

/// Eigenpair approximations, ordered by `|λ|`; entry 0 is the kernel.
#[derive(Debug, Clone, Default)]
pub struct EigenPairSet {
    pub pairs: Vec<EigenPair>,
}

impl EigenPairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    fn sort_tail(&mut self) {
        if self.pairs.len() > 2 {
            self.pairs[1..].sort_by(|a, b| {
                let ma = a.lambda.hypot(a.imag);
                let mb = b.lambda.hypot(b.imag);
                ma.total_cmp(&mb)
            });
        }
    }
}

/// How coarse variables are chosen on each level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coarsening {
    /// Even-even lattice points; requires an odd grid side on level 0.
    FullGrid,
    CompatibleRelaxation(CrParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleParams {
    /// Number of random test vectors.
    pub r: usize,
    /// Eigenpairs computed on the coarsest level.
    pub k: usize,
    /// Cycle index: 1 for V, 2 for W.
    pub mu: usize,
    /// Cycles to run before handing over to a Krylov method.
    pub setup_cycles: usize,
    /// Upper bound on cycles when running MLE to convergence.
    pub max_cycles: usize,
    /// Relative eigenvalue change above which a vector joins the test set.
    pub delta: f64,
    pub tol: f64,
    pub coarsest_size: usize,
    pub max_levels: usize,
    pub smoother: SmootherParams,
    pub ls: LsParams,
    pub seed: u64,
    /// Abort when the state residual grows between cycles.
    pub check_monotone: bool,
}

impl Default for MleParams {
    fn default() -> Self {
        Self {
            r: 6,
            k: 6,
            mu: 1,
            setup_cycles: 1,
            max_cycles: 50,
            delta: 0.0,
            tol: 1e-8,
            coarsest_size: 30,
            max_levels: 32,
            smoother: SmootherParams::default(),
            ls: LsParams::default(),
            seed: 0,
            check_monotone: false,
        }
    }
}

impl MleParams {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.k == 0 {
            return Err(Error::InvalidParameter("r and k must be >= 1".into()));
        }
        if !(1..=2).contains(&self.mu) {
            return Err(Error::InvalidParameter(format!("mu must be 1 or 2, got {}", self.mu)));
        }
        if !(self.tol > 0.0) || !(self.delta >= 0.0) {
            return Err(Error::InvalidParameter("tol must be > 0 and delta >= 0".into()));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidParameter("max_levels must be >= 1".into()));
        }
        self.smoother.validate()?;
        self.ls.validate()
    }
}

/// The `k` smallest-magnitude eigenpairs of `B x = λ T x` by a dense solve
/// of `T^-1 B`. The smallest is pinned to λ = 0. A complex conjugate pair
/// contributes the real part of its eigenvector to the first slot and the
/// imaginary part to the second, both shifted by `Re λ`.
pub fn coarsest_eigensolve(b: &SparseMatrix, t: &SparseMatrix, k: usize) -> Result<EigenPairSet> {
    let n = b.nrows();
    if n > MAX_DENSE_COARSEST {
        return Err(Error::TooLarge {
            n,
            limit: MAX_DENSE_COARSEST,
        });
    }
    let (tinv, cond) = dense::inverse_with_cond(&dense::to_mat(t));
    if !(cond <= MAX_MASS_COND) {
        return Err(Error::SingularMass { cond });
    }
    let m = &tinv * &dense::to_mat(b);
    let eig = dense::eigen(&m)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.values[a]
            .norm()
            .total_cmp(&eig.values[b].norm())
            .then(eig.values[b].im.total_cmp(&eig.values[a].im))
    });
    let mut pairs = Vec::with_capacity(k.min(n));
    let mut pos = 0;
    while pairs.len() < k.min(n) && pos < n {
        let idx = order[pos];
        let lam = eig.values[idx];
        let z = &eig.vectors[idx];
        if pairs.is_empty() || lam.im.abs() <= 1e-12 * lam.norm().max(1e-300) {
            pairs.push(EigenPair {
                lambda: lam.re,
                imag: 0.0,
                v: real_vector(z),
            });
            pos += 1;
        } else {
            let z = phase_fixed(z);
            let mut re: Vec<f64> = z.iter().map(|c| c.re).collect();
            let mut im: Vec<f64> = z.iter().map(|c| c.im).collect();
            normalize(&mut re);
            pairs.push(EigenPair {
                lambda: lam.re,
                imag: lam.im.abs(),
                v: re,
            });
            if pairs.len() < k && normalize(&mut im) > 1e-14 {
                pairs.push(EigenPair {
                    lambda: lam.re,
                    imag: -lam.im.abs(),
                    v: im,
                });
            }
            // skip the conjugate partner
            pos += 1;
            if pos < n && (eig.values[order[pos]] - lam.conj()).norm() <= 1e-10 * lam.norm() {
                pos += 1;
            }
        }
    }
    let first = &mut pairs[0];
    first.lambda = 0.0;
    first.imag = 0.0;
    fix_sign(&mut first.v);
    Ok(EigenPairSet { pairs })
}

/// Rotates a complex vector so its largest entry is real and positive.
fn phase_fixed(z: &[Complex64]) -> Vec<Complex64> {
    let big = z
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let rot = if big.norm() > 0.0 { big.conj() / big.norm() } else { Complex64::new(1.0, 0.0) };
    z.iter().map(|c| c * rot).collect()
}

fn real_vector(z: &[Complex64]) -> Vec<f64> {
    let mut v: Vec<f64> = phase_fixed(z).iter().map(|c| c.re).collect();
    normalize(&mut v);
    v
}

/// Normalises and flips `v` so that its entries sum to a positive value.
pub fn fix_sign(v: &mut [f64]) {
    normalize(v);
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `<Bx, x> / <Tx, x>`.
pub fn rayleigh_update(b: &SparseMatrix, t: &SparseMatrix, x: &[f64]) -> Result<f64> {
    let num: f64 = b.apply(x).iter().zip(x).map(|(a, b)| a * b).sum();
    let den: f64 = t.apply(x).iter().zip(x).map(|(a, b)| a * b).sum();
    if den == 0.0 || !den.is_finite() {
        return Err(Error::ZeroRayleighDenominator);
    }
    Ok(num / den)
}

/// Eigenvector slots to add to the test set: always 0, plus every `i > 0`
/// whose eigenvalue moved by more than `delta` relative to its new value.
pub fn tv_select(before: &[f64], after: &[f64], delta: f64) -> Vec<usize> {
    let mut sel = vec![0];
    for i in 1..before.len().min(after.len()) {
        let rel = (after[i] - before[i]).abs() / after[i].abs().max(1e-14);
        if rel > delta {
            sel.push(i);
        }
    }
    sel
}

/// Per-cycle record of the setup.
#[derive(Debug, Clone)]
pub struct CycleRecord {
    pub cycle: usize,
    /// `||B x0||` with `||x0|| = 1`.
    pub residual: f64,
    pub lambdas: Vec<f64>,
}

pub fn write_history_csv<W: Write>(history: &[CycleRecord], w: &mut W) -> Result<()> {
    let k = history.iter().map(|h| h.lambdas.len()).max().unwrap_or(0);
    write!(w, "cycle,residual")?;
    for i in 0..k {
        write!(w, ",lambda_{i}")?;
    }
    writeln!(w)?;
    for h in history {
        write!(w, "{},{:e}", h.cycle, h.residual)?;
        for i in 0..k {
            match h.lambdas.get(i) {
                Some(l) => write!(w, ",{l:e}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

struct LevelState {
    b: SparseMatrix,
    t: SparseMatrix,
    grid_side: Option<usize>,
    part: Option<CfPartition>,
    p: Option<SparseMatrix>,
    q: Option<SparseMatrix>,
}

/// Mutable multilevel state of one setup run.
pub struct MleSetup {
    params: MleParams,
    coarsening: Coarsening,
    levels: Vec<LevelState>,
    tvs: TestVectorSet,
}

impl MleSetup {
    pub fn new(problem: &ChainProblem, params: MleParams, coarsening: Coarsening) -> Result<Self> {
        params.validate()?;
        let n = problem.n();
        if let Coarsening::FullGrid = coarsening {
            match problem.grid_dim {
                Some(g) if g % 2 == 1 && g * g == n => {}
                _ => {
                    return Err(Error::InvalidParameter(
                        "full coarsening needs an odd square grid".into(),
                    ))
                }
            }
        }
        if let Coarsening::CompatibleRelaxation(cr) = coarsening {
            cr.validate()?;
        }
        let tvs = TestVectorSet::random_positive(n, params.r, params.seed)?;
        Ok(Self {
            params,
            coarsening,
            levels: vec![LevelState {
                b: problem.b(),
                t: SparseMatrix::identity(n),
                grid_side: problem.grid_dim,
                part: None,
                p: None,
                q: None,
            }],
            tvs,
        })
    }

    pub fn test_vectors(&self) -> &TestVectorSet {
        &self.tvs
    }

    /// One outer cycle; returns the level-0 eigenpair approximations.
    pub fn cycle(&mut self) -> Result<EigenPairSet> {
        let mut u = self.tvs.clone();
        let v = self.visit(0, &mut u, true)?;
        self.tvs = u;
        Ok(v)
    }

    /// Recomputes every `P`, `Q` and coarse operator from the current test
    /// vectors without relaxing them, and returns the resulting hierarchy.
    pub fn rebuild(&mut self) -> Result<Hierarchy> {
        let mut u = self.tvs.clone();
        self.visit(0, &mut u, false)?;
        self.hierarchy()
    }

    fn hierarchy(&self) -> Result<Hierarchy> {
        let depth = self.depth();
        let levels = self.levels[..depth]
            .iter()
            .enumerate()
            .map(|(l, s)| {
                let mut lev = Level::new(s.b.clone(), s.t.clone());
                lev.grid_side = s.grid_side;
                if l + 1 < depth {
                    lev.transfer = Some(Transfer {
                        p: s.p.clone().expect("transfer built"),
                        q: s.q.clone().expect("transfer built"),
                        part: s.part.clone().expect("partition built"),
                    });
                }
                lev
            })
            .collect();
        Hierarchy::new(levels, self.params.smoother)
    }

    fn depth(&self) -> usize {
        let mut d = 1;
        while d < self.levels.len() && self.levels[d - 1].p.is_some() {
            d += 1;
        }
        d
    }

    fn is_coarsest(&self, l: usize) -> bool {
        let n = self.levels[l].b.nrows();
        n <= self.params.coarsest_size || l + 1 >= self.params.max_levels
    }

    fn partition(&mut self, l: usize) -> Result<CfPartition> {
        if let Some(p) = &self.levels[l].part {
            return Ok(p.clone());
        }
        let lev = &self.levels[l];
        let part = match self.coarsening {
            Coarsening::FullGrid => {
                let side = lev.grid_side.ok_or_else(|| {
                    Error::InvalidParameter(format!("level {l} is not a lattice"))
                })?;
                full_coarsen_grid(side)?
            }
            Coarsening::CompatibleRelaxation(cr) => {
                let all: Vec<usize> = (0..lev.b.nrows()).collect();
                let c0 = greedy_independent_set(&lev.b, &all);
                let seed = self.params.seed.wrapping_add(1000 * (l as u64 + 1));
                let out = cr_coarsen(&lev.b, &c0, &cr, seed)?;
                log::debug!(
                    "level {l}: CR kept {} of {} points (rho {:.3}, {} passes)",
                    out.part.n_coarse(),
                    lev.b.nrows(),
                    out.rho,
                    out.passes
                );
                out.part
            }
        };
        self.levels[l].part = Some(part.clone());
        Ok(part)
    }

    fn visit(&mut self, l: usize, u: &mut TestVectorSet, relax: bool) -> Result<EigenPairSet> {
        if self.is_coarsest(l) {
            self.levels[l].p = None;
            if !relax {
                return Ok(EigenPairSet::default());
            }
            let lev = &self.levels[l];
            return coarsest_eigensolve(&lev.b, &lev.t, self.params.k);
        }
        let sp = self.params.smoother;
        if relax {
            let jac = Jacobi::new(&self.levels[l].b, sp)?;
            let b = &self.levels[l].b;
            for x in u.vectors_mut() {
                jac.relax(b, x, None);
                if normalize(x) == 0.0 {
                    return Err(Error::IterateCollapsed { iteration: 0 });
                }
            }
        }
        let part = self.partition(l)?;
        if part.n_coarse() == 0 || part.n_coarse() >= part.n() {
            // coarsening stalled; treat this level as the coarsest
            self.levels[l].p = None;
            if !relax {
                return Ok(EigenPairSet::default());
            }
            let lev = &self.levels[l];
            return coarsest_eigensolve(&lev.b, &lev.t, self.params.k);
        }
        let mut result = EigenPairSet::default();
        for _ in 0..self.params.mu {
            let lev = &self.levels[l];
            let p = build_interpolation(&lev.b, &part, u, &self.params.ls)?;
            let q = build_averaging_restriction(&p)?;
            let (bc, tc) = coarsen_level(&lev.b, &lev.t, &p, &q)?;
            let side = match self.coarsening {
                Coarsening::FullGrid => lev.grid_side.map(|s| s.div_ceil(2)),
                Coarsening::CompatibleRelaxation(_) => None,
            };
            self.levels[l].p = Some(p);
            self.levels[l].q = Some(q);
            let next = LevelState {
                b: bc,
                t: tc,
                grid_side: side,
                part: None,
                p: None,
                q: None,
            };
            if self.levels.len() > l + 1 {
                // keep the cached partition of the coarse level
                let cached = self.levels[l + 1].part.take();
                self.levels[l + 1] = LevelState { part: cached, ..next };
            } else {
                self.levels.push(next);
            }

            let mut uc = u.restrict(&part);
            let vc = self.visit(l + 1, &mut uc, relax)?;
            if !relax {
                continue;
            }
            result = self.ascend(l, u, vc)?;
        }
        Ok(result)
    }

    /// Interpolates the coarse eigenvectors, applies shifted relaxation and
    /// Rayleigh updates, and refreshes the test set.
    fn ascend(&self, l: usize, u: &mut TestVectorSet, vc: EigenPairSet) -> Result<EigenPairSet> {
        let lev = &self.levels[l];
        let p = lev.p.as_ref().expect("interpolation built");
        let sp = self.params.smoother;
        let frozen: Vec<Vec<f64>> = if cfg!(debug_assertions) {
            u.vectors().to_vec()
        } else {
            Vec::new()
        };
        let before = vc.lambdas();
        let mut pairs = Vec::with_capacity(vc.len());
        for (i, pair) in vc.pairs.into_iter().enumerate() {
            let mut x = p.apply(&pair.v);
            normalize(&mut x);
            let (mut x, _) = shifted_relax(&lev.b, &lev.t, pair.lambda, &x, sp)?;
            if normalize(&mut x) == 0.0 {
                return Err(Error::IterateCollapsed { iteration: i });
            }
            let lambda = if i == 0 {
                fix_sign(&mut x);
                0.0
            } else {
                rayleigh_update(&lev.b, &lev.t, &x)?
            };
            pairs.push(EigenPair {
                lambda,
                imag: pair.imag,
                v: x,
            });
        }
        debug_assert!(
            u.vectors().iter().zip(&frozen).all(|(a, b)| a == b),
            "test vectors changed during the eigenvector pass"
        );
        let after: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
        let sel = tv_select(&before, &after, self.params.delta);
        u.set_state(pairs[0].v.clone());
        u.set_eigen(sel[1..].iter().map(|&i| pairs[i].v.clone()).collect());
        let mut set = EigenPairSet { pairs };
        set.sort_tail();
        Ok(set)
    }
}

/// Everything the setup phase hands to the solvers.
#[derive(Debug, Clone)]
pub struct SetupOutcome {
    pub hierarchy: Hierarchy,
    /// Unit-norm state approximation with positive sum.
    pub x0: Vec<f64>,
    pub eigen: EigenPairSet,
    pub history: Vec<CycleRecord>,
    pub converged: bool,
}

impl SetupOutcome {
    pub fn cycles(&self) -> usize {
        self.history.len()
    }
}

/// `||B x||` of `x` scaled to unit norm.
pub fn normalized_residual(b: &SparseMatrix, x: &[f64]) -> f64 {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = b.apply(x);
    r.iter().map(|v| v * v).sum::<f64>().sqrt() / nrm
}

/// Runs `cycles` MLE cycles, or until the state residual reaches `tol` when
/// `to_convergence` is set (bounded by `max_cycles`), then rebuilds the
/// hierarchy from the final test set.
pub fn run_setup_with(
    problem: &ChainProblem,
    params: MleParams,
    coarsening: Coarsening,
    to_convergence: bool,
) -> Result<SetupOutcome> {
    let mut setup = MleSetup::new(problem, params, coarsening)?;
    let b = problem.b();
    let limit = if to_convergence {
        params.max_cycles
    } else {
        params.setup_cycles
    };
    let mut history: Vec<CycleRecord> = Vec::new();
    let mut eigen = EigenPairSet::default();
    let mut converged = false;
    for cycle in 1..=limit {
        eigen = setup.cycle()?;
        let res = normalized_residual(&b, setup.tvs.state());
        log::info!("MLE cycle {cycle}: ||Bx|| = {res:.3e}");
        if params.check_monotone {
            if let Some(prev) = history.last() {
                if res > prev.residual && prev.residual > params.tol {
                    return Err(Error::ResidualIncreased {
                        cycle,
                        before: prev.residual,
                        after: res,
                    });
                }
            }
        }
        history.push(CycleRecord {
            cycle,
            residual: res,
            lambdas: eigen.lambdas(),
        });
        if res <= params.tol {
            converged = true;
            if to_convergence {
                break;
            }
        }
    }
    let hierarchy = setup.rebuild()?;
    let mut x0 = setup.tvs.state().to_vec();
    fix_sign(&mut x0);
    Ok(SetupOutcome {
        hierarchy,
        x0,
        eigen,
        history,
        converged,
    })
}

/// `params.setup_cycles` cycles of MLE followed by the hierarchy rebuild.
pub fn run_setup(
    problem: &ChainProblem,
    params: MleParams,
    coarsening: Coarsening,
) -> Result<SetupOutcome> {
    run_setup_with(problem, params, coarsening, false)
}
