//! Multigrid-preconditioned Krylov solvers for `B x = 0`, plus the
//! classical power and Richardson baselines.

use std::io::Write;

use faer::Mat;
use num_complex::Complex64;

use crate::dense;
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::mle::fix_sign;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovMode {
    Gmres,
    Arnoldi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovParams {
    /// Target for `||B x||` with `||x|| = 1`.
    pub tol: f64,
    pub max_iters: usize,
    pub mode: KrylovMode,
}

impl Default for KrylovParams {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 200,
            mode: KrylovMode::Gmres,
        }
    }
}

impl KrylovParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("krylov tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    /// GMRES: `||C B x_m||`; Arnoldi: Ritz residual estimate.
    pub precond_residual: f64,
    /// `||B x̂||` of the normalised iterate.
    pub true_residual: f64,
}

#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    /// Unit-norm iterate with positive sum.
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterRecord>,
    /// Ritz values of the last Arnoldi step (empty for GMRES).
    pub ritz: Vec<Complex64>,
}

impl KrylovOutcome {
    pub fn final_residual(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |h| h.true_residual)
    }
}

pub fn write_history_csv<W: Write>(history: &[IterRecord], w: &mut W) -> Result<()> {
    writeln!(w, "iteration,precond_residual,true_residual")?;
    for h in history {
        writeln!(w, "{},{:e},{:e}", h.iteration, h.precond_residual, h.true_residual)?;
    }
    Ok(())
}

/// One V(ν,ν)-cycle for `B_l z = r` from `z = 0`; the coarsest level uses
/// the minimum-norm least-squares solution.
pub fn vcycle_apply(h: &Hierarchy, r: &[f64], l: usize) -> Vec<f64> {
    let levels = h.levels();
    let lev = &levels[l];
    assert_eq!(r.len(), lev.n(), "vcycle_apply: residual length");
    if l + 1 == levels.len() {
        return dense::matvec(h.coarse_pinv(), r);
    }
    let tr = lev.transfer.as_ref().expect("non-coarsest level has a transfer");
    let jac = lev.smoother.as_ref().expect("non-coarsest level has a smoother");
    let mut z = vec![0.0; r.len()];
    jac.relax(&lev.b, &mut z, Some(r));
    let bz = lev.b.apply(&z);
    let res: Vec<f64> = r.iter().zip(&bz).map(|(a, b)| a - b).collect();
    let rc = tr.q.apply(&res);
    let zc = vcycle_apply(h, &rc, l + 1);
    let corr = tr.p.apply(&zc);
    z.iter_mut().zip(&corr).for_each(|(a, c)| *a += c);
    jac.relax(&lev.b, &mut z, Some(r));
    z
}

/// `C B x` on the finest level.
pub fn precond_apply(h: &Hierarchy, x: &[f64]) -> Vec<f64> {
    vcycle_apply(h, &h.finest().b.apply(x), 0)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass. Returns the
/// projection coefficients and the remaining norm.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> (Vec<f64>, f64) {
    let mut h = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (j, v) in basis.iter().enumerate() {
            let c = dot(w, v);
            h[j] += c;
            axpy(-c, v, w);
        }
    }
    let nrm = norm(w);
    (h, nrm)
}

fn true_residual(b: &SparseMatrix, x: &[f64]) -> Result<f64> {
    let nrm = norm(x);
    if !(nrm > 0.0) {
        return Err(Error::IterateCollapsed { iteration: 0 });
    }
    Ok(norm(&b.apply(x)) / nrm)
}

fn finish(mut x: Vec<f64>, iterations: usize, converged: bool, history: Vec<IterRecord>, ritz: Vec<Complex64>) -> KrylovOutcome {
    fix_sign(&mut x);
    KrylovOutcome {
        x,
        iterations,
        converged,
        history,
        ritz,
    }
}

/// Full GMRES on `C B x = 0` from `x0`: minimises `||C B (x0 + V y)||` over
/// the Krylov space of `r0 = -C B x0`, stopping on the true residual of the
/// normalised iterate.
pub fn pgmres_solve(h: &Hierarchy, x0: &[f64], p: &KrylovParams) -> Result<KrylovOutcome> {
    p.validate()?;
    let b = &h.finest().b;
    let n = b.nrows();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            op: "pgmres_solve",
            expected: n,
            got: x0.len(),
        });
    }
    let x0_norm = norm(x0);
    let res0 = true_residual(b, x0)?;
    let mut r0: Vec<f64> = precond_apply(h, x0);
    r0.iter_mut().for_each(|v| *v = -*v);
    let beta = norm(&r0);
    let mut history = vec![IterRecord {
        iteration: 0,
        precond_residual: beta,
        true_residual: res0,
    }];
    if res0 <= p.tol || beta == 0.0 {
        return Ok(finish(x0.to_vec(), 0, res0 <= p.tol, history, Vec::new()));
    }

    let mut basis: Vec<Vec<f64>> = vec![r0.iter().map(|v| v / beta).collect()];
    // columns of the upper Hessenberg matrix, rotated in place
    let mut hcols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<(f64, f64)> = Vec::new();
    let mut g = vec![beta];
    let mut x = x0.to_vec();
    let mut last = beta;

    for m in 1..=p.max_iters {
        let mut w = precond_apply(h, &basis[m - 1]);
        let (mut col, hnext) = orthogonalize(&basis, &mut w);
        for (k, &(c, s)) in cs.iter().enumerate() {
            let (a, bb) = (col[k], col[k + 1]);
            col[k] = c * a + s * bb;
            col[k + 1] = -s * a + c * bb;
        }
        let (a, bb) = (col[m - 1], hnext);
        let rho = a.hypot(bb);
        let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, bb / rho) };
        col[m - 1] = rho;
        cs.push((c, s));
        let gm = g[m - 1];
        g[m - 1] = c * gm;
        g.push(-s * gm);
        hcols.push(col);

        // y from the triangular system R y = g[..m]
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let mut acc = g[i];
            for j in i + 1..m {
                acc -= hcols[j][i] * y[j];
            }
            y[i] = if hcols[i][i] != 0.0 { acc / hcols[i][i] } else { 0.0 };
        }
        x.copy_from_slice(x0);
        for (j, v) in basis.iter().enumerate() {
            axpy(y[j], v, &mut x);
        }
        if norm(&x) <= 1e-12 * x0_norm {
            return Err(Error::IterateCollapsed { iteration: m });
        }
        let pres = g[m].abs();
        debug_assert!(pres <= last * (1.0 + 1e-10) + 1e-300, "GMRES residual increased");
        last = pres;
        let tres = true_residual(b, &x)?;
        history.push(IterRecord {
            iteration: m,
            precond_residual: pres,
            true_residual: tres,
        });
        log::debug!("pGMRES {m}: ||CBx|| = {pres:.3e}, ||Bx|| = {tres:.3e}");
        if tres <= p.tol {
            return Ok(finish(x, m, true, history, Vec::new()));
        }
        if hnext <= 1e-14 * beta {
            // exact invariant subspace: nothing more to gain
            return Ok(finish(x, m, false, history, Vec::new()));
        }
        w.iter_mut().for_each(|v| *v /= hnext);
        basis.push(w);
    }
    let iters = p.max_iters;
    Ok(finish(x, iters, false, history, Vec::new()))
}

/// Arnoldi on `C B` from `y`; each step extracts the Ritz vector of the
/// Ritz value closest to zero.
pub fn parnoldi_solve(h: &Hierarchy, y: &[f64], p: &KrylovParams) -> Result<KrylovOutcome> {
    p.validate()?;
    let b = &h.finest().b;
    let n = b.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            op: "parnoldi_solve",
            expected: n,
            got: y.len(),
        });
    }
    let ynorm = norm(y);
    if !(ynorm > 0.0) {
        return Err(Error::IterateCollapsed { iteration: 0 });
    }
    let res0 = true_residual(b, y)?;
    let mut history = vec![IterRecord {
        iteration: 0,
        precond_residual: f64::NAN,
        true_residual: res0,
    }];
    if res0 <= p.tol {
        return Ok(finish(y.to_vec(), 0, true, history, Vec::new()));
    }
    let mut basis: Vec<Vec<f64>> = vec![y.iter().map(|v| v / ynorm).collect()];
    let mut hess: Vec<Vec<f64>> = Vec::new(); // column j has j+2 entries
    let mut x = y.to_vec();
    let mut ritz = Vec::new();
    for k in 1..=p.max_iters {
        let mut w = precond_apply(h, &basis[k - 1]);
        let (mut col, hnext) = orthogonalize(&basis, &mut w);
        col.push(hnext);
        hess.push(col);

        let hk = Mat::from_fn(k, k, |i, j| hess[j].get(i).copied().unwrap_or(0.0));
        let eig = dense::eigen(&hk)?;
        let best = (0..k)
            .min_by(|&a, &c| eig.values[a].norm().total_cmp(&eig.values[c].norm()))
            .expect("k >= 1");
        let eta = &eig.vectors[best];
        let big = eta
            .iter()
            .copied()
            .max_by(|a, c| a.norm().total_cmp(&c.norm()))
            .unwrap_or(Complex64::new(1.0, 0.0));
        let rot = big.conj() / big.norm();
        let coef: Vec<f64> = eta.iter().map(|z| (z * rot).re).collect();
        x.iter_mut().for_each(|v| *v = 0.0);
        for (j, v) in basis.iter().enumerate() {
            axpy(coef[j], v, &mut x);
        }
        let est = hnext * (eta[k - 1]).norm();
        let tres = true_residual(b, &x)?;
        ritz = eig.values;
        history.push(IterRecord {
            iteration: k,
            precond_residual: est,
            true_residual: tres,
        });
        log::debug!("pArnoldi {k}: theta = {:.3e}, ||Bx|| = {tres:.3e}", ritz[best]);
        if tres <= p.tol {
            return Ok(finish(x, k, true, history, ritz));
        }
        if hnext <= 1e-14 {
            return Ok(finish(x, k, false, history, ritz));
        }
        w.iter_mut().for_each(|v| *v /= hnext);
        basis.push(w);
    }
    let iters = p.max_iters;
    Ok(finish(x, iters, false, history, ritz))
}

/// `x <- A x / ||A x||`, recording `||B x||` after every step.
pub fn power_iterate(a: &SparseMatrix, x0: &[f64], max: usize, tol: f64) -> Result<KrylovOutcome> {
    let b = a.identity_minus()?;
    iterate_map(&b, x0, max, tol, |x| a.apply(x))
}

/// `x <- (I - τB) x`, normalised, recording `||B x||`.
pub fn tau_richardson(b: &SparseMatrix, x0: &[f64], tau: f64, max: usize, tol: f64) -> Result<KrylovOutcome> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter("tau must be positive".into()));
    }
    iterate_map(b, x0, max, tol, |x| {
        let bx = b.apply(x);
        x.iter().zip(&bx).map(|(xi, bi)| xi - tau * bi).collect()
    })
}

fn iterate_map<F>(b: &SparseMatrix, x0: &[f64], max: usize, tol: f64, step: F) -> Result<KrylovOutcome>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if x0.len() != b.nrows() {
        return Err(Error::DimensionMismatch {
            op: "stationary iteration",
            expected: b.nrows(),
            got: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let nrm = norm(&x);
    if !(nrm > 0.0) {
        return Err(Error::IterateCollapsed { iteration: 0 });
    }
    x.iter_mut().for_each(|v| *v /= nrm);
    let mut history = vec![IterRecord {
        iteration: 0,
        precond_residual: f64::NAN,
        true_residual: true_residual(b, &x)?,
    }];
    if history[0].true_residual <= tol {
        return Ok(finish(x, 0, true, history, Vec::new()));
    }
    for it in 1..=max {
        x = step(&x);
        let nrm = norm(&x);
        if !(nrm > 0.0) {
            return Err(Error::IterateCollapsed { iteration: it });
        }
        x.iter_mut().for_each(|v| *v /= nrm);
        let r = true_residual(b, &x)?;
        history.push(IterRecord {
            iteration: it,
            precond_residual: f64::NAN,
            true_residual: r,
        });
        if r <= tol {
            return Ok(finish(x, it, true, history, Vec::new()));
        }
    }
    Ok(finish(x, max, false, history, Vec::new()))
}
