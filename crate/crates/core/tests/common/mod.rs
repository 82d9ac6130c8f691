#![allow(dead_code)]

use bamg::chain::{ChainKind, ChainProblem};
use bamg::dense::{self, Mat};
use bamg::SparseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||x - y|| / ||y||` after scaling both to unit norm with positive sum.
pub fn rel_err(x: &[f64], y: &[f64]) -> f64 {
    let unit = |v: &[f64]| {
        let s = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        let n = norm(v);
        v.iter().map(|a| s * a / n).collect::<Vec<_>>()
    };
    let (x, y) = (unit(x), unit(y));
    let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    norm(&d)
}

/// Stationary vector of `a` from a dense eigensolve: unit norm, positive.
pub fn dense_stationary(a: &SparseMatrix) -> Vec<f64> {
    let eig = dense::eigen(&dense::to_mat(a)).unwrap();
    let k = (0..eig.values.len())
        .min_by(|&i, &j| {
            (eig.values[i] - 1.0)
                .norm()
                .total_cmp(&(eig.values[j] - 1.0).norm())
        })
        .unwrap();
    let z = &eig.vectors[k];
    let big = z.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    let rot = big.conj() / big.norm();
    let mut v: Vec<f64> = z.iter().map(|c| (c * rot).re).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Random irreducible chain: a directed ring plus `extra` random edges per
/// state, random positive weights, columns normalised. With `self_loops`
/// every state also keeps a random self-transition.
pub fn random_chain(n: usize, extra: usize, self_loops: bool, seed: u64) -> SparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (j, col) in cols.iter_mut().enumerate() {
        col.push(((j + 1) % n, rng.random_range(0.1..1.0)));
        for _ in 0..extra {
            let i = rng.random_range(0..n);
            if i != j {
                col.push((i, rng.random_range(0.1..1.0)));
            }
        }
        if self_loops {
            col.push((j, rng.random_range(0.1..1.0)));
        }
    }
    let mut t = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        let mut merged = col.clone();
        merged.sort_by_key(|e| e.0);
        merged.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        let s: f64 = merged.iter().map(|e| e.1).sum();
        t.extend(merged.into_iter().map(|(i, v)| (i, j, v / s)));
    }
    SparseMatrix::from_triplets(n, n, &t).unwrap()
}

pub fn external(a: SparseMatrix) -> ChainProblem {
    ChainProblem {
        a,
        kind: ChainKind::External,
        grid_dim: None,
        seed: None,
        points: None,
    }
}

/// The `k` smallest-magnitude eigenpairs of a sparse `b` by shift-invert
/// subspace iteration with a block of `block` vectors and Rayleigh-Ritz
/// extraction. Vectors have unit norm. Used as a large-scale oracle where a
/// dense eigensolve is too expensive.
pub fn smallest_eigenpairs(
    b: &SparseMatrix,
    k: usize,
    block: usize,
    shift: f64,
    tol: f64,
) -> Vec<(num_complex::Complex64, Vec<num_complex::Complex64>)> {
    use faer::linalg::solvers::Solve;
    use faer::sparse::{SparseColMat, Triplet};
    use num_complex::Complex64;

    let n = b.nrows();
    let mut trip: Vec<Triplet<usize, usize, f64>> =
        b.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    trip.extend((0..n).map(|i| Triplet::new(i, i, -shift)));
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip).unwrap();
    let lu = m.sp_lu().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut x = Mat::<f64>::from_fn(n, block, |_, _| rng.random_range(-1.0..1.0));
    let mut best = Vec::new();
    for _ in 0..200 {
        let y = lu.solve(&x);
        let q = y.qr().compute_thin_Q();
        let cols: Vec<Vec<f64>> = (0..block).map(|j| (0..n).map(|i| q[(i, j)]).collect()).collect();
        let bq: Vec<Vec<f64>> = cols.iter().map(|c| b.apply(c)).collect();
        let h = Mat::<f64>::from_fn(block, block, |i, j| {
            cols[i].iter().zip(&bq[j]).map(|(a, c)| a * c).sum()
        });
        let eig = dense::eigen(&h).unwrap();
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &c| eig.values[a].norm().total_cmp(&eig.values[c].norm()));
        let mut pairs = Vec::new();
        let mut worst = 0.0_f64;
        for &o in order.iter().take(k) {
            let lam = eig.values[o];
            let s = &eig.vectors[o];
            let mut v = vec![Complex64::new(0.0, 0.0); n];
            let mut bv = vec![Complex64::new(0.0, 0.0); n];
            for j in 0..block {
                for i in 0..n {
                    v[i] += s[j] * cols[j][i];
                    bv[i] += s[j] * bq[j][i];
                }
            }
            let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let r = bv.iter().zip(&v).map(|(a, c)| (a - lam * c).norm_sqr()).sum::<f64>().sqrt() / nv;
            worst = worst.max(r);
            pairs.push((lam, v.into_iter().map(|z| z / nv).collect::<Vec<_>>()));
        }
        best = pairs;
        if worst <= tol {
            break;
        }
        x = q;
    }
    best
}

/// Distance from unit vector `v` to the eigenvector `z`: the sign-aligned
/// difference for a real `z`, the distance to span(Re z, Im z) otherwise.
pub fn eigvec_error(v: &[f64], z: &[num_complex::Complex64]) -> f64 {
    let nv = norm(v);
    let v: Vec<f64> = v.iter().map(|a| a / nv).collect();
    let big = z.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    let rot = big.conj() / big.norm();
    let re: Vec<f64> = z.iter().map(|c| (c * rot).re).collect();
    let im: Vec<f64> = z.iter().map(|c| (c * rot).im).collect();
    if norm(&im) <= 1e-10 * norm(&re) {
        let nr = norm(&re);
        let d = |s: f64| norm(&v.iter().zip(&re).map(|(a, b)| a - s * b / nr).collect::<Vec<_>>());
        return d(1.0).min(d(-1.0));
    }
    // orthonormal basis of the real invariant plane
    let nr = norm(&re);
    let e1: Vec<f64> = re.iter().map(|a| a / nr).collect();
    let c: f64 = im.iter().zip(&e1).map(|(a, b)| a * b).sum();
    let mut e2: Vec<f64> = im.iter().zip(&e1).map(|(a, b)| a - c * b).collect();
    let n2 = norm(&e2);
    e2.iter_mut().for_each(|a| *a /= n2);
    let p1: f64 = v.iter().zip(&e1).map(|(a, b)| a * b).sum();
    let p2: f64 = v.iter().zip(&e2).map(|(a, b)| a * b).sum();
    norm(&v.iter().enumerate().map(|(i, a)| a - p1 * e1[i] - p2 * e2[i]).collect::<Vec<_>>())
}
