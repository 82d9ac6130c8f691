//! Test Markov chains: generators, ingestion and validation.
//!
//! Every transition matrix is column-stochastic (`a_ij` is the probability
//! of moving from state `j` to state `i`) with a zero diagonal.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::sparse::{mtx, strong_components, SparseMatrix};

/// Default tandem-queue weights: arrival and the two services.
pub const TANDEM_MU: f64 = 11.0 / 31.0;
pub const TANDEM_MU_X: f64 = 10.0 / 31.0;
pub const TANDEM_MU_Y: f64 = 10.0 / 31.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    UniformGrid,
    TandemQueue,
    PlanarGraph,
    External,
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainKind::UniformGrid => "uniform",
            ChainKind::TandemQueue => "tandem",
            ChainKind::PlanarGraph => "planar",
            ChainKind::External => "external",
        })
    }
}

/// A column-stochastic transition matrix with where it came from.
#[derive(Debug, Clone)]
pub struct ChainProblem {
    pub a: SparseMatrix,
    pub kind: ChainKind,
    /// Side length `N` for `N x N` lattice models.
    pub grid_dim: Option<usize>,
    pub seed: Option<u64>,
    /// Point coordinates for planar graphs.
    pub points: Option<Vec<[f64; 2]>>,
}

impl ChainProblem {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// `B = I - A`.
    pub fn b(&self) -> SparseMatrix {
        self.a
            .identity_minus()
            .expect("transition matrix is square")
    }
}

/// Index of lattice point `(x, y)` on an `n x n` grid.
pub fn grid_index(n: usize, x: usize, y: usize) -> usize {
    x * n + y
}

/// Random walk on an `n x n` lattice with 4-point adjacency:
/// `a_ij = 1 / d_out(j)` for every lattice edge.
pub fn gen_uniform_network(n: usize) -> Result<ChainProblem> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "uniform network needs N >= 2, got {n}"
        )));
    }
    let mut t = Vec::with_capacity(4 * n * n);
    for x in 0..n {
        for y in 0..n {
            let j = grid_index(n, x, y);
            let nbrs = lattice_neighbors(n, x, y);
            let p = 1.0 / nbrs.len() as f64;
            for (u, v) in nbrs {
                t.push((grid_index(n, u, v), j, p));
            }
        }
    }
    Ok(ChainProblem {
        a: SparseMatrix::from_triplets(n * n, n * n, &t)?,
        kind: ChainKind::UniformGrid,
        grid_dim: Some(n),
        seed: None,
        points: None,
    })
}

fn lattice_neighbors(n: usize, x: usize, y: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(4);
    if x > 0 {
        v.push((x - 1, y));
    }
    if x + 1 < n {
        v.push((x + 1, y));
    }
    if y > 0 {
        v.push((x, y - 1));
    }
    if y + 1 < n {
        v.push((x, y + 1));
    }
    v
}

/// Two-queue tandem network on an `n x n` state lattice. From state
/// `(i, j)` the chain moves to `(i+1, j)` (arrival, weight `mu`),
/// `(i-1, j+1)` (first service, `mu_x`) or `(i, j-1)` (second service,
/// `mu_y`). Moves leaving the lattice are dropped and the remaining weights
/// renormalised.
pub fn gen_tandem_queue(n: usize, mu: f64, mu_x: f64, mu_y: f64) -> Result<ChainProblem> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "tandem queue needs N >= 2, got {n}"
        )));
    }
    if !(mu > 0.0 && mu_x > 0.0 && mu_y > 0.0) {
        return Err(Error::InvalidParameter(
            "tandem weights must be positive".into(),
        ));
    }
    let mut t = Vec::with_capacity(3 * n * n);
    for i in 0..n {
        for j in 0..n {
            let mut moves: Vec<(usize, f64)> = Vec::with_capacity(3);
            if i + 1 < n {
                moves.push((grid_index(n, i + 1, j), mu));
            }
            if i > 0 && j + 1 < n {
                moves.push((grid_index(n, i - 1, j + 1), mu_x));
            }
            if j > 0 {
                moves.push((grid_index(n, i, j - 1), mu_y));
            }
            let total: f64 = moves.iter().map(|m| m.1).sum();
            if moves.is_empty() {
                return Err(Error::Validation(format!(
                    "tandem state ({i}, {j}) has no feasible move"
                )));
            }
            let from = grid_index(n, i, j);
            for (to, w) in moves {
                t.push((to, from, w / total));
            }
        }
    }
    Ok(ChainProblem {
        a: SparseMatrix::from_triplets(n * n, n * n, &t)?,
        kind: ChainKind::TandemQueue,
        grid_dim: Some(n),
        seed: None,
        points: None,
    })
}

/// Random walk on the Delaunay triangulation of `n` uniform points in the
/// unit square.
pub fn gen_planar_graph(n: usize, seed: u64) -> Result<ChainProblem> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!(
            "planar graph needs N >= 4, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let mut attempt = 0;
    loop {
        match planar_from_points(&points) {
            Ok(mut p) => {
                p.seed = Some(seed);
                return Ok(p);
            }
            Err(Error::DegeneratePoints(msg)) if attempt < 5 => {
                log::warn!("planar graph: {msg}; perturbing points and retrying");
                for q in &mut points {
                    q[0] = (q[0] + 1e-12 * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0);
                    q[1] = (q[1] + 1e-12 * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0);
                }
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Random walk on the Delaunay triangulation of the given points.
pub fn planar_from_points(points: &[[f64; 2]]) -> Result<ChainProblem> {
    let n = points.len();
    let mut tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    let mut handle_to_point = vec![usize::MAX; n];
    for (k, p) in points.iter().enumerate() {
        let h = tri
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| Error::DegeneratePoints(format!("point {k}: {e:?}")))?;
        if handle_to_point[h.index()] != usize::MAX {
            return Err(Error::DegeneratePoints(format!(
                "point {k} duplicates point {}",
                handle_to_point[h.index()]
            )));
        }
        handle_to_point[h.index()] = k;
    }
    if tri.num_inner_faces() == 0 {
        return Err(Error::DegeneratePoints("all points are collinear".into()));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in tri.undirected_edges() {
        let [u, v] = e.vertices();
        let (u, v) = (handle_to_point[u.fix().index()], handle_to_point[v.fix().index()]);
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut t = Vec::new();
    for (j, nbrs) in adj.iter().enumerate() {
        let p = 1.0 / nbrs.len() as f64;
        for &i in nbrs {
            t.push((i, j, p));
        }
    }
    Ok(ChainProblem {
        a: SparseMatrix::from_triplets(n, n, &t)?,
        kind: ChainKind::PlanarGraph,
        grid_dim: None,
        seed: None,
        points: Some(points.to_vec()),
    })
}

/// Removes self-transitions: `a'_ij = a_ij / (1 - a_jj)` for `i != j`.
/// If `A x = x` then `A' y = y` with `y_j = (1 - a_jj) x_j`.
pub fn strip_self_transitions(a: &SparseMatrix) -> Result<SparseMatrix> {
    let diag = a.diagonal();
    if let Some(j) = diag.iter().position(|&d| d >= 1.0) {
        return Err(Error::AbsorbingState { state: j });
    }
    let t: Vec<_> = a
        .triplets()
        .filter(|&(i, j, _)| i != j)
        .map(|(i, j, v)| (i, j, v / (1.0 - diag[j])))
        .collect();
    SparseMatrix::from_triplets(a.nrows(), a.ncols(), &t)
}

pub fn load_matrix_market(path: &Path) -> Result<ChainProblem> {
    let a = mtx::read(path)?;
    if !a.is_square() {
        return Err(Error::Validation(format!(
            "transition matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(ChainProblem {
        a,
        kind: ChainKind::External,
        grid_dim: None,
        seed: None,
        points: None,
    })
}

pub fn save_matrix_market(problem: &ChainProblem, path: &Path) -> Result<()> {
    mtx::write(&problem.a, path)
}

/// Writes planar-graph coordinates as `x,y` lines under a header.
pub fn write_points_csv<W: Write>(points: &[[f64; 2]], w: &mut W) -> Result<()> {
    writeln!(w, "x,y")?;
    for p in points {
        writeln!(w, "{:?},{:?}", p[0], p[1])?;
    }
    Ok(())
}

/// Outcome of one validation check with the worst offender, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub pass: bool,
    pub worst_index: Option<usize>,
    pub worst_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Largest `|column sum - 1|` against the `1e-13 n` tolerance.
    pub stochastic: Check,
    /// Largest `|a_ii|`.
    pub zero_diagonal: Check,
    /// Entry furthest outside `[0, 1]` (reported as a distance).
    pub entries_in_range: Check,
    pub strong_components: usize,
}

impl ValidationReport {
    pub fn irreducible(&self) -> bool {
        self.strong_components == 1
    }

    pub fn passed(&self) -> bool {
        self.stochastic.pass
            && self.zero_diagonal.pass
            && self.entries_in_range.pass
            && self.irreducible()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = |f: &mut fmt::Formatter<'_>, name: &str, c: &Check| {
            writeln!(
                f,
                "{name:<18} {}  worst={:.3e}{}",
                if c.pass { "pass" } else { "FAIL" },
                c.worst_value,
                c.worst_index
                    .map(|i| format!(" at index {i}"))
                    .unwrap_or_default()
            )
        };
        line(f, "column-stochastic", &self.stochastic)?;
        line(f, "zero diagonal", &self.zero_diagonal)?;
        line(f, "entries in [0,1]", &self.entries_in_range)?;
        writeln!(
            f,
            "{:<18} {}  components={}",
            "irreducible",
            if self.irreducible() { "pass" } else { "FAIL" },
            self.strong_components
        )
    }
}

fn worst<I: Iterator<Item = (usize, f64)>>(it: I, tol: f64) -> Check {
    let (idx, val) = it.fold((None, 0.0f64), |(bi, bv), (i, v)| {
        if v > bv {
            (Some(i), v)
        } else {
            (bi, bv)
        }
    });
    Check {
        pass: val <= tol,
        worst_index: if val > 0.0 { idx } else { None },
        worst_value: val,
    }
}

pub fn validate(problem: &ChainProblem) -> ValidationReport {
    let a = &problem.a;
    let n = a.nrows();
    let sums = a.column_sums();
    let stochastic = worst(
        sums.iter().enumerate().map(|(j, s)| (j, (s - 1.0).abs())),
        1e-13 * n.max(1) as f64,
    );
    let zero_diagonal = worst(
        a.diagonal().into_iter().enumerate().map(|(i, d)| (i, d.abs())),
        0.0,
    );
    let entries_in_range = worst(
        a.triplets().map(|(i, _, v)| {
            let d = if v < 0.0 {
                -v
            } else if v > 1.0 {
                v - 1.0
            } else {
                0.0
            };
            (i, d)
        }),
        0.0,
    );
    ValidationReport {
        stochastic,
        zero_diagonal,
        entries_in_range,
        strong_components: strong_components(a),
    }
}
