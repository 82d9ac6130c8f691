//! End-to-end runs: problem construction, setup, solve, reports and
//! result tables.
//!
//! Configuration is a flat list of `key = value` pairs. Later pairs win, so
//! a config file followed by command-line pairs gives the usual precedence.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::chain::{self, ChainKind, ChainProblem};
use crate::coarsening::CrParams;
use crate::error::{Error, Result};
use crate::hierarchy::{operator_complexity, LevelStats};
use crate::interp::NeighborGraph;
use crate::krylov::{self, IterRecord, KrylovMode, KrylovParams};
use crate::mle::{self, Coarsening, CycleRecord, MleParams};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Uniform { n: usize },
    Tandem { n: usize, mu: f64, mu_x: f64, mu_y: f64 },
    Planar { n: usize, seed: u64 },
    File(PathBuf),
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ChainProblem> {
        match *self {
            Self::Uniform { n } => chain::gen_uniform_network(n),
            Self::Tandem { n, mu, mu_x, mu_y } => chain::gen_tandem_queue(n, mu, mu_x, mu_y),
            Self::Planar { n, seed } => chain::gen_planar_graph(n, seed),
            Self::File(ref p) => chain::load_matrix_market(p),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Uniform { n } => format!("uniform N={n}"),
            Self::Tandem { n, .. } => format!("tandem N={n}"),
            Self::Planar { n, seed } => format!("planar n={n} seed={seed}"),
            Self::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Uniform,
    Tandem,
    Planar,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "tandem" => Ok(Self::Tandem),
            "planar" => Ok(Self::Planar),
            _ => Err(Error::InvalidParameter(format!("unknown problem family {s:?}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Tandem => "tandem",
            Self::Planar => "planar",
        })
    }
}

impl Family {
    /// Sizes of the published tables.
    pub fn default_sizes(self) -> Vec<usize> {
        match self {
            Self::Uniform | Self::Tandem => vec![17, 33, 65, 129],
            Self::Planar => vec![256, 512, 1024, 2048],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// MLE cycles until the state residual reaches the tolerance.
    Mle,
    Pgmres,
    Parnoldi,
    Power,
    Richardson,
}

impl FromStr for SolveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mle" => Ok(Self::Mle),
            "pgmres" => Ok(Self::Pgmres),
            "parnoldi" => Ok(Self::Parnoldi),
            "power" => Ok(Self::Power),
            "richardson" => Ok(Self::Richardson),
            _ => Err(Error::InvalidParameter(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mle => "mle",
            Self::Pgmres => "pgmres",
            Self::Parnoldi => "parnoldi",
            Self::Power => "power",
            Self::Richardson => "richardson",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseningKind {
    Full,
    Cr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub mode: SolveMode,
    pub mle: MleParams,
    pub krylov: KrylovParams,
    pub coarsening: CoarseningKind,
    pub cr: CrParams,
    /// Damping of the τ-Richardson baseline.
    pub tau: f64,
    /// Iteration cap for the power and Richardson baselines.
    pub baseline_max_iters: usize,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for a problem: full coarsening on lattices, three-level
    /// compatible-relaxation hierarchies elsewhere.
    pub fn new(problem: ProblemSpec) -> Self {
        let lattice = matches!(problem, ProblemSpec::Uniform { .. } | ProblemSpec::Tandem { .. });
        let mut mle = MleParams::default();
        if !lattice {
            mle.max_levels = 3;
        }
        Self {
            problem,
            mode: SolveMode::Pgmres,
            mle,
            krylov: KrylovParams::default(),
            coarsening: if lattice { CoarseningKind::Full } else { CoarseningKind::Cr },
            cr: CrParams::default(),
            tau: 0.7,
            baseline_max_iters: 100_000,
            output_dir: None,
        }
    }

    /// Builds a config from ordered `key = value` pairs. The problem keys
    /// (`problem`, `n`, `seed`, `input`, tandem weights) are resolved first
    /// so that family defaults sit underneath every explicit setting.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let last = |k: &str| pairs.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        let parse_f = |k: &str, d: f64| -> Result<f64> { last(k).map_or(Ok(d), |v| parse_value(k, v)) };
        let n = last("n").map(|v| parse_value::<usize>("n", v)).transpose()?;
        let need_n = |fam: &str| n.ok_or_else(|| Error::InvalidParameter(format!("problem {fam} needs n")));
        let problem = match (last("problem"), last("input")) {
            (Some(p), Some(_)) if p != "file" => {
                return Err(Error::InvalidParameter(
                    "give either a generated problem or an input file, not both".into(),
                ))
            }
            (_, Some(path)) => ProblemSpec::File(PathBuf::from(path)),
            (Some("file"), None) => return Err(Error::InvalidParameter("problem file needs input".into())),
            (Some(fam), None) => match fam.parse::<Family>()? {
                Family::Uniform => ProblemSpec::Uniform { n: need_n(fam)? },
                Family::Tandem => ProblemSpec::Tandem {
                    n: need_n(fam)?,
                    mu: parse_f("arrival", chain::TANDEM_MU)?,
                    mu_x: parse_f("service_x", chain::TANDEM_MU_X)?,
                    mu_y: parse_f("service_y", chain::TANDEM_MU_Y)?,
                },
                Family::Planar => ProblemSpec::Planar {
                    n: need_n(fam)?,
                    seed: last("seed").map_or(Ok(1), |v| parse_value("seed", v))?,
                },
            },
            (None, None) => return Err(Error::InvalidParameter("no problem given".into())),
        };
        let mut cfg = Self::new(problem);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one setting. Problem keys are accepted and ignored here.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "problem" | "n" | "input" | "arrival" | "service_x" | "service_y" => {}
            "seed" => self.mle.seed = parse_value(key, v)?,
            "mode" => self.mode = v.parse()?,
            "setup_cycles" => self.mle.setup_cycles = parse_value(key, v)?,
            "max_cycles" => self.mle.max_cycles = parse_value(key, v)?,
            "tol" => {
                self.mle.tol = parse_value(key, v)?;
                self.krylov.tol = self.mle.tol;
            }
            "max_iters" => self.krylov.max_iters = parse_value(key, v)?,
            "omega" => self.mle.smoother.omega = parse_value(key, v)?,
            "sweeps" => self.mle.smoother.sweeps = parse_value(key, v)?,
            "test_vectors" => self.mle.r = parse_value(key, v)?,
            "eigenpairs" => self.mle.k = parse_value(key, v)?,
            "cycle_index" => self.mle.mu = parse_value(key, v)?,
            "delta" => self.mle.delta = parse_value(key, v)?,
            "coarsest_size" => self.mle.coarsest_size = parse_value(key, v)?,
            "max_levels" => self.mle.max_levels = parse_value(key, v)?,
            "check_monotone" => self.mle.check_monotone = parse_value(key, v)?,
            "caliber" => self.mle.ls.caliber = parse_value(key, v)?,
            "min_z" => self.mle.ls.min_z = parse_value(key, v)?,
            "max_z" => self.mle.ls.max_z = parse_value(key, v)?,
            "eps" => self.mle.ls.eps = parse_value(key, v)?,
            "graph" => {
                self.mle.ls.graph = match v {
                    "symmetric" => NeighborGraph::Symmetric,
                    "directed" => NeighborGraph::Directed,
                    _ => return Err(bad(key, v)),
                }
            }
            "coarsening" => {
                self.coarsening = match v {
                    "full" => CoarseningKind::Full,
                    "cr" => CoarseningKind::Cr,
                    _ => return Err(bad(key, v)),
                }
            }
            "theta" => self.cr.theta = parse_value(key, v)?,
            "nu" => self.cr.nu = parse_value(key, v)?,
            "tau" => self.tau = parse_value(key, v)?,
            "baseline_max_iters" => self.baseline_max_iters = parse_value(key, v)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(v)),
            _ => return Err(Error::InvalidParameter(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.mle.validate()?;
        self.krylov.validate()?;
        self.cr.validate()?;
        if !(self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if self.mle.setup_cycles == 0 && matches!(self.mode, SolveMode::Pgmres | SolveMode::Parnoldi) {
            return Err(Error::InvalidParameter("Krylov modes need setup_cycles >= 1".into()));
        }
        Ok(())
    }

    pub fn coarsening_mode(&self) -> Coarsening {
        match self.coarsening {
            CoarseningKind::Full => Coarsening::FullGrid,
            CoarseningKind::Cr => Coarsening::CompatibleRelaxation(self.cr),
        }
    }
}

fn bad(key: &str, v: &str) -> Error {
    Error::InvalidParameter(format!("bad value {v:?} for {key}"))
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| bad(key, v))
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_config_str(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: format!("expected key = value, got {line:?}"),
        })?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    parse_config_str(&fs::read_to_string(path)?, path)
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub label: String,
    pub n: usize,
    pub mode: SolveMode,
    /// MLE cycles performed.
    pub setup_cycles: usize,
    /// Krylov or baseline iterations; `None` in MLE mode.
    pub iterations: Option<usize>,
    pub final_residual: f64,
    pub converged: bool,
    pub operator_complexity: Option<f64>,
    pub levels: Vec<LevelStats>,
    pub lambdas: Vec<f64>,
    pub wall_time: Duration,
    /// Unit-norm stationary vector with positive sum.
    pub x: Vec<f64>,
    pub setup_history: Vec<CycleRecord>,
    pub solve_history: Vec<IterRecord>,
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "problem          {} (n = {})", self.label, self.n)?;
        writeln!(f, "mode             {}", self.mode)?;
        writeln!(f, "setup cycles     {}", self.setup_cycles)?;
        if let Some(it) = self.iterations {
            writeln!(f, "iterations       {it}")?;
        }
        writeln!(f, "final ||Bx||     {:.3e}", self.final_residual)?;
        writeln!(f, "converged        {}", self.converged)?;
        if let Some(c) = self.operator_complexity {
            writeln!(f, "op. complexity   {c:.3}")?;
        }
        if !self.levels.is_empty() {
            writeln!(f, "levels")?;
            for s in &self.levels {
                let g = s.grid_side.map_or("-".to_string(), |g| format!("{g}x{g}"));
                writeln!(f, "  {:>3} {:>9} {:>10} {:>8}", s.level, s.n, s.nnz, g)?;
            }
        }
        if !self.lambdas.is_empty() {
            let l: Vec<String> = self.lambdas.iter().map(|v| format!("{v:.4e}")).collect();
            writeln!(f, "eigenvalues      {}", l.join(" "))?;
        }
        write!(f, "wall time        {:.3} s", self.wall_time.as_secs_f64())
    }
}

impl SolveReport {
    /// Writes `report.txt`, the histories, level statistics and the state
    /// vector into `dir`. Only `report.txt` carries timing information.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.txt"), format!("{self}\n"))?;
        let mut w = fs::File::create(dir.join("setup_history.csv"))?;
        mle::write_history_csv(&self.setup_history, &mut w)?;
        let mut w = fs::File::create(dir.join("solve_history.csv"))?;
        krylov::write_history_csv(&self.solve_history, &mut w)?;
        let mut w = fs::File::create(dir.join("levels.csv"))?;
        writeln!(w, "level,n,nnz,grid_side")?;
        for s in &self.levels {
            writeln!(w, "{},{},{},{}", s.level, s.n, s.nnz, s.grid_side.map_or(String::new(), |g| g.to_string()))?;
        }
        let mut w = fs::File::create(dir.join("state.csv"))?;
        writeln!(w, "index,x")?;
        for (i, v) in self.x.iter().enumerate() {
            writeln!(w, "{i},{v:e}")?;
        }
        Ok(())
    }
}

/// Loads or generates and validates the chain. Self-transitions are
/// stripped; the returned diagonal maps the stationary vector back.
pub fn prepare(config: &RunConfig) -> Result<(ChainProblem, Option<Vec<f64>>)> {
    let mut problem = config.problem.build()?;
    let diag = problem.a.diagonal();
    let stripped = if diag.iter().any(|&d| d != 0.0) {
        problem.a = chain::strip_self_transitions(&problem.a)?;
        Some(diag)
    } else {
        None
    };
    if problem.kind == ChainKind::External && config.coarsening == CoarseningKind::Full && problem.grid_dim.is_none() {
        let side = (problem.n() as f64).sqrt().round() as usize;
        if side * side != problem.n() {
            return Err(Error::InvalidParameter(format!(
                "full coarsening needs a square lattice, n = {} is not a square",
                problem.n()
            )));
        }
        problem.grid_dim = Some(side);
    }
    let report = chain::validate(&problem);
    if !report.passed() {
        return Err(Error::Validation(format!("\n{report}")));
    }
    Ok((problem, stripped))
}

/// Stationary vector of the original chain from that of the stripped one.
fn unstrip(y: &[f64], diag: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = y.iter().zip(diag).map(|(v, d)| v / (1.0 - d)).collect();
    mle::fix_sign(&mut x);
    x
}

/// Runs the configured number of setup cycles on a prepared problem.
pub fn setup(config: &RunConfig, problem: &ChainProblem) -> Result<mle::SetupOutcome> {
    config.validate()?;
    mle::run_setup(problem, config.mle, config.coarsening_mode())
}

pub fn run(config: &RunConfig) -> Result<SolveReport> {
    config.validate()?;
    let start = Instant::now();
    let (problem, stripped) = prepare(config)?;
    let n = problem.n();
    let b = problem.b();
    let mut report = SolveReport {
        label: config.problem.label(),
        n,
        mode: config.mode,
        setup_cycles: 0,
        iterations: None,
        final_residual: f64::NAN,
        converged: false,
        operator_complexity: None,
        levels: Vec::new(),
        lambdas: Vec::new(),
        wall_time: Duration::ZERO,
        x: Vec::new(),
        setup_history: Vec::new(),
        solve_history: Vec::new(),
    };
    match config.mode {
        SolveMode::Mle | SolveMode::Pgmres | SolveMode::Parnoldi => {
            let to_convergence = config.mode == SolveMode::Mle;
            let setup = mle::run_setup_with(&problem, config.mle, config.coarsening_mode(), to_convergence)?;
            report.setup_cycles = setup.cycles();
            report.operator_complexity = Some(operator_complexity(&setup.hierarchy));
            report.levels = setup.hierarchy.stats();
            report.lambdas = setup.eigen.lambdas();
            report.setup_history = setup.history.clone();
            if to_convergence {
                report.converged = setup.converged;
                report.x = setup.x0;
            } else {
                let mut kp = config.krylov;
                kp.mode = if config.mode == SolveMode::Pgmres { KrylovMode::Gmres } else { KrylovMode::Arnoldi };
                let out = match kp.mode {
                    KrylovMode::Gmres => krylov::pgmres_solve(&setup.hierarchy, &setup.x0, &kp)?,
                    KrylovMode::Arnoldi => krylov::parnoldi_solve(&setup.hierarchy, &setup.x0, &kp)?,
                };
                report.iterations = Some(out.iterations);
                report.converged = out.converged;
                report.x = out.x;
                report.solve_history = out.history;
            }
        }
        SolveMode::Power | SolveMode::Richardson => {
            let x0 = vec![1.0; n];
            let tol = config.krylov.tol;
            let out = if config.mode == SolveMode::Power {
                krylov::power_iterate(&problem.a, &x0, config.baseline_max_iters, tol)?
            } else {
                krylov::tau_richardson(&b, &x0, config.tau, config.baseline_max_iters, tol)?
            };
            report.iterations = Some(out.iterations);
            report.converged = out.converged;
            report.x = out.x;
            report.solve_history = out.history;
        }
    }
    report.final_residual = mle::normalized_residual(&b, &report.x);
    if let Some(diag) = stripped {
        report.x = unstrip(&report.x, &diag);
    }
    report.wall_time = start.elapsed();
    if let Some(dir) = &config.output_dir {
        report.write_outputs(dir)?;
    }
    Ok(report)
}

/// One table cell: an iteration count, a count that missed the tolerance,
/// or an error message.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Converged(usize),
    NotConverged(usize),
    Failed(String),
}

impl Cell {
    pub fn count(&self) -> Option<usize> {
        match self {
            Self::Converged(c) => Some(*c),
            _ => None,
        }
    }

    fn from_report(r: Result<SolveReport>) -> Self {
        match r {
            Ok(rep) => {
                let c = rep.iterations.unwrap_or(rep.setup_cycles);
                if rep.converged {
                    Self::Converged(c)
                } else {
                    Self::NotConverged(c)
                }
            }
            Err(e) => Self::Failed(e.to_string()),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Converged(c) => write!(f, "{c}"),
            Self::NotConverged(c) => write!(f, ">{c}"),
            Self::Failed(_) => f.write_str("fail"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub mle: Cell,
    pub pgmres: Cell,
    pub parnoldi: Cell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub family: Family,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_text(&self) -> String {
        let mut s = format!("{:>8} {:>6} {:>8} {:>9}\n", "N", "MLE", "pGMRES", "pArnoldi");
        for r in &self.rows {
            s.push_str(&format!(
                "{:>8} {:>6} {:>8} {:>9}\n",
                r.n,
                r.mle.to_string(),
                r.pgmres.to_string(),
                r.parnoldi.to_string()
            ));
        }
        s
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "N,MLE,pGMRES,pArnoldi")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.n, r.mle, r.pgmres, r.parnoldi)?;
        }
        Ok(())
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rows {
            for (name, c) in [("MLE", &r.mle), ("pGMRES", &r.pgmres), ("pArnoldi", &r.parnoldi)] {
                if let Cell::Failed(msg) = c {
                    out.push(format!("N={} {name}: {msg}", r.n));
                }
            }
        }
        out
    }
}

/// Runs MLE to convergence and both Krylov methods after the configured
/// setup for every size; sizes run concurrently. `base` supplies every
/// parameter except the problem size.
pub fn table_sweep(family: Family, sizes: &[usize], base: &RunConfig) -> SweepTable {
    let rows = par::map_collect_coarse(sizes.len(), |i| {
        let n = sizes[i];
        let problem = match (family, &base.problem) {
            (Family::Uniform, _) => ProblemSpec::Uniform { n },
            (Family::Tandem, &ProblemSpec::Tandem { mu, mu_x, mu_y, .. }) => ProblemSpec::Tandem { n, mu, mu_x, mu_y },
            (Family::Tandem, _) => ProblemSpec::Tandem {
                n,
                mu: chain::TANDEM_MU,
                mu_x: chain::TANDEM_MU_X,
                mu_y: chain::TANDEM_MU_Y,
            },
            (Family::Planar, &ProblemSpec::Planar { seed, .. }) => ProblemSpec::Planar { n, seed },
            (Family::Planar, _) => ProblemSpec::Planar { n, seed: 1 },
        };
        let with_mode = |mode| {
            let mut c = base.clone();
            c.problem = problem.clone();
            c.mode = mode;
            c.output_dir = None;
            run(&c)
        };
        SweepRow {
            n,
            mle: Cell::from_report(with_mode(SolveMode::Mle)),
            pgmres: Cell::from_report(with_mode(SolveMode::Pgmres)),
            parnoldi: Cell::from_report(with_mode(SolveMode::Parnoldi)),
        }
    });
    SweepTable { family, rows }
}
