use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bamg::chain;
use bamg::diagnostics::{self, Operator};
use bamg::driver::{self, Family, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bamg", version, about = "Stationary vectors of Markov chains by bootstrap AMG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one chain and print a report.
    Solve(RunArgs),
    /// Iteration-count table over several sizes of one family.
    Sweep {
        #[arg(long)]
        family: Family,
        /// Comma-separated sizes; defaults to the family's standard table.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Dense eigenvalues of an iteration operator as CSV.
    Spectrum {
        /// a, richardson[:tau], mg (I - CB) or cb.
        #[arg(long, default_value = "a")]
        operator: Operator,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Field-of-values boundary points of an iteration operator as CSV.
    Fov {
        #[arg(long, default_value = "a")]
        operator: Operator,
        #[arg(long, default_value_t = 64)]
        angles: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check that a chain is column-stochastic, self-loop free and irreducible.
    Validate(ProblemArgs),
    /// Write a generated chain to MatrixMarket.
    Gen {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, short)]
        output: PathBuf,
        /// Also dump planar-graph coordinates as CSV.
        #[arg(long)]
        points: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct ProblemArgs {
    /// uniform, tandem or planar.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// MatrixMarket transition matrix instead of a generated chain.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    arrival: Option<f64>,
    #[arg(long)]
    service_x: Option<f64>,
    #[arg(long)]
    service_y: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Flat key = value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    /// mle, pgmres, parnoldi, power or richardson.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    setup_cycles: Option<usize>,
    #[arg(long)]
    max_cycles: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    test_vectors: Option<usize>,
    #[arg(long)]
    eigenpairs: Option<usize>,
    #[arg(long)]
    cycle_index: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    caliber: Option<usize>,
    /// full or cr.
    #[arg(long)]
    coarsening: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long)]
    max_levels: Option<usize>,
    #[arg(long)]
    coarsest_size: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Any other config key, as key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

macro_rules! push_opts {
    ($pairs:ident, $src:expr, $($field:ident),* $(,)?) => {
        $(if let Some(v) = &$src.$field {
            $pairs.push((stringify!($field).to_string(), v.to_string()));
        })*
    };
}

impl ProblemArgs {
    fn pairs(&self) -> Vec<(String, String)> {
        let mut p = Vec::new();
        push_opts!(p, self, problem, n, seed, arrival, service_x, service_y);
        if let Some(i) = &self.input {
            p.push(("input".into(), i.display().to_string()));
        }
        p
    }

    fn config(&self) -> Result<RunConfig> {
        Ok(RunConfig::from_pairs(&self.pairs())?)
    }
}

impl RunArgs {
    /// File pairs first, then flags, so flags win.
    fn pairs(&self) -> Result<Vec<(String, String)>> {
        let mut p = match &self.config {
            Some(path) => driver::read_config_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => Vec::new(),
        };
        p.extend(self.problem.pairs());
        push_opts!(
            p, self, mode, setup_cycles, max_cycles, tol, max_iters, omega, sweeps, test_vectors,
            eigenpairs, cycle_index, delta, caliber, coarsening, theta, nu, max_levels,
            coarsest_size, tau,
        );
        if let Some(d) = &self.output_dir {
            p.push(("output_dir".into(), d.display().to_string()));
        }
        for kv in &self.extra {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {kv:?}");
            };
            p.push((k.trim().replace('-', "_"), v.trim().to_string()));
        }
        Ok(p)
    }

    fn config(&self) -> Result<RunConfig> {
        Ok(RunConfig::from_pairs(&self.pairs()?)?)
    }
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn dense_operator(run: &RunArgs, op: Operator) -> Result<bamg::dense::Mat<f64>> {
    let cfg = run.config()?;
    let (problem, _) = driver::prepare(&cfg)?;
    let h = match op {
        Operator::MgPropagator | Operator::Preconditioned => Some(driver::setup(&cfg, &problem)?.hierarchy),
        _ => None,
    };
    Ok(diagnostics::dense_operator(&problem.a, h.as_ref(), op)?)
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Solve(run) => {
            let cfg = run.config()?;
            let report = driver::run(&cfg)?;
            let _ = writeln!(io::stdout(), "{report}");
            Ok(report.converged)
        }
        Command::Sweep { family, sizes, csv, mut run } => {
            if run.problem.problem.is_none() && run.problem.input.is_none() {
                run.problem.problem = Some(family.to_string());
            }
            let sizes = if sizes.is_empty() { family.default_sizes() } else { sizes };
            if run.problem.n.is_none() {
                run.problem.n = sizes.first().copied();
            }
            let cfg = run.config()?;
            let table = driver::table_sweep(family, &sizes, &cfg);
            let _ = write!(io::stdout(), "{}", table.to_text());
            for f in table.failures() {
                eprintln!("{f}");
            }
            if let Some(path) = csv {
                let mut w = open_out(&Some(path))?;
                table.write_csv(&mut w)?;
                w.flush()?;
            }
            if !table.failures().is_empty() {
                bail!("{} table cells failed", table.failures().len());
            }
            Ok(table
                .rows
                .iter()
                .all(|r| [&r.mle, &r.pgmres, &r.parnoldi].iter().all(|c| c.count().is_some())))
        }
        Command::Spectrum { operator, out, run } => {
            let m = dense_operator(&run, operator)?;
            let ev = diagnostics::spectrum(&m)?;
            let mut w = open_out(&out)?;
            diagnostics::write_complex_csv(&ev, &mut w)?;
            w.flush()?;
            Ok(true)
        }
        Command::Fov { operator, angles, out, run } => {
            let m = dense_operator(&run, operator)?;
            let pts = diagnostics::field_of_values(&m, angles)?;
            let mut w = open_out(&out)?;
            diagnostics::write_complex_csv(&pts, &mut w)?;
            w.flush()?;
            Ok(true)
        }
        Command::Validate(args) => {
            let cfg = args.config()?;
            let problem = cfg.problem.build()?;
            let report = chain::validate(&problem);
            let _ = write!(io::stdout(), "{report}");
            Ok(report.passed())
        }
        Command::Gen { problem, output, points } => {
            let cfg = problem.config()?;
            let p = cfg.problem.build()?;
            chain::save_matrix_market(&p, &output)?;
            if let Some(path) = points {
                let Some(pts) = &p.points else {
                    bail!("only planar graphs have coordinates");
                };
                let mut w = open_out(&Some(path))?;
                chain::write_points_csv(pts, &mut w)?;
                w.flush()?;
            }
            eprintln!("wrote {} states to {}", p.n(), display(&output));
            Ok(true)
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
