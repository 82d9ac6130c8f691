//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit when any
//! criterion fails. Built with `harness = false`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use bamg::chain::{gen_planar_graph, gen_tandem_queue, gen_uniform_network, strip_self_transitions, validate};
use bamg::coarsening::{cr_coarsen, full_coarsen_grid, greedy_independent_set, CrParams};
use bamg::dense::{self, Mat};
use bamg::diagnostics::{dense_operator, spectrum, Operator};
use bamg::driver::{prepare, run, setup, ProblemSpec, RunConfig, SolveMode, SolveReport};
use bamg::hierarchy::Hierarchy;
use bamg::interp::{build_interpolation_traced, LsParams, TestVectorSet};
use bamg::krylov::{pgmres_solve, KrylovParams};
use bamg::mle::{normalized_residual, run_setup_with};
use common::{dense_stationary, eigvec_error, random_chain, rel_err};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TANDEM: (f64, f64, f64) = (11.0 / 31.0, 10.0 / 31.0, 10.0 / 31.0);
const PLANAR_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Verdict {
    pass: bool,
    detail: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { pass: true, detail: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: String) {
        if !ok {
            self.pass = false;
        }
        self.detail.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, msg: String) {
        self.detail.push(format!("     {msg}"));
    }
}

fn tandem(n: usize) -> ProblemSpec {
    ProblemSpec::Tandem { n, mu: TANDEM.0, mu_x: TANDEM.1, mu_y: TANDEM.2 }
}

fn solve(problem: ProblemSpec, mode: SolveMode, setup_cycles: usize) -> SolveReport {
    let mut cfg = RunConfig::new(problem);
    cfg.mode = mode;
    cfg.mle.setup_cycles = setup_cycles;
    run(&cfg).unwrap_or_else(|e| panic!("{}: {e}", cfg.problem.label()))
}

fn within_2x(got: usize, want: usize) -> bool {
    2 * got >= want && got <= 2 * want
}

fn c1_oracle() -> Verdict {
    let mut v = Verdict::new();
    let mut problems = vec![
        ProblemSpec::Uniform { n: 9 },
        ProblemSpec::Uniform { n: 17 },
        ProblemSpec::Uniform { n: 33 },
        tandem(9),
        tandem(17),
        tandem(33),
    ];
    for n in [256, 512, 1024] {
        problems.extend(PLANAR_SEEDS.iter().map(|&seed| ProblemSpec::Planar { n, seed }));
    }
    for p in problems {
        let start = Instant::now();
        let want = dense_stationary(&p.build().unwrap().a);
        for mode in [SolveMode::Mle, SolveMode::Pgmres] {
            let rep = solve(p.clone(), mode, 1);
            let err = rel_err(&rep.x, &want);
            let positive = rep.x.iter().all(|&x| x > 0.0);
            v.check(
                rep.converged && positive && err <= 1e-6,
                format!("{} {mode}: rel err {err:.2e}", p.label()),
            );
        }
        let t = start.elapsed();
        v.check(t <= Duration::from_secs(60), format!("{} case time {:.1?}", p.label(), t));
    }
    v
}

/// Criteria 2 and 3 share the layout; returns the MLE and pGMRES reports for
/// reuse by the complexity check.
fn lattice_table(
    v: &mut Verdict,
    spec: fn(usize) -> ProblemSpec,
    mle_want: [usize; 4],
    gmres_want: [usize; 4],
    gmres_setup: [usize; 4],
) -> Vec<SolveReport> {
    let mut out = Vec::new();
    for (i, n) in [17, 33, 65, 129].into_iter().enumerate() {
        let m = solve(spec(n), SolveMode::Mle, 1);
        v.check(
            m.converged && m.final_residual <= 1e-8 && within_2x(m.setup_cycles, mle_want[i]),
            format!("N={n} MLE {} cycles (ref {}), ||Bx|| {:.1e}", m.setup_cycles, mle_want[i], m.final_residual),
        );
        let g = solve(spec(n), SolveMode::Pgmres, gmres_setup[i]);
        let it = g.iterations.unwrap();
        v.check(
            g.converged && within_2x(it, gmres_want[i]),
            format!(
                "N={n} pGMRES {it} iterations after {} setup (ref {}), ||Bx|| {:.1e}",
                g.setup_cycles, gmres_want[i], g.final_residual
            ),
        );
        out.push(m);
        out.push(g);
    }
    out
}

fn c2_uniform(reports: &mut Vec<SolveReport>) -> Verdict {
    let mut v = Verdict::new();
    let start = Instant::now();
    *reports = lattice_table(&mut v, |n| ProblemSpec::Uniform { n }, [10, 9, 10, 11], [7, 8, 10, 10], [1, 1, 1, 2]);
    let t = start.elapsed();
    v.check(t <= Duration::from_secs(300), format!("total time {t:.1?}"));
    v
}

fn c3_tandem() -> Verdict {
    let mut v = Verdict::new();
    lattice_table(&mut v, tandem, [8, 8, 8, 8], [6, 6, 6, 7], [1, 1, 1, 1]);
    v
}

fn c4_planar() -> Verdict {
    let mut v = Verdict::new();
    for (n, want) in [(256, 8), (512, 10), (1024, 10), (2048, 11)] {
        let mut its: Vec<usize> = PLANAR_SEEDS
            .iter()
            .map(|&seed| {
                let r = solve(ProblemSpec::Planar { n, seed }, SolveMode::Pgmres, 1);
                if r.converged {
                    r.iterations.unwrap()
                } else {
                    usize::MAX
                }
            })
            .collect();
        let raw = its.clone();
        its.sort_unstable();
        let med = its[its.len() / 2];
        v.check(within_2x(med, want), format!("n={n} median {med} (ref {want}), per seed {raw:?}"));
    }
    v
}

fn c5_complexity(reports: &[SolveReport]) -> Verdict {
    let mut v = Verdict::new();
    for r in reports {
        let oc = r.operator_complexity.unwrap();
        v.check(oc <= 1.8, format!("{} {}: {oc:.3} over {} levels", r.label, r.mode, r.levels.len()));
    }
    v
}

fn c6_eigenvectors() -> Verdict {
    let mut v = Verdict::new();
    let prob = tandem(129).build().unwrap();
    let b = prob.b();
    let exact = common::smallest_eigenpairs(&b, 6, 20, -1e-4, 1e-11);
    v.note(format!(
        "reference eigenvalues {:?}",
        exact.iter().map(|e| format!("{:.4e}", e.0.re)).collect::<Vec<_>>()
    ));
    let errors = |seed: u64| {
        let mut cfg = RunConfig::new(tandem(129));
        cfg.mle.seed = seed;
        let (p, _) = prepare(&cfg).unwrap();
        let out = run_setup_with(&p, cfg.mle, cfg.coarsening_mode(), true).unwrap();
        let errs: Vec<f64> = out.eigen.pairs.iter().zip(&exact).map(|(q, (_, z))| eigvec_error(&q.v, z)).collect();
        (out, errs)
    };
    let cfg = RunConfig::new(tandem(129));
    let (out, errs) = errors(cfg.mle.seed);
    let levels = out.hierarchy.num_levels();
    v.check(out.converged && levels == 6, format!("MLE converged in {} cycles on {levels} levels", out.cycles()));
    let r1 = normalized_residual(&b, &out.x0);
    v.check(r1 <= 1e-7, format!("mode 1 residual ||Bv_1|| {r1:.2e}"));
    let fmt = |e: &[f64]| e.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ");
    let ordered = errs.len() == 6 && errs.windows(2).all(|w| w[1] >= w[0]);
    v.check(ordered, format!("||v_i^L - v_i|| non-decreasing: {}", fmt(&errs)));
    for seed in [1, 2, 3] {
        let (_, e) = errors(seed);
        let ord = e.windows(2).all(|w| w[1] >= w[0]);
        v.note(format!("(info) seed {seed}: {} ordered={ord}", fmt(&e)));
    }
    v
}

fn check_hierarchy(v: &mut Verdict, label: &str, h: &Hierarchy, caliber: usize) {
    let worst = h
        .column_sum_defects()
        .iter()
        .zip(h.levels())
        .map(|(d, l)| d / (1e-12 * l.n() as f64))
        .fold(0.0, f64::max);
    v.check(worst <= 1.0, format!("{label}: B_l^t 1 = 0 on all levels (defect/(1e-12 n) max {worst:.2e})"));
    let mut ok = true;
    for lev in &h.levels()[..h.num_levels() - 1] {
        let tr = lev.transfer.as_ref().unwrap();
        for i in 0..lev.n() {
            let (cols, vals) = tr.p.row(i);
            ok &= match tr.part.coarse_index(i) {
                Some(k) => cols == [k] && vals == [1.0],
                None => !cols.is_empty() && cols.len() <= caliber,
            };
        }
    }
    v.check(ok, format!("{label}: P identity on C rows, 1..={caliber} entries on F rows"));
}

fn rank(m: &Mat<f64>) -> usize {
    let s = dense::singular_values(m).unwrap();
    let top = s.iter().cloned().fold(0.0, f64::max);
    s.iter().filter(|&&x| x > 1e-10 * top).count()
}

fn c7_properties() -> Verdict {
    let mut v = Verdict::new();

    let mut bad = Vec::new();
    for n in 2..24 {
        for p in [
            gen_uniform_network(n).unwrap(),
            gen_tandem_queue(n, TANDEM.0, TANDEM.1, TANDEM.2).unwrap(),
            gen_planar_graph(4 + 8 * n, n as u64).unwrap(),
        ] {
            let defect = p.a.column_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
            if !validate(&p).passed() || defect > 1e-13 * p.n() as f64 {
                bad.push(p.n());
            }
        }
    }
    v.check(bad.is_empty(), format!("66 generated chains column-stochastic and irreducible {bad:?}"));

    let specs = [
        ProblemSpec::Uniform { n: 17 },
        ProblemSpec::Uniform { n: 33 },
        tandem(17),
        tandem(33),
        ProblemSpec::Planar { n: 512, seed: 1 },
        ProblemSpec::Planar { n: 1024, seed: 2 },
    ];
    for spec in specs {
        let cfg = RunConfig::new(spec);
        let (p, _) = prepare(&cfg).unwrap();
        let out = setup(&cfg, &p).unwrap();
        check_hierarchy(&mut v, &cfg.problem.label(), &out.hierarchy, cfg.mle.ls.caliber);
        let g = pgmres_solve(&out.hierarchy, &out.x0, &KrylovParams::default()).unwrap();
        let mono = g.history.windows(2).all(|w| w[1].precond_residual <= w[0].precond_residual * (1.0 + 1e-12));
        v.check(mono && g.converged, format!("{}: GMRES residuals monotone over {} iterations", cfg.problem.label(), g.iterations));
    }

    let b = gen_uniform_network(9).unwrap().b();
    let part = full_coarsen_grid(9).unwrap();
    let mut worst_rise = 0.0_f64;
    for seed in 0..20u64 {
        for caliber in 1..5 {
            let tvs = TestVectorSet::random_positive(81, 1 + (seed as usize % 7), seed).unwrap();
            let ls = LsParams { caliber, ..Default::default() };
            let (_, fits) = build_interpolation_traced(&b, &part, &tvs, &ls).unwrap();
            for f in &fits {
                for w in f.trace.windows(2) {
                    worst_rise = worst_rise.max((w[1] - w[0]) / f.trace[0].max(f64::MIN_POSITIVE));
                }
            }
        }
    }
    v.check(worst_rise <= 1e-12, format!("greedy LS objective non-increasing (max relative rise {worst_rise:.1e})"));

    let mut cr_bad = Vec::new();
    for seed in 0..20u64 {
        let n = 100 + 20 * seed as usize;
        let b = gen_planar_graph(n, seed).unwrap().b();
        let all: Vec<usize> = (0..n).collect();
        let c0 = greedy_independent_set(&b, &all);
        let p = CrParams::default();
        let out = cr_coarsen(&b, &c0, &p, seed).unwrap();
        if !(out.exhausted || out.rho <= p.theta) {
            cr_bad.push((n, out.rho));
        }
    }
    v.check(cr_bad.is_empty(), format!("CR exits with rho_f <= theta on 20 planar graphs {cr_bad:?}"));

    let mut rank_bad = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50u64 {
        let n = rng.random_range(3..=200);
        let a = random_chain(n, rng.random_range(0..4), false, case);
        let bm = dense::to_mat(&a.identity_minus().unwrap());
        let g = Mat::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let bg = &bm * &g;
        let x = dense_stationary(&a);
        let aug = Mat::<f64>::from_fn(n, n + 1, |i, j| if j < n { bg[(i, j)] } else { x[i] });
        let r = rank(&bg);
        if r != n - 1 || rank(&aug) != n {
            rank_bad.push(n);
        }
    }
    v.check(rank_bad.is_empty(), format!("kernel outside range on 50 random chains {rank_bad:?}"));

    let mut worst = 0.0_f64;
    for seed in 0..20u64 {
        let a = random_chain(10 + 5 * seed as usize, 3, true, seed);
        let d = a.diagonal();
        let x = dense_stationary(&a);
        let y = dense_stationary(&strip_self_transitions(&a).unwrap());
        let want: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| (1.0 - di) * xi).collect();
        worst = worst.max(rel_err(&y, &want));
    }
    v.check(worst <= 1e-9, format!("y = (I-D)x after stripping self-transitions (max rel err {worst:.1e})"));
    v
}

fn c8_spectrum() -> Verdict {
    let mut v = Verdict::new();
    let start = Instant::now();
    let cfg = RunConfig::new(tandem(33));
    let (p, _) = prepare(&cfg).unwrap();
    let ev = spectrum(&dense_operator(&p.a, None, Operator::Transition).unwrap()).unwrap();
    let rmax = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let at_one = ev.iter().filter(|z| (*z - 1.0).norm() <= 1e-10).count();
    v.check(rmax <= 1.0 + 1e-10, format!("spectral radius of A {rmax:.15}"));
    v.check(at_one == 1, format!("{at_one} eigenvalue(s) of A within 1e-10 of 1"));
    let out = setup(&cfg, &p).unwrap();
    let ev = spectrum(&dense_operator(&p.a, Some(&out.hierarchy), Operator::Preconditioned).unwrap()).unwrap();
    let mut mags: Vec<f64> = ev.iter().map(|z| z.norm()).collect();
    mags.sort_by(f64::total_cmp);
    let at_zero = mags.iter().filter(|&&m| m <= 1e-8).count();
    v.check(at_zero == 1, format!("{at_zero} eigenvalue(s) of CB within 1e-8 of 0 (two smallest |z|: {:.1e}, {:.1e})", mags[0], mags[1]));
    let t = start.elapsed();
    v.check(t <= Duration::from_secs(600), format!("time {t:.1?}"));
    v
}

fn main() -> ExitCode {
    let mut uniform_reports = Vec::new();
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut record = |name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        for d in &v.detail {
            println!("    {d}");
        }
        println!("{} {name} ({:.1?})", if v.pass { "PASS" } else { "FAIL" }, start.elapsed());
        results.push((name, v));
    };
    record("C1 oracle equivalence", &mut c1_oracle);
    record("C2 uniform network table", &mut || c2_uniform(&mut uniform_reports));
    record("C3 tandem queue table", &mut c3_tandem);
    record("C4 planar graph table", &mut c4_planar);
    record("C5 operator complexity", &mut || c5_complexity(&uniform_reports));
    record("C6 tandem eigenvector accuracy", &mut c6_eigenvectors);
    record("C7 property suites", &mut c7_properties);
    record("C8 spectrum sanity", &mut c8_spectrum);

    println!();
    for (name, v) in &results {
        println!("{} {name}", if v.pass { "PASS" } else { "FAIL" });
    }
    let failed = results.iter().filter(|(_, v)| !v.pass).count();
    println!("{}/{} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
