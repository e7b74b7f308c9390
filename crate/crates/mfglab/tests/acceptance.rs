//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Benchmark: `psi = cos(2 pi x) / 2`, quadratic congestion, uniform start,
//! `d = 1`, `T = 1`, `Nx = Nt = 64` unless a criterion says otherwise.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use mfglab::RunConfig;
use mfglab_core::analysis::{computationzeta_audit, run_analysis, AnalysisConfig, AnalysisReport};
use mfglab_core::congestion::{run_model_suite, CongestionModel};
use mfglab_core::grid::{Grid, Layout, ScalarField, VectorField};
use mfglab_core::solver::{gap_decomposition, mfg_residuals, solve, DualState, FourierSeries, ProblemSpec, SolveOutcome, SolverKnobs};
use mfglab_core::transport::{metric_speed, w2_circle_measures, CircleMeasure, PrimalState, SpeedMethod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    passed: bool,
    detail: String,
}

fn line(passed: bool, detail: impl Into<String>) -> Line {
    Line { passed, detail: detail.into() }
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn benchmark_spec(nx: usize) -> ProblemSpec<f64> {
    let mut cfg = RunConfig::load(&config_path("benchmark.toml")).expect("benchmark config");
    cfg.nx = nx;
    cfg.nt = nx;
    cfg.problem().expect("benchmark problem")
}

struct Solved {
    spec: ProblemSpec<f64>,
    out: SolveOutcome<f64>,
    analysis: AnalysisReport,
}

/// Benchmark solves and analyses at every resolution, computed once.
struct Cache {
    bench: BTreeMap<usize, Solved>,
}

impl Cache {
    fn get(&mut self, nx: usize) -> &Solved {
        self.bench.entry(nx).or_insert_with(|| {
            let t = Instant::now();
            let spec = benchmark_spec(nx);
            let out = solve(&spec).expect("benchmark solve");
            let analysis = run_analysis(&spec, &out.primal, &out.dual, &AnalysisConfig::default()).expect("benchmark analysis");
            println!(
                "    (benchmark {nx}x{nx}: {} iterations, converged {}, {:.1} s)",
                out.report.iterations,
                out.report.converged,
                t.elapsed().as_secs_f64()
            );
            Solved { spec, out, analysis }
        })
    }
}

fn uniform_spec() -> ProblemSpec<f64> {
    RunConfig::load(&config_path("uniform.toml")).unwrap().problem().unwrap()
}

fn criterion_1() -> Line {
    let spec = uniform_spec();
    let psi = 0.3;
    let out = solve(&spec).unwrap();
    let r = &out.report;
    let dev = out.primal.m.data().iter().fold(0.0f64, |m, &x| m.max((x - 1.0).abs()));
    let hand_dual = DualState::from_potential(ScalarField::from_fn(&spec.grid, Layout::Nodes, |t, _| psi + (1.0 - t))).unwrap();
    let hand_primal = PrimalState::new(ScalarField::constant(&spec.grid, Layout::Nodes, 1.0), VectorField::zeros(&spec.grid, Layout::Intervals)).unwrap();
    let hand = gap_decomposition(&spec, &hand_primal, &hand_dual).unwrap();
    let p_dev = hand_dual.p.data().iter().fold(0.0f64, |m, &p| m.max((p - 1.0).abs()));
    let ok = dev <= 1e-3 && (r.b - (0.5 + psi)).abs() <= 1e-4 && r.gap <= 1e-5 && hand.gap.abs() <= 1e-9 && p_dev <= 1e-12;
    line(
        ok,
        format!("|m-1|_inf = {dev:.1e}, B = {:.8} (want {}), gap = {:.1e}, hand-built A+B = {:.1e}", r.b, 0.5 + psi, r.gap, hand.gap),
    )
}

/// Half the draws are far from optimal; the other half perturb the rest
/// state `m = 1`, `u = psi + (T - t) g(1)` so that `A + B` is small.
fn random_feasible_pair(rng: &mut ChaCha8Rng, dim: usize, model: CongestionModel<f64>) -> (ProblemSpec<f64>, PrimalState<f64>, DualState<f64>) {
    let tau = std::f64::consts::TAU;
    let near = rng.gen_bool(0.5);
    let spread = if near { 0.02 } else { 0.7 };
    let nx = if dim == 1 { 16 } else { 8 };
    let grid = Grid::<f64>::new(dim, nx, 8, 1.0).unwrap();
    let mut spec = ProblemSpec::from_series(grid, model, &FourierSeries::constant(0.0), None, SolverKnobs::default()).unwrap();
    let phase: f64 = rng.gen_range(0.0..1.0);
    let height = if near { 0.02 } else { 0.4 };
    spec.psi = grid.sample(|x| height * (tau * (x[0] + phase)).cos());
    let raw: Vec<f64> = (0..grid.points()).map(|_| rng.gen_range(1.0 - spread..1.0 + spread)).collect();
    let mass = raw.iter().sum::<f64>() * grid.cell_volume();
    spec.m0 = ScalarField::from_vec(&grid, Layout::Spatial, raw.iter().map(|x| x / mass).collect()).unwrap();
    let amp: f64 = rng.gen_range(-0.3..0.3) * if near { 0.05 } else { 1.0 };
    let mut w = VectorField::from_fn(&grid, Layout::Intervals, |t, x| [amp * (tau * x[0] + 5.0 * t).sin(), amp * (tau * x[1]).cos()]);
    let primal = loop {
        let st = PrimalState::from_momentum(&spec.m0, w.clone()).unwrap();
        if st.m.min() >= 0.0 {
            break st;
        }
        w.data_mut().iter_mut().for_each(|x| *x *= 0.5);
    };
    let rest = model.g(1.0).unwrap();
    let slope: f64 = if near { rest + rng.gen_range(-0.05..0.05) } else { rng.gen_range(0.0..2.0) };
    let bump: f64 = rng.gen_range(-0.5..0.5) * if near { 0.05 } else { 1.0 };
    let psi0 = spec.psi.slice(0).to_vec();
    let mut u = ScalarField::from_fn(&grid, Layout::Nodes, |t, x| slope * (1.0 - t) + bump * t * (1.0 - t) * (tau * x[0]).sin());
    for k in 0..=grid.nt() {
        for (v, p) in u.slice_mut(k).iter_mut().zip(&psi0) {
            *v += p;
        }
    }
    (spec, primal, DualState::from_potential(u).unwrap())
}

fn criterion_2() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let models = [CongestionModel::quadratic(), CongestionModel::power(1.5).unwrap(), CongestionModel::power(3.0).unwrap(), CongestionModel::entropy().unwrap()];
    let mut min_gap = f64::INFINITY;
    let mut worst_rel = 0.0f64;
    for trial in 0..100 {
        let dim = if trial % 4 == 3 { 2 } else { 1 };
        let (spec, primal, dual) = random_feasible_pair(&mut rng, dim, models[trial % 4]);
        let parts = gap_decomposition(&spec, &primal, &dual).unwrap();
        min_gap = min_gap.min(parts.gap);
        worst_rel = worst_rel.max(parts.identity_defect() / parts.a.abs().max(parts.b.abs()).max(1.0));
    }
    line(min_gap >= -1e-8 && worst_rel <= 1e-9, format!("100 pairs: min A+B = {min_gap:.3e}, worst identity defect {worst_rel:.1e} relative"))
}

fn suite_models() -> Vec<(&'static str, CongestionModel<f64>, Option<f64>)> {
    vec![
        ("quadratic", CongestionModel::quadratic(), Some(0.5)),
        ("power 1.5", CongestionModel::power(1.5).unwrap(), Some(1.0 / (2.0 * 3.0))),
        ("power 2", CongestionModel::power(2.0).unwrap(), Some(0.25)),
        ("power 3", CongestionModel::power(3.0).unwrap(), Some(1.0 / 6.0)),
        ("entropy", CongestionModel::entropy().unwrap(), None),
    ]
}

fn criteria_3_and_4() -> (Line, Line) {
    let mut qp_ok = true;
    let mut prox_ok = true;
    let mut qp_detail = Vec::new();
    let mut prox_worst = 0.0f64;
    for (name, model, want_c) in suite_models() {
        let rep = run_model_suite(&model, 3, 100_000, 1_000).unwrap();
        let find = |n: &str| rep.checks.iter().find(|c| c.name == n).expect("suite check");
        let qp = find("qp_lower_bound");
        let c_ok = match want_c {
            Some(c) => (rep.c - c).abs() < 1e-15,
            None => rep.c0.map_or(false, |c0| c0 > 0.0) && find("c0_positive").passed,
        };
        qp_ok &= qp.passed && qp.worst >= -1e-10 && c_ok;
        qp_detail.push(format!("{name}: c = {:.4}, min {:.1e}", rep.c, qp.worst));
        let prox = find("prox_brute_force");
        prox_ok &= prox.passed && prox.worst <= 1e-8;
        prox_worst = prox_worst.max(prox.worst);
    }
    (
        line(qp_ok, format!("1e5 samples per model; {}", qp_detail.join("; "))),
        line(prox_ok, format!("1e3 samples per model, worst |objective - brute-force minimum| {prox_worst:.1e}")),
    )
}

fn criterion_5(cache: &mut Cache) -> Line {
    let s = cache.get(64);
    let r = &s.out.report;
    let res = mfg_residuals(&s.spec, &s.out.primal, &s.out.dual, 1e-3).unwrap();
    let gap = r.gap.max(0.0);
    let ok = r.relative_gap <= 1e-4 && res.velocity <= 2.0 * gap + 1e-9 && res.price <= 1e-2;
    line(
        ok,
        format!(
            "relative gap {:.1e}; int m|v + grad u|^2 = {:.2e} vs 2 gap + 1e-9 = {:.2e}; |p - g(m)| on m > 1e-3 = {:.2e}",
            r.relative_gap,
            res.velocity,
            2.0 * gap + 1e-9,
            res.price
        ),
    )
}

fn criterion_6(cache: &mut Cache) -> Line {
    let slope = cache.get(64).analysis.translation.fit.slope;
    let order_ok = cache.get(64).analysis.translation.fit.at_least(1.8);
    let h1: Vec<f64> = [32, 64, 128].iter().map(|&n| cache.get(n).analysis.h1_space.max).collect();
    let (lo, hi) = h1.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let ratio = hi / lo;
    line(
        order_ok && ratio <= 1.5,
        format!("slope of |M(delta) - M(0)| at 64: {slope:.3?}; H1 quotient max at 32/64/128: {h1:.4?}, spread factor {ratio:.3}"),
    )
}

fn criterion_7(cache: &mut Cache) -> Line {
    let d64 = cache.get(64).analysis.d_series.dispersion;
    let d32 = cache.get(32).analysis.d_series.dispersion;
    line(d64 <= 0.05 && d64 < d32, format!("dispersion of D on [T/8, 7T/8]: {:.2}% at 64, {:.2}% at 32", 100.0 * d64, 100.0 * d32))
}

fn criterion_8(cache: &mut Cache) -> Line {
    let t = &cache.get(64).analysis.terminal;
    let scale = t.rhs.abs().max(1.0);
    let bench_ok = t.lhs <= t.rhs + 0.05 * scale;
    let spec = uniform_spec();
    let out = solve(&spec).unwrap();
    let uni = run_analysis(&spec, &out.primal, &out.dual, &AnalysisConfig::default()).unwrap();
    let uni_ok = uni.terminal.margin.abs() <= 1e-6;
    line(
        bench_ok && uni_ok,
        format!("benchmark: G(m_T) - D = {:.5} <= {:.5}; uniform margin {:.1e}", t.lhs, t.rhs, uni.terminal.margin),
    )
}

fn criterion_9(cache: &mut Cache) -> Line {
    let tt = &cache.get(64).analysis.time_translation;
    let order_ok = tt.fit.at_least(1.8);
    // the audit runs on the uniform optimum, m = 1 and w = 0
    let spec = uniform_spec();
    let rest = PrimalState::new(ScalarField::constant(&spec.grid, Layout::Nodes, 1.0), VectorField::zeros(&spec.grid, Layout::Intervals)).unwrap();
    let cfg = AnalysisConfig::default();
    let cutoff = cfg.cutoff(&spec.grid).unwrap();
    let audit = computationzeta_audit(&spec, &rest, &cutoff, &cfg.audit_steps(&spec.grid, &cutoff)).unwrap();
    let matched = audit.corrected_fit.at_least(1.8);
    let mismatched = audit.stated_fit.slope.map_or(false, |s| s <= 1.2 && s >= 0.8);
    line(
        order_ok && audit.selected == "corrected" && matched && mismatched,
        format!(
            "slope of |B(m^eps) - B(m)| at 64: {:.3?}; audit selects {}, matched-sign residual {}, mismatched-sign order {:.3?}",
            tt.fit.slope,
            audit.selected,
            if audit.corrected_fit.flat { "identically zero".to_string() } else { format!("order {:.3?}", audit.corrected_fit.slope) },
            audit.stated_fit.slope
        ),
    )
}

fn circle_dist2(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    let d = d.min(1.0 - d);
    d * d
}

fn lp_w2(xs: &[f64], a: &[f64], ys: &[f64], b: &[f64]) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = xs.iter().map(|&x| ys.iter().map(|&y| lp.add_var(circle_dist2(x, y), (0.0, f64::INFINITY))).collect()).collect();
    for (i, row) in vars.iter().enumerate() {
        lp.add_constraint(row.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, a[i]);
    }
    for j in 0..ys.len() - 1 {
        lp.add_constraint(vars.iter().map(|row| (row[j], 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, b[j]);
    }
    lp.solve().expect("transport LP").objective().max(0.0).sqrt()
}

fn criterion_10(cache: &mut Cache) -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let atoms = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(1..=16);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        (xs, raw.iter().map(|w| w / total).collect::<Vec<f64>>())
    };
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (xs, a) = atoms(&mut rng);
        let (ys, b) = atoms(&mut rng);
        let fast = w2_circle_measures(&CircleMeasure::from_atoms(&xs, &a).unwrap(), &CircleMeasure::from_atoms(&ys, &b).unwrap());
        worst = worst.max((fast - lp_w2(&xs, &a, &ys, &b)).abs());
    }
    let mut speed_excess = f64::NEG_INFINITY;
    let spec = uniform_spec();
    let uni = solve(&spec).unwrap();
    for nx in [32, 64, 128] {
        let st = &cache.get(nx).out.primal;
        speed_excess = speed_excess.max(max_w2_minus_kinetic(st));
    }
    speed_excess = speed_excess.max(max_w2_minus_kinetic(&uni.primal));
    line(
        worst <= 1e-9 && speed_excess <= 1e-6,
        format!("100 LP pairs: worst |W2 - LP| = {worst:.1e}; max (W2 speed - kinetic speed) over solved instances = {speed_excess:.2e}"),
    )
}

fn max_w2_minus_kinetic(st: &PrimalState<f64>) -> f64 {
    let w2 = metric_speed(st, SpeedMethod::Wasserstein).unwrap();
    let kin = metric_speed(st, SpeedMethod::Kinetic).unwrap();
    w2.iter().zip(&kin).fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b))
}

fn run_cli(args: &[&str], threads: &str) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_mfglab"))
        .args(args)
        .env("MFGLAB_THREADS", threads)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .expect("mfglab binary");
    status.code().unwrap_or(-1)
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_11() -> Line {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config_path("benchmark.toml")).unwrap();
    let mut runs = Vec::new();
    let mut codes = Vec::new();
    for (i, threads) in ["1", "2"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("benchmark.toml");
        std::fs::write(&cfg, format!("output = \"out\"\n{text}")).unwrap();
        let out = dir.join("out");
        codes.push(run_cli(&["solve", cfg.to_str().unwrap()], threads));
        codes.push(run_cli(&["analyze", out.to_str().unwrap(), cfg.to_str().unwrap()], threads));
        runs.push(files_under(&out));
    }
    let same = runs[0] == runs[1];
    let count = runs[0].len();
    line(
        same && codes.iter().all(|&c| c == 0) && count > 8,
        format!("{count} output files per run, bit-identical across two runs (1 and 2 workers): {same}; exit codes {codes:?}"),
    )
}

fn main() {
    let start = Instant::now();
    let mut cache = Cache { bench: BTreeMap::new() };
    let mut lines: Vec<(usize, &str, Line)> = Vec::new();
    let mut report = |id: usize, title: &'static str, l: Line| {
        println!("[{}] {id:>2}. {title}: {}", if l.passed { "PASS" } else { "FAIL" }, l.detail);
        lines.push((id, title, l));
    };
    report(1, "analytic optimum (uniform)", criterion_1());
    report(2, "weak duality and gap decomposition", criterion_2());
    let (c3, c4) = criteria_3_and_4();
    report(3, "(QP) inequality suite", c3);
    report(4, "prox oracle", c4);
    report(5, "benchmark MFG system", criterion_5(&mut cache));
    report(6, "space regularity", criterion_6(&mut cache));
    report(7, "constancy of D", criterion_7(&mut cache));
    report(8, "terminal inequality", criterion_8(&mut cache));
    report(9, "time regularity and sign audit", criterion_9(&mut cache));
    report(10, "W2 oracle and metric speed", criterion_10(&mut cache));
    report(11, "determinism", criterion_11());
    let failed: Vec<usize> = lines.iter().filter(|(_, _, l)| !l.passed).map(|(id, _, _)| *id).collect();
    println!("acceptance: {}/{} criteria passed in {:.0} s", lines.len() - failed.len(), lines.len(), start.elapsed().as_secs_f64());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
