//! The three subcommands. Each returns the process exit status.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use mfglab_core::analysis::{run_analysis, AnalysisReport};
use mfglab_core::congestion::{run_model_suite, ModelSuiteReport};
use mfglab_core::grid::{read_field, read_vector_field, write_field, write_vector_field, Layout};
use mfglab_core::solver::{evaluate_b, mfg_residuals, solve, SolveReport};
use mfglab_core::transport::{flow_trajectories, metric_speed, SpeedMethod};
use mfglab_core::{CongestionModel, DualState, MfgError, PrimalState, ProblemSpec, ScalarField, VectorField};
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

pub const FIELD_FILES: [&str; 4] = ["m.mfg", "w.mfg", "u.mfg", "p.mfg"];

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => e.fmt(f),
            CliError::Run(s) => f.write_str(s),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<MfgError> for CliError {
    fn from(e: MfgError) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Run(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(io_at(path))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SolveFile<'a> {
    config: &'a RunConfig,
    report: &'a SolveReport,
}

/// Start points spread evenly along the first axis (the diagonal in 2-D).
fn trajectory_starts(count: usize, dim: usize) -> Vec<[f64; 2]> {
    (0..count)
        .map(|i| {
            let x = i as f64 / count as f64;
            if dim == 1 {
                [x, 0.0]
            } else {
                [x, x]
            }
        })
        .collect()
}

/// Solves and dumps `m, w, u, p`, the report and the agent paths.
pub fn cmd_solve(cfg: &RunConfig) -> Result<i32, CliError> {
    let spec = cfg.problem()?;
    let out = solve(&spec)?;
    let dir = &cfg.output;
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let mut f = create(&dir.join("m.mfg"))?;
    write_field(&mut f, &out.primal.m)?;
    f.flush()?;
    let mut f = create(&dir.join("w.mfg"))?;
    write_vector_field(&mut f, &out.primal.w)?;
    f.flush()?;
    let mut f = create(&dir.join("u.mfg"))?;
    write_field(&mut f, &out.dual.u)?;
    f.flush()?;
    let mut f = create(&dir.join("p.mfg"))?;
    write_field(&mut f, &out.dual.p)?;
    f.flush()?;
    write_json(&dir.join("solve_report.json"), &SolveFile { config: cfg, report: &out.report })?;

    if cfg.trajectories > 0 {
        let tdir = dir.join("trajectories");
        fs::create_dir_all(&tdir).map_err(io_at(&tdir))?;
        let paths = flow_trajectories(&out.dual.u, &trajectory_starts(cfg.trajectories, cfg.d), 8)?;
        for (i, path) in paths.iter().enumerate() {
            let mut f = create(&tdir.join(format!("traj_{i:03}.csv")))?;
            path.write_csv(&mut f, cfg.d)?;
            f.flush()?;
        }
    }

    let r = &out.report;
    println!(
        "{} after {} iterations: gap {:.3e} (relative {:.3e}), B = {:.10}",
        if r.converged { "converged" } else { "NOT converged" },
        r.iterations,
        r.gap,
        r.relative_gap,
        r.b
    );
    println!("states written to {}", dir.display());
    Ok(if r.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn open_field(dir: &Path, name: &str) -> Result<File, CliError> {
    let path = dir.join(name);
    File::open(&path).map_err(|e| CliError::Run(format!("missing dump {}: {e}", path.display())))
}

fn read_scalar(dir: &Path, name: &str) -> Result<ScalarField, CliError> {
    read_field(open_field(dir, name)?).map_err(|e| CliError::Run(format!("{name}: {e}")))
}

/// Loads the four dumps of a solution directory and checks them against the config grid.
pub fn load_states(dir: &Path, spec: &ProblemSpec) -> Result<(PrimalState, DualState), CliError> {
    let m = read_scalar(dir, "m.mfg")?;
    let w: VectorField = read_vector_field(open_field(dir, "w.mfg")?).map_err(|e| CliError::Run(format!("w.mfg: {e}")))?;
    let u = read_scalar(dir, "u.mfg")?;
    let p = read_scalar(dir, "p.mfg")?;
    let expected = [(m.grid(), m.layout(), Layout::Nodes, "m.mfg"), (u.grid(), u.layout(), Layout::Nodes, "u.mfg"), (p.grid(), p.layout(), Layout::Intervals, "p.mfg")];
    for (grid, layout, want, name) in expected {
        if !grid.same_shape(&spec.grid) || grid.horizon() != spec.grid.horizon() || layout != want {
            return Err(CliError::Run(format!("{name} does not match the grid and layout of the config")));
        }
    }
    if !w.grid().same_shape(&spec.grid) || w.layout() != Layout::Intervals {
        return Err(CliError::Run("w.mfg does not match the grid and layout of the config".into()));
    }
    Ok((PrimalState::new(m, w)?, DualState { u, p }))
}

#[derive(Serialize)]
struct Residuals {
    rho: f64,
    price: f64,
    velocity: f64,
    qp: f64,
}

/// Largest `W2 speed - kinetic speed` over the intervals (d = 1 only).
#[derive(Serialize)]
struct SpeedComparison {
    max_w2_minus_kinetic: f64,
}

#[derive(Serialize)]
struct AnalyzeFile<'a> {
    analysis: &'a AnalysisReport,
    residuals: Residuals,
    speeds: Option<SpeedComparison>,
}

fn write_curve(path: &Path, header: &str, rows: impl Iterator<Item = (f64, f64)>) -> Result<(), CliError> {
    let mut f = create(path)?;
    writeln!(f, "{header}")?;
    for (a, b) in rows {
        writeln!(f, "{a},{b}")?;
    }
    f.flush()?;
    Ok(())
}

/// Runs the regularity experiments on the dumps in `dir`.
pub fn cmd_analyze(dir: &Path, cfg: &RunConfig) -> Result<i32, CliError> {
    let spec = cfg.problem()?;
    let (primal, dual) = load_states(dir, &spec)?;
    let report = run_analysis(&spec, &primal, &dual, &cfg.analysis)?;
    let res = mfg_residuals(&spec, &primal, &dual, cfg.analysis.rho)?;
    let speeds = if spec.grid.dim() == 1 {
        let w2 = metric_speed(&primal, SpeedMethod::Wasserstein)?;
        let kin = metric_speed(&primal, SpeedMethod::Kinetic)?;
        let worst = w2.iter().zip(&kin).fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
        Some(SpeedComparison { max_w2_minus_kinetic: worst })
    } else {
        None
    };
    let file = AnalyzeFile {
        analysis: &report,
        residuals: Residuals { rho: cfg.analysis.rho, price: res.price, velocity: res.velocity, qp: res.qp },
        speeds,
    };
    write_json(&dir.join("analysis_report.json"), &file)?;

    let b0 = evaluate_b(&spec, &primal);
    let tr = &report.translation;
    write_curve(&dir.join("translation.csv"), "delta,M", std::iter::once((0.0, b0)).chain(tr.deltas.iter().copied().zip(tr.values.iter().copied())))?;
    let tt = &report.time_translation;
    write_curve(&dir.join("time_translation.csv"), "eps,B", std::iter::once((0.0, b0)).chain(tt.eps.iter().copied().zip(tt.values.iter().copied())))?;
    let ds = &report.d_series;
    write_curve(&dir.join("d_series.csv"), "t,D", ds.times.iter().copied().zip(ds.values.iter().copied()))?;

    for c in &report.checks {
        println!("{:<30} {}  value {:.6e}  threshold {:.6e}", c.name, if c.passed { "ok  " } else { "FAIL" }, c.value, c.threshold);
    }
    let failing = report.failing();
    if failing.is_empty() {
        println!("all {} checks passed", report.checks.len());
        Ok(EXIT_OK)
    } else {
        for c in &failing {
            eprintln!("analysis check failed: {} ({})", c.name, c.detail);
        }
        Ok(EXIT_CHECK_FAILED)
    }
}

/// `quadratic`, `entropy` or `power:<q>`.
pub fn parse_model(name: &str) -> Result<CongestionModel, CliError> {
    let (kind, q) = match name.split_once(':') {
        Some((k, q)) => {
            let q: f64 = q.parse().map_err(|_| CliError::Run(format!("--model {name}: q must be a number")))?;
            (k, Some(q))
        }
        None => (name, None),
    };
    CongestionModel::from_name(kind, q).map_err(|e| CliError::Run(format!("--model {name}: {e}")))
}

pub const DEFAULT_MODELS: [&str; 5] = ["quadratic", "power:1.5", "power:2", "power:3", "entropy"];

/// Property suite of every requested model; prints the certified constants.
pub fn cmd_check_models(models: &[String], seed: u64, samples: usize, prox_samples: usize) -> Result<(i32, Vec<ModelSuiteReport>), CliError> {
    let names: Vec<String> = if models.is_empty() { DEFAULT_MODELS.iter().map(|s| s.to_string()).collect() } else { models.to_vec() };
    let mut reports = Vec::new();
    let mut all = true;
    for name in &names {
        let model = parse_model(name)?;
        let rep = run_model_suite(&model, seed, samples, prox_samples)?;
        let c0 = rep.c0.map(|c| format!(", c0 = {c:.6}")).unwrap_or_default();
        println!("{name}: {} (c = {}{c0}, Hpol C = {:.6})", if rep.passed() { "PASS" } else { "FAIL" }, rep.c, rep.hpol_c);
        for chk in rep.checks.iter().filter(|c| !c.passed) {
            println!("  failed {}: worst {:e} ({})", chk.name, chk.worst, chk.detail);
        }
        all &= rep.passed();
        reports.push(rep);
    }
    Ok((if all { EXIT_OK } else { EXIT_CHECK_FAILED }, reports))
}
