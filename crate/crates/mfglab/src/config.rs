//! Run configuration (TOML).
//!
//! ```toml
//! d = 1
//! Nx = 64
//! Nt = 64
//! T = 1.0
//! model = "quadratic"      # or "power" (needs q) or "entropy"
//! r = 0.1
//! max_iter = 20000
//! tol = 1e-6
//! psi = { c0 = 0.0, terms = [{ k = [1], a = 0.5, b = 0.0 }] }
//! m0 = "uniform"
//!
//! [analysis]
//! speed = "kinetic"
//! ```
//!
//! `psi` may also be a plain number. `output` (default `<stem>_run` next to
//! the config file), `seed` and `trajectories` are optional.

use std::path::{Path, PathBuf};

use mfglab_core::analysis::AnalysisConfig;
use mfglab_core::solver::FourierSeries;
use mfglab_core::{CongestionModel, Grid, ProblemSpec, SolverKnobs};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

fn default_r() -> f64 {
    SolverKnobs::default().r
}

fn default_max_iter() -> usize {
    SolverKnobs::default().max_iter
}

fn default_tol() -> f64 {
    SolverKnobs::default().tol
}

fn default_trajectories() -> usize {
    8
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    d: usize,
    #[serde(rename = "Nx")]
    nx: usize,
    #[serde(rename = "Nt")]
    nt: usize,
    #[serde(rename = "T")]
    horizon: f64,
    model: String,
    #[serde(default)]
    q: Option<f64>,
    #[serde(default = "default_r")]
    r: f64,
    #[serde(default = "default_max_iter")]
    max_iter: usize,
    #[serde(default = "default_tol")]
    tol: f64,
    psi: toml::Value,
    #[serde(default)]
    m0: Option<toml::Value>,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_trajectories")]
    trajectories: usize,
    #[serde(default)]
    analysis: AnalysisConfig,
}

/// Where the initial density comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum InitialDensity {
    Uniform,
    Series(FourierSeries),
}

/// A validated configuration; every key has been checked before any compute.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub d: usize,
    #[serde(rename = "Nx")]
    pub nx: usize,
    #[serde(rename = "Nt")]
    pub nt: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub model: String,
    pub q: Option<f64>,
    pub r: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub psi: FourierSeries,
    pub m0: InitialDensity,
    #[serde(skip)]
    pub output: PathBuf,
    pub seed: u64,
    pub trajectories: usize,
    pub analysis: AnalysisConfig,
}

fn series(value: toml::Value, key: &str) -> Result<FourierSeries, ConfigError> {
    match value {
        toml::Value::Float(c) => Ok(FourierSeries::constant(c)),
        toml::Value::Integer(c) => Ok(FourierSeries::constant(c as f64)),
        toml::Value::Table(_) => value.try_into().map_err(|e: toml::de::Error| err(format!("{key}: {}", e.message()))),
        other => Err(err(format!("{key} must be a number or a Fourier table {{ c0, terms }}, got {}", other.type_str()))),
    }
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path, stem: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| err(e.message().to_string()))?;
        let psi = series(raw.psi, "psi")?;
        let m0 = match raw.m0 {
            None => InitialDensity::Uniform,
            Some(toml::Value::String(s)) if s == "uniform" => InitialDensity::Uniform,
            Some(toml::Value::String(s)) => return Err(err(format!("m0 must be \"uniform\" or a Fourier table, got {s:?}"))),
            Some(v) => InitialDensity::Series(series(v, "m0")?),
        };
        if raw.q.is_some() && raw.model != "power" {
            return Err(err(format!("q is only read by model = \"power\", not {:?}", raw.model)));
        }
        let output = match raw.output {
            Some(p) if p.is_absolute() => p,
            Some(p) => base.join(p),
            None => base.join(format!("{stem}_run")),
        };
        let cfg = RunConfig {
            d: raw.d,
            nx: raw.nx,
            nt: raw.nt,
            horizon: raw.horizon,
            model: raw.model,
            q: raw.q,
            r: raw.r,
            max_iter: raw.max_iter,
            tol: raw.tol,
            psi,
            m0,
            output,
            seed: raw.seed,
            trajectories: raw.trajectories,
            analysis: raw.analysis,
        };
        let spec = cfg.problem()?;
        cfg.analysis.validate_on(&spec.grid).map_err(|e| err(format!("analysis: {}", strip(e))))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mfglab");
        Self::parse(&text, &base, stem)
    }

    pub fn problem(&self) -> Result<ProblemSpec, ConfigError> {
        let grid = Grid::new(self.d, self.nx, self.nt, self.horizon).map_err(|e| err(strip(e)))?;
        let model = CongestionModel::from_name(&self.model, self.q).map_err(|e| err(strip(e)))?;
        if !(self.tol > 0.0) {
            return Err(err(format!("tol > 0 required, got {}", self.tol)));
        }
        let knobs = SolverKnobs { r: self.r, max_iter: self.max_iter, tol: self.tol };
        let m0 = match &self.m0 {
            InitialDensity::Uniform => None,
            InitialDensity::Series(s) => Some(s),
        };
        ProblemSpec::from_series(grid, model, &self.psi, m0, knobs).map_err(|e| err(strip(e)))
    }
}

/// Drops the error-kind prefix so the message starts at the key.
fn strip(e: mfglab_core::MfgError) -> String {
    match e {
        mfglab_core::MfgError::InvalidParameter(s) | mfglab_core::MfgError::ShapeMismatch(s) => s,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "d = 1\nNx = 32\nNt = 32\nT = 1.0\nmodel = \"quadratic\"\npsi = 0.2\n";

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, Path::new("/tmp/x"), "case")
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse(BASE).unwrap();
        assert_eq!(cfg.m0, InitialDensity::Uniform);
        assert_eq!(cfg.output, Path::new("/tmp/x/case_run"));
        assert_eq!(cfg.psi, FourierSeries::constant(0.2));
        assert_eq!(cfg.analysis, AnalysisConfig::default());
    }

    #[test]
    fn messages_name_the_key() {
        let cases = [
            (BASE.replace("Nx = 32", "Nx = 2"), "Nx ≥ 4"),
            (BASE.replace("Nt = 32", "Nt = 3"), "Nt ≥ 4"),
            (BASE.replace("T = 1.0", "T = -1.0"), "T"),
            (format!("{BASE}colour = 3\n"), "colour"),
            (BASE.replace("d = 1\n", ""), "d"),
            (format!("{BASE}q = 2.0\n"), "q is only read"),
            (BASE.replace("\"quadratic\"", "\"power\""), "requires key q"),
            (format!("{BASE}m0 = \"peaked\"\n"), "m0"),
            (format!("{BASE}m0 = {{ c0 = 2.0 }}\n"), "unit mass"),
            (BASE.replace("psi = 0.2", "psi = { c0 = 0.0, terms = [{ k = [1, 1], a = 1.0, b = 0.0 }] }"), "psi"),
            (format!("{BASE}[analysis]\nspeed = \"fast\"\n"), "speed"),
            (format!("{BASE}[analysis]\nwindow = 2\n"), "window"),
            (format!("{BASE}[analysis]\neps = [1.0, 16.0]\n"), "eps = 16 ht"),
            (format!("{BASE}[analysis]\naudit_eps = [0.5, 2.0]\n"), "audit_eps = 2 ht"),
            (format!("{BASE}[analysis]\nt1 = 0.6\n"), "t1"),
        ];
        for (text, key) in cases {
            let msg = parse(&text).unwrap_err().to_string();
            assert!(msg.contains(key), "{key:?} missing from {msg:?}");
        }
    }

    #[test]
    fn fourier_tables_parse() {
        let text = BASE.replace("psi = 0.2", "psi = { c0 = 0.0, terms = [{ k = [1], a = 0.5, b = 0.0 }] }\nm0 = { c0 = 1.0, terms = [{ k = [2], a = 0.3, b = 0.1 }] }");
        let cfg = parse(&text).unwrap();
        let spec = cfg.problem().unwrap();
        assert!((spec.psi.slice(0)[0] - 0.5).abs() < 1e-15);
        assert!((spec.m0.slice(0)[0] - 1.3).abs() < 1e-15);
    }
}
