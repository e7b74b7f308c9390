//! Numerical experiments on a solved instance: translation energies, H1
//! difference quotients of `J(m)`, the first integral `D`, the terminal
//! inequality and time dilations of the optimal curve.
//!
//! Every competitor is evaluated with the discrete primal objective
//! [`evaluate_b`], so the excess over the optimum is bounded below by minus
//! the duality gap of the solve.

mod space;
mod time;

pub use space::{h1_space_quotient, h1_time_quotient, j_transfer, space_quadratic_fit, translation_curve, QuotientTable, TranslationCurve};
pub use time::{
    computationzeta_audit, constancy_of_d, terminal_inequality, time_translation_test, AuditReport, DSeries, TerminalReport,
    TimeTranslation,
};

use serde::{Deserialize, Serialize};

use crate::congestion::{hpol_margin, CongestionModel};
use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::real::Real;
use crate::solver::{evaluate_b, DualState, ProblemSpec};
use crate::transport::{PrimalState, SpeedMethod};

/// Differences below this are treated as zero by the power-law fits.
pub const FLAT_THRESHOLD: f64 = 1e-12;

/// Smooth cut-off in time: zero before `t1 / 2`, one after `t1`, cubic
/// smoothstep in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cutoff<S> {
    Ramp { t1: S },
    Zero,
}

impl<S: Real> Cutoff<S> {
    pub fn ramp(t1: S, horizon: S) -> Result<Self> {
        if !(t1 > S::zero() && t1 < horizon * S::c(0.5)) {
            return Err(invalid(format!("t1 must lie in (0, T/2), got {t1}")));
        }
        Ok(Cutoff::Ramp { t1 })
    }

    pub fn value(&self, t: S) -> S {
        match *self {
            Cutoff::Zero => S::zero(),
            Cutoff::Ramp { t1 } => {
                let s = ((t - t1 * S::c(0.5)) / (t1 * S::c(0.5))).max(S::zero()).min(S::one());
                s * s * (S::c(3.0) - S::c(2.0) * s)
            }
        }
    }

    pub fn derivative(&self, t: S) -> S {
        match *self {
            Cutoff::Zero => S::zero(),
            Cutoff::Ramp { t1 } => {
                let half = t1 * S::c(0.5);
                let s = ((t - half) / half).max(S::zero()).min(S::one());
                S::c(6.0) * s * (S::one() - s) / half
            }
        }
    }

    /// `sup |zeta'|`.
    pub fn max_slope(&self) -> S {
        match *self {
            Cutoff::Zero => S::zero(),
            Cutoff::Ramp { t1 } => S::c(3.0) / t1,
        }
    }

    /// `zeta(t_k)` on every node.
    pub fn nodes(&self, grid: &Grid<S>) -> Vec<S> {
        (0..=grid.nt()).map(|k| self.value(grid.node_time(k))).collect()
    }

    /// `(zeta_{k+1} - zeta_k) / ht` on every interval.
    pub fn slopes(&self, grid: &Grid<S>) -> Vec<S> {
        let z = self.nodes(grid);
        z.windows(2).map(|p| (p[1] - p[0]) / grid.ht()).collect()
    }
}

/// Least-squares line through `(log x, log y)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    /// Every `|y|` below [`FLAT_THRESHOLD`]: no fit is attempted.
    pub flat: bool,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// `log|y| - fit` at the points used.
    pub residuals: Vec<f64>,
}

impl PowerFit {
    /// `flat` counts as meeting a lower bound on the order.
    pub fn at_least(&self, order: f64) -> bool {
        self.flat || self.slope.map_or(false, |s| s >= order)
    }
}

/// Fits `|y| ~ C |x|^slope`; needs at least three distinct `|x| > 0`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() {
        return Err(invalid("fit needs as many ordinates as abscissae"));
    }
    let mut distinct: Vec<f64> = xs.iter().map(|x| x.abs()).filter(|&x| x > 0.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(invalid(format!("fit needs 3 distinct nonzero abscissae, got {}", distinct.len())));
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.abs() > 0.0 && y.abs() >= FLAT_THRESHOLD)
        .map(|(x, y)| (x.abs().ln(), y.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return Ok(PowerFit { flat: true, slope: None, intercept: None, residuals: Vec::new() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = pts.iter().map(|p| p.1 - intercept - slope * p.0).collect();
    Ok(PowerFit { flat: false, slope: Some(slope), intercept: Some(intercept), residuals })
}

fn default_deltas() -> Vec<i64> {
    vec![1, 2, 4, 8]
}

fn default_eps() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}

fn default_rho() -> f64 {
    1e-3
}

fn default_speed() -> String {
    "kinetic".into()
}

fn default_slope_min() -> f64 {
    1.8
}

fn default_dispersion_max() -> f64 {
    0.05
}

fn default_terminal_tol() -> f64 {
    0.05
}

/// Knobs of [`run_analysis`]. Shifts are in cells, time steps in units of `ht`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// End of the cut-off ramp; `T / 8` when absent.
    #[serde(default)]
    pub t1: Option<f64>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<i64>,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Dilations of the sign audit; `eps * sup zeta'` must stay below one.
    /// When absent, `1/16 .. 1/2` of that bound.
    #[serde(default)]
    pub audit_eps: Option<Vec<f64>>,
    /// Density threshold of the price residual.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Speed used for `D`: `kinetic`, `w2` or `flux_path`.
    #[serde(default = "default_speed")]
    pub speed: String,
    #[serde(default = "default_slope_min")]
    pub slope_min: f64,
    #[serde(default = "default_dispersion_max")]
    pub dispersion_max: f64,
    /// Relative slack of the terminal inequality.
    #[serde(default = "default_terminal_tol")]
    pub terminal_tol: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            t1: None,
            deltas: default_deltas(),
            eps: default_eps(),
            audit_eps: None,
            rho: default_rho(),
            speed: default_speed(),
            slope_min: default_slope_min(),
            dispersion_max: default_dispersion_max(),
            terminal_tol: default_terminal_tol(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t1) = self.t1 {
            if !(t1 > 0.0) {
                return Err(invalid(format!("t1 > 0 required, got {t1}")));
            }
        }
        if self.deltas.iter().any(|&d| d == 0) {
            return Err(invalid("deltas must be nonzero"));
        }
        let audit = self.audit_eps.as_deref().unwrap_or(&[1.0]);
        for (list, name) in [(&self.eps[..], "eps"), (audit, "audit_eps")] {
            if list.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
                return Err(invalid(format!("{name} entries must be > 0")));
            }
        }
        if !(self.rho > 0.0) {
            return Err(invalid(format!("rho > 0 required, got {}", self.rho)));
        }
        self.speed_method()?;
        for (x, name) in [(self.dispersion_max, "dispersion_max"), (self.terminal_tol, "terminal_tol")] {
            if !(x >= 0.0) {
                return Err(invalid(format!("{name} ≥ 0 required, got {x}")));
            }
        }
        Ok(())
    }

    /// Ranges that depend on the grid: the cut-off fits in `(0, T/2)`, every
    /// `eps ht` stays below `T/2` and every audit dilation keeps
    /// `eps ht sup zeta' < 1`.
    pub fn validate_on<S: Real>(&self, grid: &Grid<S>) -> Result<()> {
        self.validate()?;
        let cutoff = self.cutoff(grid).map_err(|e| invalid(format!("t1: {e}")))?;
        let ht = grid.ht().as_f64();
        let half = 0.5 * grid.horizon().as_f64();
        if let Some(&e) = self.eps.iter().find(|&&e| !(e * ht < half)) {
            return Err(invalid(format!("eps = {e} ht must stay below T / 2 = {} ht on this grid", half / ht)));
        }
        let slope = ht * cutoff.max_slope().as_f64();
        if let Some(&e) = self.audit_steps(grid, &cutoff).iter().find(|&&e| !(e * slope < 1.0)) {
            return Err(invalid(format!("audit_eps = {e} ht must stay below {} ht on this grid", 1.0 / slope)));
        }
        Ok(())
    }

    pub fn speed_method(&self) -> Result<SpeedMethod> {
        SpeedMethod::from_name(&self.speed).ok_or_else(|| invalid(format!("speed must be kinetic, w2 or flux_path, got {:?}", self.speed)))
    }

    /// Audit dilations in units of `ht`.
    pub fn audit_steps<S: Real>(&self, grid: &Grid<S>, cutoff: &Cutoff<S>) -> Vec<f64> {
        match &self.audit_eps {
            Some(list) => list.clone(),
            None => {
                let slope = (grid.ht() * cutoff.max_slope()).as_f64();
                let bound = if slope > 0.0 { 1.0 / slope } else { 4.0 };
                [0.0625, 0.125, 0.25, 0.5].iter().map(|f| f * bound).collect()
            }
        }
    }

    pub fn cutoff<S: Real>(&self, grid: &Grid<S>) -> Result<Cutoff<S>> {
        let horizon = grid.horizon();
        let t1 = self.t1.map(S::c).unwrap_or(horizon / S::c(8.0));
        Cutoff::ramp(t1, horizon)
    }
}

/// One pass/fail line of the report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisCheck {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

/// Constants of the congestion model the estimates rely on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelConstants {
    pub model: String,
    pub c: f64,
    pub hpol_c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub constants: ModelConstants,
    pub gap: f64,
    pub t1: f64,
    pub translation: TranslationCurve,
    pub h1_space: QuotientTable,
    pub h1_time: QuotientTable,
    pub d_series: DSeries,
    pub terminal: TerminalReport,
    pub time_translation: TimeTranslation,
    pub audit: AuditReport,
    pub checks: Vec<AnalysisCheck>,
}

impl AnalysisReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failing(&self) -> Vec<&AnalysisCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn model_constants<S: Real>(model: &CongestionModel<S>) -> Result<ModelConstants> {
    let samples: Vec<S> = (1..=200).map(|i| S::c(10.0 * i as f64 / 200.0)).collect();
    let hpol = hpol_margin(model, S::c(0.1), &samples)?;
    Ok(ModelConstants { model: model.name().into(), c: model.c().as_f64(), hpol_c: hpol.as_f64() })
}

fn below_floor(excess: &[f64], floor: &[f64]) -> f64 {
    excess.iter().zip(floor).fold(f64::INFINITY, |m, (e, f)| m.min(e - f))
}

fn check(name: &str, passed: bool, value: f64, threshold: f64, detail: String) -> AnalysisCheck {
    AnalysisCheck { name: name.into(), passed, value, threshold, detail }
}

/// Runs every experiment on one solved instance and collects the checks.
pub fn run_analysis<S: Real>(
    spec: &ProblemSpec<S>,
    primal: &PrimalState<S>,
    dual: &DualState<S>,
    cfg: &AnalysisConfig,
) -> Result<AnalysisReport> {
    let grid = spec.grid;
    cfg.validate_on(&grid)?;
    let cutoff = cfg.cutoff(&grid)?;
    let gap = (crate::solver::evaluate_a(spec, dual)? + evaluate_b(spec, primal)).max(S::zero());
    let gap_f = gap.as_f64();
    let roundoff = 1e-9 * evaluate_b(spec, primal).as_f64().abs().max(1.0);

    let translation = translation_curve(spec, primal, dual, &cutoff, &cfg.deltas)?;
    let h1_space = h1_space_quotient(spec, primal, &cutoff, &cfg.deltas)?;
    let steps: Vec<usize> = cfg.deltas.iter().map(|d| d.unsigned_abs() as usize).collect();
    let h1_time = h1_time_quotient(spec, primal, &cutoff, &steps)?;
    let d_series = constancy_of_d(spec, primal, &cutoff, cfg.speed_method()?)?;
    let terminal = terminal_inequality(spec, primal, &d_series)?;
    let time_translation = time_translation_test(spec, primal, dual, &cutoff, &cfg.eps)?;
    let audit = computationzeta_audit(spec, primal, &cutoff, &cfg.audit_steps(&grid, &cutoff))?;
    let transfer = j_transfer(spec, primal, dual, &cutoff, &cfg.deltas, &translation)?;

    let mut checks = Vec::new();
    let fit = &translation.fit;
    checks.push(check(
        "translation_order",
        fit.at_least(cfg.slope_min),
        fit.slope.unwrap_or(f64::NAN),
        cfg.slope_min,
        if fit.flat { "flat".into() } else { "log-log slope of |M(delta) - M(0)|".into() },
    ));
    let worst = below_floor(&translation.excess, &translation.certified_floor);
    checks.push(check(
        "translation_lower_bound",
        worst >= -roundoff,
        worst,
        -roundoff,
        "min over delta of M(delta) - M(0) + gap - pairing".into(),
    ));
    if let Some(defect) = translation.symmetry_defect {
        let tol = 1e-8 * translation.values[0].abs().max(1.0);
        checks.push(check("translation_symmetry", defect <= tol, defect, tol, "|M(delta) - M(-delta)| on an even instance".into()));
    }
    checks.push(check(
        "j_transfer",
        transfer.iter().all(|&(l, r)| l <= r + 1e-9),
        transfer.iter().fold(f64::NEG_INFINITY, |m, &(l, r)| m.max(l - r)),
        1e-9,
        "max of c|J(m^delta) - J(m)|^2 - 2(gap + |M(delta) - M(0)|) - 2 gap".into(),
    ));
    checks.push(check(
        "d_dispersion",
        d_series.dispersion <= cfg.dispersion_max,
        d_series.dispersion,
        cfg.dispersion_max,
        "max |D - mean| / |mean| on [t1, T - t1]".into(),
    ));
    let ttol = cfg.terminal_tol * terminal.rhs.abs().max(1.0);
    checks.push(check(
        "terminal_inequality",
        terminal.margin >= -ttol,
        terminal.margin,
        -ttol,
        "G(m_T) - D <= |grad psi|^2 m_T / 2".into(),
    ));
    let tfit = &time_translation.fit;
    checks.push(check(
        "time_translation_order",
        tfit.at_least(cfg.slope_min),
        tfit.slope.unwrap_or(f64::NAN),
        cfg.slope_min,
        if tfit.flat { "flat".into() } else { "log-log slope of |B(m^eps) - B(m)|".into() },
    ));
    let worst = below_floor(&time_translation.excess, &time_translation.certified_floor);
    checks.push(check(
        "time_translation_lower_bound",
        worst >= -roundoff,
        worst,
        -roundoff,
        "min over eps of B(m^eps) - B(m) + gap - pairing".into(),
    ));
    checks.push(check(
        "audit_selects_corrected_sign",
        audit.selected == "corrected",
        audit.corrected_residual.iter().fold(0.0f64, |m, &x| m.max(x)),
        0.0,
        "the expansion with the correction +eps zeta' (G - |m'|^2 / 2) matches better".into(),
    ));

    Ok(AnalysisReport {
        constants: model_constants(&spec.model)?,
        gap: gap_f,
        t1: match cutoff {
            Cutoff::Ramp { t1 } => t1.as_f64(),
            Cutoff::Zero => 0.0,
        },
        translation,
        h1_space,
        h1_time,
        d_series,
        terminal,
        time_translation,
        audit,
        checks,
    })
}
