//! Time reparametrizations of the optimal curve, the first integral `D` and
//! the terminal inequality.

use serde::Serialize;

use super::{fit_power_law, Cutoff, PowerFit, FLAT_THRESHOLD};
use crate::error::{invalid, Result};
use crate::grid::{gradient_slice, gradient_x, integrate, Layout, ScalarField, VectorField};
use crate::real::Real;
use crate::solver::{continuity_pairing, evaluate_a, evaluate_b, DualState, ProblemSpec};
use crate::transport::{continuity_residual, metric_speed, pushforward_terminal, PrimalState, SpeedMethod};

/// `D = -|m'|^2 / 2 + G(m)` on the intervals whose midpoint lies in `[t1, T - t1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DSeries {
    pub speed: String,
    /// Interval midpoints.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub mean: f64,
    pub max_deviation: f64,
    /// `max_deviation / |mean|`.
    pub dispersion: f64,
}

/// Both sides of `G(m_T) - D <= int |grad psi|^2 dm_T / 2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TerminalReport {
    pub terminal_cost: f64,
    pub d: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TimeTranslation {
    /// Dilation amplitudes in units of `ht`.
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    /// `B(m^eps) - B(m)`.
    pub excess: Vec<f64>,
    pub fit: PowerFit,
    pub min_excess: f64,
    pub continuity_residuals: Vec<f64>,
    /// Continuity pairing of every competitor with the solver's dual.
    pub pairings: Vec<f64>,
    /// `-gap + pairing`.
    pub certified_floor: Vec<f64>,
    pub min_density: Vec<f64>,
}

/// Direct energies of `m_{t - eps zeta(t)}` against the first-order expansion
/// with either sign of the correction term.
#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    /// In units of `ht`.
    pub eps: Vec<f64>,
    pub direct: Vec<f64>,
    /// Correction `+eps zeta' (|m'|^2 / 2 - G)`.
    pub stated_expansion: Vec<f64>,
    /// Correction `+eps zeta' (G - |m'|^2 / 2)`.
    pub corrected_expansion: Vec<f64>,
    pub stated_residual: Vec<f64>,
    pub corrected_residual: Vec<f64>,
    pub stated_fit: PowerFit,
    pub corrected_fit: PowerFit,
    /// `corrected`, `stated` or `indistinguishable`.
    pub selected: String,
}

fn interval_costs<S: Real>(spec: &ProblemSpec<S>, primal: &PrimalState<S>) -> Vec<S> {
    let mbar = primal.interval_density();
    (0..spec.grid.nt())
        .map(|k| mbar.slice(k).iter().fold(S::zero(), |s, &m| s + spec.model.cost(m)) * spec.grid.cell_volume())
        .collect()
}

/// `sum hx^d |w_k|^2 / m_{k+1}`: the squared speed the objective charges.
fn interval_kinetic<S: Real>(primal: &PrimalState<S>) -> Vec<S> {
    let grid = *primal.m.grid();
    let mbar = primal.interval_density();
    (0..grid.nt())
        .map(|k| {
            let dens = mbar.slice(k);
            (0..grid.points()).fold(S::zero(), |s, i| {
                let w2 = primal.w.norm_sq_at(k, i);
                if w2 == S::zero() {
                    s
                } else {
                    s + w2 / dens[i]
                }
            }) * grid.cell_volume()
        })
        .collect()
}

/// Fractional index, snapped to the nearest integer when within `1e-9`.
fn locate(pos: f64, top: usize) -> (usize, f64) {
    let pos = pos.max(0.0).min(top as f64);
    let near = pos.round();
    if (pos - near).abs() < 1e-9 {
        return (near as usize, 0.0);
    }
    let k = pos.floor() as usize;
    (k, pos - k as f64)
}

fn blend<S: Real>(a: &[S], b: &[S], frac: f64, out: &mut [S]) {
    if frac == 0.0 {
        out.copy_from_slice(a);
        return;
    }
    let f = S::c(frac);
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = x * (S::one() - f) + y * f;
    }
}

/// Node density at time `s`, linear between nodes.
fn node_at<S: Real>(m: &ScalarField<S>, s: S, out: &mut [S]) {
    let grid = *m.grid();
    let nt = grid.nt();
    let (k, frac) = locate((s / grid.ht()).as_f64(), nt);
    blend(m.slice(k), m.slice((k + 1).min(nt)), frac, out);
}

/// Momentum at time `s`, linear between interval midpoints.
fn interval_at<S: Real>(w: &VectorField<S>, s: S, out: &mut [S]) {
    let grid = *w.grid();
    let top = grid.nt() - 1;
    let (k, frac) = locate((s / grid.ht()).as_f64() - 0.5, top);
    blend(w.slice(k), w.slice((k + 1).min(top)), frac, out);
}

/// Continuation of the curve beyond `T` by pushing `m_T` along `-grad psi`,
/// one node per `ht`. Each node is the image of the previous one under
/// `x - h grad psi(x)` applied in as many substeps as the Lipschitz bound of
/// the pushforward requires.
struct Extension<S> {
    nodes: Vec<Vec<S>>,
    /// `grad psi`, component-major.
    gradient: Vec<S>,
    ht: S,
}

impl<S: Real> Extension<S> {
    fn build(spec: &ProblemSpec<S>, terminal: &[S], span: S) -> Result<Self> {
        let grid = spec.grid;
        let ht = grid.ht();
        let v = gradient_x(&spec.psi);
        let count = (span / ht).ceil().to_usize().unwrap_or(0) + 1;
        let mut nodes = vec![terminal.to_vec()];
        for _ in 0..count {
            let mut cur = ScalarField::from_vec(&grid, Layout::Spatial, nodes.last().expect("seeded").clone())?;
            let mut sub = 1usize;
            loop {
                let h = ht / S::c(sub as f64);
                match pushforward_terminal(&cur, &v, h) {
                    Ok(first) => {
                        cur = first.density;
                        for _ in 1..sub {
                            cur = pushforward_terminal(&cur, &v, h)?.density;
                        }
                        break;
                    }
                    Err(_) if sub < 1024 => sub *= 2,
                    Err(e) => return Err(e),
                }
            }
            nodes.push(cur.into_vec());
        }
        Ok(Extension { nodes, gradient: v.slice(0).to_vec(), ht })
    }

    fn node_at(&self, sigma: S, out: &mut [S]) {
        let top = self.nodes.len() - 1;
        let (k, frac) = locate((sigma / self.ht).as_f64(), top);
        blend(&self.nodes[k], &self.nodes[(k + 1).min(top)], frac, out);
    }
}

/// The curve `t -> m_{tau(t)}` with momentum `tau' w_{tau(t)}`; times beyond
/// `T` are read from the extension with momentum `-tau' m grad psi`.
fn reparametrized<S: Real>(spec: &ProblemSpec<S>, primal: &PrimalState<S>, tau: &[S], ext: Option<&Extension<S>>) -> Result<PrimalState<S>> {
    let grid = spec.grid;
    let n = grid.points();
    let d = grid.dim();
    let horizon = grid.horizon();
    let edge = horizon + S::tol(1e-12) * horizon;
    let mut m = ScalarField::zeros(&grid, Layout::Nodes);
    for (k, &s) in tau.iter().enumerate() {
        if s <= edge {
            node_at(&primal.m, s, m.slice_mut(k));
        } else {
            let ext = ext.ok_or_else(|| invalid("time map leaves [0, T] without an extension"))?;
            ext.node_at(s - horizon, m.slice_mut(k));
        }
    }
    let mut w = VectorField::zeros(&grid, Layout::Intervals);
    for k in 0..grid.nt() {
        let mid = (tau[k] + tau[k + 1]) * S::c(0.5);
        let rate = (tau[k + 1] - tau[k]) / grid.ht();
        if mid <= edge {
            interval_at(&primal.w, mid, w.slice_mut(k));
        } else {
            let ext = ext.ok_or_else(|| invalid("time map leaves [0, T] without an extension"))?;
            let dens = m.slice(k + 1).to_vec();
            let slab = w.slice_mut(k);
            for a in 0..d {
                for i in 0..n {
                    slab[a * n + i] = -dens[i] * ext.gradient[a * n + i];
                }
            }
        }
        w.slice_mut(k).iter_mut().for_each(|x| *x = *x * rate);
    }
    PrimalState::new(m, w)
}

/// `D` on the intervals of `[t1, T - t1]` with the chosen speed and the
/// congestion cost of the density each interval carries.
pub fn constancy_of_d<S: Real>(spec: &ProblemSpec<S>, primal: &PrimalState<S>, cutoff: &Cutoff<S>, method: SpeedMethod) -> Result<DSeries> {
    let grid = spec.grid;
    let t1 = match *cutoff {
        Cutoff::Ramp { t1 } => t1,
        Cutoff::Zero => S::zero(),
    };
    let speeds = metric_speed(primal, method)?;
    let costs = interval_costs(spec, primal);
    let mut times = Vec::new();
    let mut values = Vec::new();
    let lo = t1 - S::tol(1e-12);
    let hi = grid.horizon() - t1 + S::tol(1e-12);
    for k in 0..grid.nt() {
        let t = grid.interval_midpoint(k);
        if t >= lo && t <= hi {
            times.push(t.as_f64());
            values.push((costs[k] - S::c(0.5) * speeds[k] * speeds[k]).as_f64());
        }
    }
    if values.is_empty() {
        return Err(invalid("no interval midpoint lies in [t1, T - t1]"));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max_deviation = values.iter().fold(0.0f64, |m, &x| m.max((x - mean).abs()));
    let dispersion = if mean != 0.0 { max_deviation / mean.abs() } else if max_deviation == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(DSeries { speed: method.name().into(), times, values, mean, max_deviation, dispersion })
}

/// `G(m_T) - D` against `int |grad psi|^2 dm_T / 2`, with `D` the mean of the series.
pub fn terminal_inequality<S: Real>(spec: &ProblemSpec<S>, primal: &PrimalState<S>, d: &DSeries) -> Result<TerminalReport> {
    let grid = spec.grid;
    let n = grid.points();
    let dim = grid.dim();
    let terminal = primal.m.slice(grid.nt());
    let cost = terminal.iter().fold(S::zero(), |s, &m| s + spec.model.cost(m)) * grid.cell_volume();
    let mut grad = vec![S::zero(); n * dim];
    gradient_slice(&grid, spec.psi.slice(0), &mut grad);
    let weighted: Vec<S> = (0..n)
        .map(|i| {
            let g2 = (0..dim).fold(S::zero(), |s, a| s + grad[a * n + i] * grad[a * n + i]);
            g2 * terminal[i]
        })
        .collect();
    let rhs = (S::c(0.5) * integrate(&grid, &weighted)).as_f64();
    let lhs = cost.as_f64() - d.mean;
    Ok(TerminalReport { terminal_cost: cost.as_f64(), d: d.mean, lhs, rhs, margin: rhs - lhs })
}

/// `B(m^eps) - B(m)` for `m^eps_t = m_{t + eps zeta(t)}`, continued past `T`
/// by the pushforward extension.
pub fn time_translation_test<S: Real>(
    spec: &ProblemSpec<S>,
    primal: &PrimalState<S>,
    dual: &DualState<S>,
    cutoff: &Cutoff<S>,
    eps: &[f64],
) -> Result<TimeTranslation> {
    let grid = spec.grid;
    let ht = grid.ht();
    let horizon = grid.horizon();
    let widest = eps.iter().fold(0.0f64, |m, &e| m.max(e));
    if !(S::c(widest) * ht < horizon * S::c(0.5)) {
        return Err(invalid(format!("eps = {widest} ht is out of range: eps must stay below T / 2")));
    }
    let ext = Extension::build(spec, primal.m.slice(grid.nt()), S::c(widest) * ht)?;
    let zeta = cutoff.nodes(&grid);
    let base = evaluate_b(spec, primal).as_f64();
    let gap = (evaluate_a(spec, dual)?.as_f64() + base).max(0.0);
    let mut values = Vec::new();
    let mut residuals = Vec::new();
    let mut pairings = Vec::new();
    let mut mins = Vec::new();
    for &e in eps {
        let amp = S::c(e) * ht;
        let tau: Vec<S> = (0..=grid.nt()).map(|k| grid.node_time(k) + amp * zeta[k]).collect();
        let state = reparametrized(spec, primal, &tau, Some(&ext))?;
        values.push(evaluate_b(spec, &state).as_f64());
        residuals.push(continuity_residual(&state, &spec.m0)?.as_f64());
        pairings.push(continuity_pairing(spec, &state, dual)?.as_f64());
        mins.push(state.m.min().as_f64());
    }
    let excess: Vec<f64> = values.iter().map(|v| v - base).collect();
    let fit = fit_power_law(eps, &excess)?;
    let min_excess = excess.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    Ok(TimeTranslation {
        eps: eps.to_vec(),
        values,
        excess,
        fit,
        min_excess,
        continuity_residuals: residuals,
        certified_floor: pairings.iter().map(|p| p - gap).collect(),
        pairings,
        min_density: mins,
    })
}

/// Integral over `[a, b]` of a function constant on every interval.
fn integrate_intervals<S: Real>(ht: S, values: &[S], a: S, b: S) -> S {
    values.iter().enumerate().fold(S::zero(), |s, (k, &v)| {
        let lo = ht * S::c(k as f64);
        let hi = lo + ht;
        let overlap = (hi.min(b) - lo.max(a)).max(S::zero());
        s + overlap * v
    })
}

/// Compares `B(m_{t - eps zeta(t)})` with its first-order expansion
/// `B(m) - int_{T - e1}^T (|m'|^2/2 + G) +- int_0^{T - e1} (|m'|^2/2 - G) eps zeta'
/// + int psi d(m_{T - e1} - m_T)`, `e1 = eps zeta(T)`, for both signs.
pub fn computationzeta_audit<S: Real>(spec: &ProblemSpec<S>, primal: &PrimalState<S>, cutoff: &Cutoff<S>, eps: &[f64]) -> Result<AuditReport> {
    let grid = spec.grid;
    let ht = grid.ht();
    let horizon = grid.horizon();
    let widest = eps.iter().fold(0.0f64, |m, &e| m.max(e));
    if !(S::c(widest) * ht * cutoff.max_slope() < S::one()) {
        return Err(invalid(format!("eps = {widest} ht is out of the homeomorphism range: eps sup zeta' must stay below 1")));
    }
    let zeta = cutoff.nodes(&grid);
    let slopes = cutoff.slopes(&grid);
    let kinetic = interval_kinetic(primal);
    let costs = interval_costs(spec, primal);
    let half = S::c(0.5);
    let lagrangian: Vec<S> = kinetic.iter().zip(&costs).map(|(&k, &g)| half * k + g).collect();
    let weighted: Vec<S> = kinetic.iter().zip(&costs).zip(&slopes).map(|((&k, &g), &z)| (half * k - g) * z).collect();
    let base = evaluate_b(spec, primal);
    let vol = grid.cell_volume();
    let pair = |m: &[S]| m.iter().zip(spec.psi.slice(0)).fold(S::zero(), |s, (&x, &p)| s + x * p) * vol;
    let terminal_pair = pair(primal.m.slice(grid.nt()));
    let mut buf = vec![S::zero(); grid.points()];

    let mut direct = Vec::new();
    let mut stated = Vec::new();
    let mut corrected = Vec::new();
    for &e in eps {
        let amp = S::c(e) * ht;
        let tau: Vec<S> = (0..=grid.nt()).map(|k| grid.node_time(k) - amp * zeta[k]).collect();
        let state = reparametrized(spec, primal, &tau, None)?;
        direct.push(evaluate_b(spec, &state).as_f64());
        let e1 = amp * cutoff.value(horizon);
        let cut = horizon - e1;
        let tail = integrate_intervals(ht, &lagrangian, cut, horizon);
        let corr = amp * integrate_intervals(ht, &weighted, S::zero(), cut);
        node_at(&primal.m, cut, &mut buf);
        let boundary = pair(&buf) - terminal_pair;
        stated.push((base - tail + corr + boundary).as_f64());
        corrected.push((base - tail - corr + boundary).as_f64());
    }
    let stated_residual: Vec<f64> = direct.iter().zip(&stated).map(|(a, b)| (a - b).abs()).collect();
    let corrected_residual: Vec<f64> = direct.iter().zip(&corrected).map(|(a, b)| (a - b).abs()).collect();
    let stated_fit = fit_power_law(eps, &stated_residual)?;
    let corrected_fit = fit_power_law(eps, &corrected_residual)?;
    let (s_sum, c_sum) = (stated_residual.iter().sum::<f64>(), corrected_residual.iter().sum::<f64>());
    let floor = FLAT_THRESHOLD * eps.len() as f64;
    let selected = if s_sum <= floor && c_sum <= floor {
        "indistinguishable"
    } else if c_sum < s_sum {
        "corrected"
    } else {
        "stated"
    };
    Ok(AuditReport {
        eps: eps.to_vec(),
        direct,
        stated_expansion: stated,
        corrected_expansion: corrected,
        stated_residual,
        corrected_residual,
        stated_fit,
        corrected_fit,
        selected: selected.into(),
    })
}
