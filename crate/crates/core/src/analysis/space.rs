//! Spatial translations with a time cut-off and difference quotients of `J(m)`.

use serde::Serialize;

use super::{fit_power_law, Cutoff, PowerFit};
use crate::error::{MfgError, Result};
use crate::grid::{shift_slice, ScalarField};
use crate::real::Real;
use crate::solver::{continuity_pairing, evaluate_a, evaluate_b, DualState, ProblemSpec};
use crate::transport::{continuity_residual, PrimalState};

/// `M(delta)` over the requested shifts; entry 0 is `delta = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct TranslationCurve {
    /// Shifts in cells along the first axis.
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    /// `M(delta) - M(0)`.
    pub excess: Vec<f64>,
    pub fit: PowerFit,
    pub min_excess: f64,
    /// Continuity residual of every competitor.
    pub continuity_residuals: Vec<f64>,
    /// [`continuity_pairing`] of every competitor with the solver's dual.
    pub pairings: Vec<f64>,
    /// `-gap + pairing`: the excess the discrete optimum guarantees.
    pub certified_floor: Vec<f64>,
    pub min_density: Vec<f64>,
    /// `max |M(delta) - M(-delta)|` when `m0` and `psi` are even in `x`.
    pub symmetry_defect: Option<f64>,
}

/// `m^delta(t, x) = m(t, x + zeta(t) delta)` with momentum
/// `w(t, x + zeta delta) - zeta' delta m^delta`. The momentum of interval `k`
/// is shifted with the node `k + 1` it is carried by.
pub(crate) fn translated_state<S: Real>(primal: &PrimalState<S>, cutoff: &Cutoff<S>, delta: S) -> Result<PrimalState<S>> {
    let grid = *primal.m.grid();
    let n = grid.points();
    let d = grid.dim();
    let zeta = cutoff.nodes(&grid);
    let slopes = cutoff.slopes(&grid);
    let mut m = primal.m.clone();
    for k in 0..=grid.nt() {
        if zeta[k] != S::zero() {
            shift_slice(&grid, primal.m.slice(k), [delta * zeta[k], S::zero()], m.slice_mut(k));
        }
    }
    let floor = m.min();
    if floor < -S::tol(1e-8) {
        return Err(MfgError::Domain(format!("shift by {delta} cells leaves density {floor}")));
    }
    let mut w = primal.w.clone();
    let shift = delta * grid.hx();
    for k in 0..grid.nt() {
        let z = zeta[k + 1];
        for a in 0..d {
            let src = &primal.w.slice(k)[a * n..(a + 1) * n];
            let dst = &mut w.slice_mut(k)[a * n..(a + 1) * n];
            if z != S::zero() {
                shift_slice(&grid, src, [delta * z, S::zero()], dst);
            }
        }
        let corr = slopes[k] * shift;
        if corr != S::zero() {
            let dens = m.slice(k + 1).to_vec();
            let slab = w.slice_mut(k);
            for i in 0..n {
                slab[i] = slab[i] - corr * dens[i];
            }
        }
    }
    PrimalState::new(m, w)
}

fn is_even<S: Real>(f: &ScalarField<S>) -> bool {
    let grid = *f.grid();
    let nx = grid.nx();
    let s = f.slice(0);
    let tol = S::tol(1e-12) * f.max_abs().max(S::one());
    (0..grid.points()).all(|i| {
        let mut ij = grid.unravel(i);
        ij[0] = (nx - ij[0]) % nx;
        (s[i] - s[grid.ravel(ij)]).abs() <= tol
    })
}

/// Evaluates `M(delta) = B(m^delta, w^delta)` and fits `|M(delta) - M(0)|`.
pub fn translation_curve<S: Real>(
    spec: &ProblemSpec<S>,
    primal: &PrimalState<S>,
    dual: &DualState<S>,
    cutoff: &Cutoff<S>,
    deltas: &[i64],
) -> Result<TranslationCurve> {
    let gap = (evaluate_a(spec, dual)? + evaluate_b(spec, primal)).max(S::zero()).as_f64();
    let mut all: Vec<i64> = vec![0];
    all.extend(deltas.iter().copied().filter(|&d| d != 0));
    let symmetric = is_even(&spec.m0) && is_even(&spec.psi);
    let mut mirrored = Vec::new();
    if symmetric {
        for &d in deltas {
            if d != 0 && !all.contains(&-d) {
                mirrored.push(-d);
            }
        }
    }
    let mut values = Vec::new();
    let mut residuals = Vec::new();
    let mut pairings = Vec::new();
    let mut mins = Vec::new();
    let mut mirror_values = Vec::new();
    for (i, &d) in all.iter().chain(&mirrored).enumerate() {
        let state = translated_state(primal, cutoff, S::c(d as f64))?;
        let b = evaluate_b(spec, &state).as_f64();
        if i < all.len() {
            values.push(b);
            residuals.push(continuity_residual(&state, &spec.m0)?.as_f64());
            pairings.push(continuity_pairing(spec, &state, dual)?.as_f64());
            mins.push(state.m.min().as_f64());
        } else {
            mirror_values.push(b);
        }
    }
    let excess: Vec<f64> = values.iter().map(|v| v - values[0]).collect();
    let fit = fit_power_law(
        &all[1..].iter().map(|&d| d as f64).collect::<Vec<_>>(),
        &excess[1..],
    )?;
    let min_excess = excess.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let symmetry_defect = symmetric.then(|| {
        let lookup = |d: i64| -> f64 {
            match all.iter().position(|&x| x == d) {
                Some(j) => values[j],
                None => mirror_values[mirrored.iter().position(|&x| x == d).expect("mirrored shift")],
            }
        };
        all[1..].iter().fold(0.0f64, |m, &d| m.max((lookup(d) - lookup(-d)).abs()))
    });
    Ok(TranslationCurve {
        deltas: all.iter().map(|&d| d as f64).collect(),
        values,
        excess,
        fit,
        min_excess,
        continuity_residuals: residuals,
        certified_floor: pairings.iter().map(|p| p - gap).collect(),
        pairings,
        min_density: mins,
        symmetry_defect,
    })
}

/// The fit of an already computed curve.
pub fn space_quadratic_fit(curve: &TranslationCurve) -> Result<PowerFit> {
    let xs: Vec<f64> = curve.deltas.iter().copied().filter(|&d| d != 0.0).collect();
    let ys: Vec<f64> = curve.deltas.iter().zip(&curve.excess).filter(|(d, _)| **d != 0.0).map(|(_, e)| *e).collect();
    fit_power_law(&xs, &ys)
}

/// Difference quotients indexed by step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuotientTable {
    /// Steps in cells (space) or in `ht` (time).
    pub steps: Vec<f64>,
    pub values: Vec<f64>,
    pub max: f64,
}

fn j_nodes<S: Real>(spec: &ProblemSpec<S>, primal: &PrimalState<S>) -> ScalarField<S> {
    primal.m.map(|m| spec.model.j(m.max(S::zero())))
}

fn first_node_after<S: Real>(spec: &ProblemSpec<S>, cutoff: &Cutoff<S>) -> usize {
    let t1 = match *cutoff {
        Cutoff::Ramp { t1 } => t1,
        Cutoff::Zero => S::zero(),
    };
    let g = spec.grid;
    (0..=g.nt()).find(|&k| g.node_time(k) >= t1 - S::tol(1e-12)).unwrap_or(g.nt())
}

/// `|J(m(. + delta)) - J(m)| / (|delta| hx)` in the root mean square over
/// nodes with `t >= t1` of the spatial L2 norm.
pub fn h1_space_quotient<S: Real>(spec: &ProblemSpec<S>, primal: &PrimalState<S>, cutoff: &Cutoff<S>, deltas: &[i64]) -> Result<QuotientTable> {
    let grid = spec.grid;
    let j = j_nodes(spec, primal);
    let first = first_node_after(spec, cutoff);
    let n = grid.points();
    let mut shifted = vec![S::zero(); n];
    let mut values = Vec::new();
    for &d in deltas {
        let mut acc = 0.0;
        for k in first..=grid.nt() {
            shift_slice(&grid, j.slice(k), [S::c(d as f64), S::zero()], &mut shifted);
            let sq = j.slice(k).iter().zip(&shifted).fold(S::zero(), |s, (&a, &b)| s + (b - a) * (b - a));
            acc += (sq * grid.cell_volume()).as_f64();
        }
        let count = (grid.nt() + 1 - first) as f64;
        values.push((acc / count).sqrt() / (d.unsigned_abs() as f64 * grid.hx().as_f64()));
    }
    let max = values.iter().fold(0.0f64, |m, &x| m.max(x));
    Ok(QuotientTable { steps: deltas.iter().map(|&d| d as f64).collect(), values, max })
}

/// Time counterpart of [`h1_space_quotient`] over node pairs `(k, k + j)`
/// with `t_k >= t1`.
pub fn h1_time_quotient<S: Real>(spec: &ProblemSpec<S>, primal: &PrimalState<S>, cutoff: &Cutoff<S>, steps: &[usize]) -> Result<QuotientTable> {
    let grid = spec.grid;
    let j = j_nodes(spec, primal);
    let first = first_node_after(spec, cutoff);
    let mut values = Vec::new();
    let mut used = Vec::new();
    for &s in steps {
        if s == 0 || first + s > grid.nt() {
            continue;
        }
        let mut acc = 0.0;
        let mut count = 0usize;
        for k in first..=grid.nt() - s {
            let sq = j.slice(k).iter().zip(j.slice(k + s)).fold(S::zero(), |a, (&x, &y)| a + (y - x) * (y - x));
            acc += (sq * grid.cell_volume()).as_f64();
            count += 1;
        }
        values.push((acc / count as f64).sqrt() / (s as f64 * grid.ht().as_f64()));
        used.push(s as f64);
    }
    let max = values.iter().fold(0.0f64, |m, &x| m.max(x));
    Ok(QuotientTable { steps: used, values, max })
}

/// Both sides of `c |J(m^delta) - J(m)|^2 <= 2 (gap + |M(delta) - M(0)| + |P|) + 2 gap`
/// with the L2 norm over interval densities, one pair per nonzero shift.
/// `P` is the continuity pairing of the competitor, zero when it is exactly
/// admissible.
pub fn j_transfer<S: Real>(
    spec: &ProblemSpec<S>,
    primal: &PrimalState<S>,
    dual: &DualState<S>,
    cutoff: &Cutoff<S>,
    deltas: &[i64],
    curve: &TranslationCurve,
) -> Result<Vec<(f64, f64)>> {
    let grid = spec.grid;
    let gap = (evaluate_a(spec, dual)? + evaluate_b(spec, primal)).max(S::zero()).as_f64();
    let c = spec.model.c().as_f64();
    let base = primal.interval_density();
    let mut out = Vec::new();
    for &d in deltas.iter().filter(|&&d| d != 0) {
        let state = translated_state(primal, cutoff, S::c(d as f64))?;
        let moved = state.interval_density();
        let sq = base.data().iter().zip(moved.data()).fold(S::zero(), |s, (&a, &b)| {
            let diff = spec.model.j(b.max(S::zero())) - spec.model.j(a.max(S::zero()));
            s + diff * diff
        });
        let lhs = c * (sq * grid.ht() * grid.cell_volume()).as_f64();
        let idx = curve.deltas.iter().position(|&x| x == d as f64).expect("shift on the curve");
        out.push((lhs, 2.0 * (gap + curve.excess[idx].abs() + curve.pairings[idx].abs()) + 2.0 * gap));
    }
    Ok(out)
}
