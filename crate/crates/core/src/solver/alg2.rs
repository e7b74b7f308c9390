//! Augmented Lagrangian splitting on the dual side.
//!
//! The dual problem `min A(u, p)` is written as `min F(q) - <u_0, m0>` with
//! `q = D u` (see [`space_time_gradient`]) and `F(a, b) = sum G*(-a + |b|^2/2)`.
//! With the Lagrangian `F(q) - <u_0, m0> + <s, q - Du> + r/2 |q - Du|^2`
//! one sweep is
//!
//! 1. `u`: `r D^T D u = D^T (s + r q) + m0 / ht` at `t = 0`, `u(T) = psi`;
//! 2. `q`: pointwise proximal map of `F / r` at `Du - s / r`;
//! 3. `s <- s + r (q - Du)`.
//!
//! After step 3, `s = (l, -l b)` where `l` is the density returned by the
//! proximal map, so `s` carries the density at the right node of every
//! interval and the momentum `w = -m grad u`.

use rayon::prelude::*;
use serde::Serialize;

use super::functionals::{evaluate_a, evaluate_b, gap_decomposition};
use super::{DualState, ProblemSpec};
use crate::congestion::prox_hamiltonian;
use crate::error::Result;
use crate::grid::{
    elliptic_solve, integrate, space_time_gradient, space_time_gradient_adjoint, Layout, ScalarField, StaggeredPair, VectorField,
};
use crate::real::Real;
use crate::transport::{continuity_residual, PrimalState};

/// Number of history samples kept for a full run.
const HISTORY_SAMPLES: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub gap: f64,
    pub best_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub model: String,
    pub r: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Iteration whose states are returned (best gap seen).
    pub best_iteration: usize,
    pub a: f64,
    pub b: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub fenchel_term: f64,
    pub kinetic_term: f64,
    /// `|q - Du|` at the last iteration.
    pub primal_residual: f64,
    /// `r |D(u - u_prev)|` at the last iteration.
    pub dual_residual: f64,
    /// Largest distance between the density multiplier and the node density
    /// rebuilt from the momentum.
    pub multiplier_mismatch: f64,
    pub continuity_residual: f64,
    pub min_density: f64,
    pub mass_drift: f64,
    pub history: Vec<IterationRecord>,
}

pub struct SolveOutcome<S> {
    pub primal: PrimalState<S>,
    pub dual: DualState<S>,
    pub report: SolveReport,
}

fn relative<S: Real>(gap: S, b: S) -> S {
    gap / S::one().max(b.abs())
}

/// The density rebuilt from the momentum multiplier solves the continuity
/// equation exactly but may dip below zero in vacuum while the splitting is
/// not converged. Such states are pulled towards the feasible rest state
/// `(m0, 0)` by the smallest blend (from a short list of multiples of the
/// minimal one) that gives the lowest `B`.
fn certified_primal<S: Real>(spec: &ProblemSpec<S>, w: &VectorField<S>) -> Result<(PrimalState<S>, S)> {
    let raw = PrimalState::from_momentum(&spec.m0, w.clone())?;
    if raw.m.min() >= S::zero() {
        let b = evaluate_b(spec, &raw);
        return Ok((raw, b));
    }
    let n = spec.grid.points();
    let rest = spec.m0.slice(0);
    let mut theta_min = S::zero();
    for slab in raw.m.data().chunks(n) {
        for (&m, &r) in slab.iter().zip(rest) {
            if m < S::zero() {
                if r <= S::zero() {
                    return Ok((raw, S::infinity()));
                }
                theta_min = theta_min.max(-m / (r - m));
            }
        }
    }
    let mut best = (raw.clone(), S::infinity());
    for factor in [1.25, 1.5, 2.0, 3.0, 5.0, 10.0] {
        let theta = (theta_min * S::c(factor)).min(S::one());
        let keep = S::one() - theta;
        let mut m = raw.m.clone();
        for slab in m.data_mut().chunks_mut(n) {
            for (x, &r) in slab.iter_mut().zip(rest) {
                *x = keep * *x + theta * r;
            }
        }
        let state = PrimalState { m, w: VectorField::from_vec(&spec.grid, Layout::Intervals, w.data().iter().map(|&x| keep * x).collect())? };
        let b = evaluate_b(spec, &state);
        if b < best.1 {
            best = (state, b);
        }
    }
    Ok(best)
}

/// Runs the splitting until the relative duality gap `(A + B) / max(1, |B|)`
/// drops below `tol` or `max_iter` sweeps are spent. Non-convergence is not
/// an error: the best pair found is returned with `converged = false`.
pub fn solve<S: Real>(spec: &ProblemSpec<S>) -> Result<SolveOutcome<S>> {
    let grid = spec.grid;
    let knobs = spec.knobs;
    let r = knobs.r;
    let tau = S::one() / r;
    let n = grid.points();
    let d = grid.dim();

    let mut u = ScalarField::extend_in_time(&spec.psi, Layout::Nodes);
    let mut sigma = StaggeredPair {
        a: ScalarField::extend_in_time(&spec.m0, Layout::Intervals),
        b: VectorField::zeros(&grid, Layout::Intervals),
    };
    let mut q = space_time_gradient(&u)?;
    let mut du_prev = q.clone();

    let stride = (knobs.max_iter / HISTORY_SAMPLES).max(1);
    let mut history = Vec::new();
    let mut best: Option<(S, usize, PrimalState<S>, DualState<S>)> = None;
    let mut last = (S::zero(), S::zero());
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=knobs.max_iter {
        iterations = it;
        // potential step
        let mut combo = sigma.clone();
        combo.a.data_mut().iter_mut().zip(q.a.data()).for_each(|(s, &x)| *s = *s + r * x);
        combo.b.data_mut().iter_mut().zip(q.b.data()).for_each(|(s, &x)| *s = *s + r * x);
        let rhs = space_time_gradient_adjoint(&combo)?;
        u = elliptic_solve(&rhs, &spec.m0, &spec.psi, r)?;
        let du = space_time_gradient(&u)?;

        // proximal step, pointwise over every interval and cell
        let model = spec.model;
        let a_src: Vec<S> = du.a.data().iter().zip(sigma.a.data()).map(|(&x, &s)| x - s * tau).collect();
        let b_src: Vec<S> = du.b.data().iter().zip(sigma.b.data()).map(|(&x, &s)| x - s * tau).collect();
        let results: Vec<Result<Vec<(S, [S; 2], S)>>> = (0..grid.nt())
            .into_par_iter()
            .map(|k| {
                (0..n)
                    .map(|i| {
                        let a0 = a_src[k * n + i];
                        let mut b0 = [S::zero(); 2];
                        for ax in 0..d {
                            b0[ax] = b_src[k * n * d + ax * n + i];
                        }
                        let p = prox_hamiltonian(&model, tau, a0, b0)?;
                        Ok((p.a, p.b, p.lambda))
                    })
                    .collect()
            })
            .collect();
        for (k, slab) in results.into_iter().enumerate() {
            for (i, (qa, qb, lambda)) in slab?.into_iter().enumerate() {
                q.a.slice_mut(k)[i] = qa;
                sigma.a.slice_mut(k)[i] = lambda;
                for ax in 0..d {
                    q.b.slice_mut(k)[ax * n + i] = qb[ax];
                    sigma.b.slice_mut(k)[ax * n + i] = -lambda * qb[ax];
                }
            }
        }

        // residuals of the splitting
        let mut diff = q.clone();
        diff.a.data_mut().iter_mut().zip(du.a.data()).for_each(|(x, &y)| *x = *x - y);
        diff.b.data_mut().iter_mut().zip(du.b.data()).for_each(|(x, &y)| *x = *x - y);
        let primal_res = diff.norm();
        let mut step = du.clone();
        step.a.data_mut().iter_mut().zip(du_prev.a.data()).for_each(|(x, &y)| *x = *x - y);
        step.b.data_mut().iter_mut().zip(du_prev.b.data()).for_each(|(x, &y)| *x = *x - y);
        let dual_res = r * step.norm();
        du_prev = du;
        last = (primal_res, dual_res);

        // certificate: exact pair built from the current iterate
        let (primal, b) = certified_primal(spec, &sigma.b)?;
        let dual = DualState::from_potential(u.clone())?;
        let gap = evaluate_a(spec, &dual)? + b;
        let improved = gap.is_finite() && best.as_ref().map_or(true, |(g, ..)| gap < *g);
        if improved {
            best = Some((gap, it, primal, dual));
        }
        let best_gap = best.as_ref().map_or(S::infinity(), |(g, ..)| *g);
        let done = gap.is_finite() && relative(gap, b) <= knobs.tol;
        if it % stride == 0 || it == 1 || done || it == knobs.max_iter {
            history.push(IterationRecord {
                iteration: it,
                gap: gap.as_f64(),
                best_gap: best_gap.as_f64(),
                primal_residual: primal_res.as_f64(),
                dual_residual: dual_res.as_f64(),
            });
        }
        if done {
            converged = true;
            break;
        }
    }

    let (best_iteration, primal, dual) = match best {
        Some((_, it, p, d)) => (it, p, d),
        None => (iterations, certified_primal(spec, &sigma.b)?.0, DualState::from_potential(u)?),
    };
    let parts = gap_decomposition(spec, &primal, &dual)?;
    let mbar = primal.interval_density();
    let mismatch = mbar.data().iter().zip(sigma.a.data()).fold(S::zero(), |s, (&x, &y)| s.max((x - y).abs()));
    let mass0 = integrate(&grid, spec.m0.slice(0));
    let drift = primal.masses().iter().fold(S::zero(), |s, &m| s.max((m - mass0).abs()));
    let report = SolveReport {
        converged,
        iterations,
        model: spec.model.name().to_string(),
        r: r.as_f64(),
        tol: knobs.tol.as_f64(),
        max_iter: knobs.max_iter,
        best_iteration,
        a: parts.a.as_f64(),
        b: parts.b.as_f64(),
        gap: parts.gap.as_f64(),
        relative_gap: relative(parts.gap, parts.b).as_f64(),
        fenchel_term: parts.fenchel.as_f64(),
        kinetic_term: parts.kinetic.as_f64(),
        primal_residual: last.0.as_f64(),
        dual_residual: last.1.as_f64(),
        multiplier_mismatch: mismatch.as_f64(),
        continuity_residual: continuity_residual(&primal, &spec.m0)?.as_f64(),
        min_density: primal.m.min().as_f64(),
        mass_drift: drift.as_f64(),
        history,
    };
    Ok(SolveOutcome { primal, dual, report })
}
