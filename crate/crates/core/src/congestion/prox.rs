//! Pointwise proximal map of `H(a, b) = G*(-a + |b|^2 / 2)`.
//!
//! The minimizer of `|a - a0|^2/2 + |b - b0|^2/2 + tau H(a, b)` is
//! `a = a0 + tau l`, `b = b0 / (1 + tau l)` where `l >= 0` solves
//! `l = (G*)'(s(l))`, `s(l) = -a0 - tau l + |b0|^2 / (2 (1 + tau l)^2)`.
//! `s` is decreasing, so the scalar equation is monotone with slope >= 1.

use super::{CongestionModel, ModelKind};
use crate::error::{invalid, MfgError, Result};
use crate::real::Real;

const MAX_ITER: usize = 200;

/// Output of [`prox_hamiltonian`]; `lambda` is the recovered density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prox<S> {
    pub a: S,
    pub b: [S; 2],
    pub lambda: S,
}

/// The objective the proximal map minimizes.
pub fn prox_objective<S: Real>(model: &CongestionModel<S>, tau: S, a0: S, b0: [S; 2], a: S, b: [S; 2]) -> S {
    let half = S::c(0.5);
    let db = (b[0] - b0[0]) * (b[0] - b0[0]) + (b[1] - b0[1]) * (b[1] - b0[1]);
    let bb = b[0] * b[0] + b[1] * b[1];
    half * (a - a0) * (a - a0) + half * db + tau * model.conj(-a + half * bb)
}

pub fn prox_hamiltonian<S: Real>(model: &CongestionModel<S>, tau: S, a0: S, b0: [S; 2]) -> Result<Prox<S>> {
    if !(tau > S::zero()) {
        return Err(invalid(format!("prox step must be > 0, got {tau}")));
    }
    let half = S::c(0.5);
    let bb = b0[0] * b0[0] + b0[1] * b0[1];
    let s = |l: S| {
        let k = S::one() + tau * l;
        -a0 - tau * l + half * bb / (k * k)
    };
    let ds = |l: S| {
        let k = S::one() + tau * l;
        -tau - tau * bb / (k * k * k)
    };

    let lambda = match model.kind() {
        ModelKind::Entropy => solve_log(s, ds)?,
        _ => solve_direct(model, s, ds)?,
    };
    let k = S::one() + tau * lambda;
    Ok(Prox { a: a0 + tau * lambda, b: [b0[0] / k, b0[1] / k], lambda })
}

/// Both scalar equations have slope >= 1, so `|f(x)|` bounds the distance
/// to the root and serves as the stopping test.
fn stop<S: Real>(f: S, x: S) -> bool {
    f.abs() <= S::tol(1e-12) * x.abs().max(S::one())
}

/// Newton on an increasing `f` whose root lies in `[lo, hi]`, bisecting when
/// the step leaves the bracket or fails to halve. Near a cancellation the
/// residual can stall above the stopping test, so the bracket width (which
/// bounds the error) also ends the iteration.
fn bracketed_newton<S: Real>(f: impl Fn(S) -> S, df: impl Fn(S) -> S, mut lo: S, mut hi: S, mut x: S, what: &str) -> Result<S> {
    let mut last_step = hi - lo;
    for _ in 0..MAX_ITER {
        let fx = f(x);
        if stop(fx, x) {
            return Ok(x);
        }
        if fx < S::zero() {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= S::tol(1e-12) * x.abs().max(S::one()) {
            return Ok(x);
        }
        let step = fx / df(x);
        let newton = x - step;
        if newton.is_finite() && newton > lo && newton < hi && step.abs() * S::c(2.0) <= last_step {
            last_step = step.abs();
            x = newton;
        } else {
            last_step = (hi - lo) * S::c(0.5);
            x = half_point(lo, hi);
        }
    }
    Err(MfgError::NonConvergence { what: what.into(), iterations: MAX_ITER })
}

/// `phi(l) = l - (G*)'(s(l))` on `[0, (G*)'(s(0))]`.
fn solve_direct<S: Real>(model: &CongestionModel<S>, s: impl Fn(S) -> S, ds: impl Fn(S) -> S) -> Result<S> {
    let top = model.conj_deriv(s(S::zero()));
    if top == S::zero() {
        return Ok(S::zero());
    }
    let phi = |l: S| l - model.conj_deriv(s(l));
    let dphi = |l: S| S::one() - model.conj_second(s(l)) * ds(l);
    bracketed_newton(phi, dphi, S::zero(), top, top, "prox scalar equation")
}

/// Entropy: `psi(l) = l - s(e^l)` in log-density.
fn solve_log<S: Real>(s: impl Fn(S) -> S, ds: impl Fn(S) -> S) -> Result<S> {
    // keeps e^l finite
    let cap = S::max_value().ln() - S::c(10.0);
    let psi = |l: S| l - s(l.exp());
    let mut hi = s(S::zero()).min(cap);
    if psi(hi) < S::zero() {
        return Err(MfgError::Domain("entropy prox: log-density exceeds the overflow cap".into()));
    }
    let mut step = S::one();
    let mut lo = hi - step;
    let mut grow = 0;
    while psi(lo) > S::zero() {
        hi = lo;
        step = step + step;
        lo = lo - step;
        grow += 1;
        if grow > 2000 {
            return Err(MfgError::NonConvergence { what: "entropy prox bracket".into(), iterations: grow });
        }
    }
    let dpsi = |l: S| {
        let e = l.exp();
        S::one() - ds(e) * e
    };
    let x = bracketed_newton(psi, dpsi, lo, hi, half_point(lo, hi), "entropy prox scalar equation")?;
    Ok(x.exp())
}

fn half_point<S: Real>(lo: S, hi: S) -> S {
    lo + (hi - lo) * S::c(0.5)
}
