//! The primal/dual pair, its functionals and the augmented Lagrangian
//! splitting that solves it.

mod alg2;
mod functionals;

pub use alg2::{solve, IterationRecord, SolveOutcome, SolveReport};
pub use functionals::{continuity_pairing, evaluate_a, evaluate_b, gap_decomposition, mfg_residuals, GapDecomposition, MfgResiduals};

use serde::{Deserialize, Serialize};

use crate::congestion::CongestionModel;
use crate::error::{invalid, shape, MfgError, Result};
use crate::grid::{gradient_slice, integrate, time_derivative, Grid, Layout, ScalarField};
use crate::real::Real;

/// One term `a cos(2 pi k.x) + b sin(2 pi k.x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub k: Vec<i64>,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

/// `c0 + sum_j (a_j cos(2 pi k_j.x) + b_j sin(2 pi k_j.x))`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSeries {
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub terms: Vec<FourierTerm>,
}

impl FourierSeries {
    pub fn constant(c0: f64) -> Self {
        FourierSeries { c0, terms: Vec::new() }
    }

    pub fn cosine(c0: f64, amplitude: f64, k: i64) -> Self {
        FourierSeries { c0, terms: vec![FourierTerm { k: vec![k], a: amplitude, b: 0.0 }] }
    }

    /// Checks that every wave vector has `d` entries.
    pub fn validate(&self, dim: usize, name: &str) -> Result<()> {
        for t in &self.terms {
            if t.k.len() != dim {
                return Err(invalid(format!("{name}: wave vector {:?} needs {dim} entries", t.k)));
            }
            if !t.a.is_finite() || !t.b.is_finite() {
                return Err(invalid(format!("{name}: coefficients must be finite")));
            }
        }
        if !self.c0.is_finite() {
            return Err(invalid(format!("{name}: c0 must be finite")));
        }
        Ok(())
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        self.terms.iter().fold(self.c0, |acc, t| {
            let phase = two_pi * t.k.iter().zip(x).map(|(&k, xi)| k as f64 * xi).sum::<f64>();
            acc + t.a * phase.cos() + t.b * phase.sin()
        })
    }

    /// Sup norm bound `|c0| + sum (|a| + |b|)`.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().fold(self.c0.abs(), |s, t| s + t.a.abs() + t.b.abs())
    }

    pub fn sample<S: Real>(&self, grid: &Grid<S>) -> ScalarField<S> {
        grid.sample(|x| S::c(self.eval([x[0].as_f64(), x[1].as_f64()])))
    }
}

/// Splitting knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverKnobs<S> {
    /// Augmented Lagrangian penalty.
    pub r: S,
    pub max_iter: usize,
    /// Target relative duality gap.
    pub tol: S,
}

impl<S: Real> Default for SolverKnobs<S> {
    fn default() -> Self {
        SolverKnobs { r: S::one(), max_iter: 20_000, tol: S::c(1e-6) }
    }
}

/// Problem data: grid, congestion, terminal cost `psi`, initial density `m0`.
#[derive(Clone, Debug)]
pub struct ProblemSpec<S> {
    pub grid: Grid<S>,
    pub model: CongestionModel<S>,
    pub psi: ScalarField<S>,
    pub m0: ScalarField<S>,
    pub knobs: SolverKnobs<S>,
}

impl<S: Real> ProblemSpec<S> {
    pub fn new(
        grid: Grid<S>,
        model: CongestionModel<S>,
        psi: ScalarField<S>,
        m0: ScalarField<S>,
        knobs: SolverKnobs<S>,
    ) -> Result<Self> {
        for (f, name) in [(&psi, "psi"), (&m0, "m0")] {
            if f.layout() != Layout::Spatial || !f.grid().same_shape(&grid) {
                return Err(shape(format!("{name} must be a spatial field on the problem grid")));
            }
            if !f.is_finite() {
                return Err(invalid(format!("{name} has non-finite values")));
            }
        }
        if m0.min() < S::zero() {
            return Err(invalid(format!("m0 must be >= 0, min is {}", m0.min())));
        }
        let mass = integrate(&grid, m0.slice(0));
        if !((mass - S::one()).abs() <= S::tol(1e-8)) {
            return Err(invalid(format!("m0 must have unit mass, got {mass}")));
        }
        if !(knobs.r > S::zero()) {
            return Err(invalid(format!("r > 0 required, got {}", knobs.r)));
        }
        if knobs.max_iter == 0 {
            return Err(invalid("max_iter ≥ 1 required"));
        }
        if !(knobs.tol > S::zero()) {
            return Err(invalid(format!("tol > 0 required, got {}", knobs.tol)));
        }
        Ok(ProblemSpec { grid, model, psi, m0, knobs })
    }

    /// Builds the data from Fourier series; `m0 = None` is the uniform density.
    pub fn from_series(
        grid: Grid<S>,
        model: CongestionModel<S>,
        psi: &FourierSeries,
        m0: Option<&FourierSeries>,
        knobs: SolverKnobs<S>,
    ) -> Result<Self> {
        psi.validate(grid.dim(), "psi")?;
        let m0 = match m0 {
            Some(s) => {
                s.validate(grid.dim(), "m0")?;
                s.sample(&grid)
            }
            None => ScalarField::constant(&grid, Layout::Spatial, S::one()),
        };
        Self::new(grid, model, psi.sample(&grid), m0, knobs)
    }
}

/// Potential on nodes and price `p = -D_t u + |grad u|^2 / 2` on intervals,
/// the gradient taken at the left node of each interval.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState<S> {
    pub u: ScalarField<S>,
    pub p: ScalarField<S>,
}

impl<S: Real> DualState<S> {
    /// The feasible price of a potential.
    pub fn from_potential(u: ScalarField<S>) -> Result<Self> {
        let grid = *u.grid();
        let mut p = time_derivative(&u)?;
        let n = grid.points();
        let d = grid.dim();
        let half = S::c(0.5);
        let mut grad = vec![S::zero(); n * d];
        for k in 0..grid.nt() {
            gradient_slice(&grid, u.slice(k), &mut grad);
            let slab = p.slice_mut(k);
            for i in 0..n {
                let g2 = (0..d).fold(S::zero(), |s, a| s + grad[a * n + i] * grad[a * n + i]);
                slab[i] = -slab[i] + half * g2;
            }
        }
        Ok(DualState { u, p })
    }

    /// Largest `|u(T) - psi|`.
    pub fn terminal_mismatch(&self, psi: &ScalarField<S>) -> S {
        let nt = self.u.grid().nt();
        self.u.slice(nt).iter().zip(psi.slice(0)).fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub(crate) fn check_feasible(&self, psi: &ScalarField<S>) -> Result<()> {
        let gap = self.terminal_mismatch(psi);
        let scale = psi.max_abs().max(S::one());
        if !(gap <= S::tol(1e-12) * scale) {
            return Err(MfgError::InfeasibleDual(format!("u(T) differs from psi by {gap}")));
        }
        Ok(())
    }
}
