//! Discrete primal and dual objectives and the exact splitting of their sum.

use super::{DualState, ProblemSpec};
use crate::error::{shape, Result};
use crate::grid::{divergence_slice, integrate, space_time_gradient};
use crate::real::Real;
use crate::transport::PrimalState;

/// `B(m, w) = sum_k ht hx^d [|w_k|^2 / (2 m_{k+1}) + G(m_{k+1})] + hx^d sum psi m_T`.
/// Infinite when a density is negative or momentum sits on vacuum.
pub fn evaluate_b<S: Real>(spec: &ProblemSpec<S>, primal: &PrimalState<S>) -> S {
    let grid = spec.grid;
    let n = grid.points();
    let half = S::c(0.5);
    if primal.m.min() < S::zero() {
        return S::infinity();
    }
    let mbar = primal.interval_density();
    let mut running = S::zero();
    for k in 0..grid.nt() {
        let dens = mbar.slice(k);
        let mut slab = S::zero();
        for i in 0..n {
            let w2 = primal.w.norm_sq_at(k, i);
            let kin = if w2 == S::zero() {
                S::zero()
            } else if dens[i] > S::zero() {
                half * w2 / dens[i]
            } else {
                return S::infinity();
            };
            slab = slab + kin + spec.model.cost(dens[i]);
        }
        running = running + slab;
    }
    let terminal = primal.m.slice(grid.nt()).iter().zip(spec.psi.slice(0)).fold(S::zero(), |s, (&m, &p)| s + m * p);
    running * grid.ht() * grid.cell_volume() + terminal * grid.cell_volume()
}

/// `A(u, p) = sum ht hx^d G*(p) - hx^d sum u_0 m0`.
pub fn evaluate_a<S: Real>(spec: &ProblemSpec<S>, dual: &DualState<S>) -> Result<S> {
    check_dual(spec, dual)?;
    let grid = spec.grid;
    let price = dual.p.data().iter().fold(S::zero(), |s, &p| s + spec.model.conj(p));
    let initial = integrate(&grid, &dual.u.slice(0).iter().zip(spec.m0.slice(0)).map(|(&u, &m)| u * m).collect::<Vec<_>>());
    Ok(price * grid.ht() * grid.cell_volume() - initial)
}

fn check_dual<S: Real>(spec: &ProblemSpec<S>, dual: &DualState<S>) -> Result<()> {
    if !dual.u.grid().same_shape(&spec.grid) || !dual.p.grid().same_shape(&spec.grid) {
        return Err(shape("dual state is not on the problem grid"));
    }
    dual.check_feasible(&spec.psi)
}

fn check_primal<S: Real>(spec: &ProblemSpec<S>, primal: &PrimalState<S>) -> Result<()> {
    if !primal.m.grid().same_shape(&spec.grid) {
        return Err(shape("primal state is not on the problem grid"));
    }
    Ok(())
}

/// `A + B` and its two nonnegative parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapDecomposition<S> {
    pub a: S,
    pub b: S,
    pub gap: S,
    /// `sum ht hx^d (G(m_{k+1}) + G*(p_k) - m_{k+1} p_k)`.
    pub fenchel: S,
    /// `sum ht hx^d |w_k + m_{k+1} grad u_k|^2 / (2 m_{k+1})`.
    pub kinetic: S,
}

impl<S: Real> GapDecomposition<S> {
    /// `|A + B - fenchel - kinetic|` relative to the size of the terms.
    pub fn identity_defect(&self) -> S {
        let scale = S::one().max(self.a.abs()).max(self.b.abs());
        (self.gap - self.fenchel - self.kinetic).abs() / scale
    }
}

/// Evaluates both objectives and the pointwise terms whose sum equals the gap
/// whenever the primal solves the discrete continuity equation from `m0`.
pub fn gap_decomposition<S: Real>(
    spec: &ProblemSpec<S>,
    primal: &PrimalState<S>,
    dual: &DualState<S>,
) -> Result<GapDecomposition<S>> {
    check_primal(spec, primal)?;
    let a = evaluate_a(spec, dual)?;
    let b = evaluate_b(spec, primal);
    let grid = spec.grid;
    let n = grid.points();
    let d = grid.dim();
    let half = S::c(0.5);
    let grad = space_time_gradient(&dual.u)?.b;
    let mbar = primal.interval_density();
    let mut fenchel = S::zero();
    let mut kinetic = S::zero();
    for k in 0..grid.nt() {
        let (dens, price, w, g) = (mbar.slice(k), dual.p.slice(k), primal.w.slice(k), grad.slice(k));
        for i in 0..n {
            let m = dens[i];
            fenchel = fenchel + spec.model.cost(m) + spec.model.conj(price[i]) - m * price[i];
            let r2 = (0..d).fold(S::zero(), |s, ax| {
                let e = w[ax * n + i] + m * g[ax * n + i];
                s + e * e
            });
            if r2 > S::zero() {
                kinetic = kinetic + if m > S::zero() { half * r2 / m } else { S::infinity() };
            }
        }
    }
    let w = grid.ht() * grid.cell_volume();
    Ok(GapDecomposition { a, b, gap: a + b, fenchel: fenchel * w, kinetic: kinetic * w })
}

/// `hx^d sum u_0 (m_0 - m0) + hx^d sum_k u_k ((m_{k+1} - m_k) + ht div w_k)`.
///
/// For any nonnegative primal state, admissible or not,
/// `A + B - pairing = fenchel + kinetic >= 0`; the pairing vanishes exactly
/// when the state solves the discrete continuity equation from `m0`.
pub fn continuity_pairing<S: Real>(spec: &ProblemSpec<S>, primal: &PrimalState<S>, dual: &DualState<S>) -> Result<S> {
    check_primal(spec, primal)?;
    check_dual(spec, dual)?;
    let grid = spec.grid;
    let n = grid.points();
    let ht = grid.ht();
    let mut div = vec![S::zero(); n];
    let first = dual.u.slice(0).iter().zip(primal.m.slice(0)).zip(spec.m0.slice(0)).fold(S::zero(), |s, ((&u, &a), &b)| s + u * (a - b));
    let mut total = first;
    for k in 0..grid.nt() {
        divergence_slice(&grid, primal.w.slice(k), &mut div);
        let (u, lo, hi) = (dual.u.slice(k), primal.m.slice(k), primal.m.slice(k + 1));
        total = total + (0..n).fold(S::zero(), |s, i| s + u[i] * (hi[i] - lo[i] + ht * div[i]));
    }
    Ok(total * grid.cell_volume())
}

/// Residuals of the optimality system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MfgResiduals<S> {
    /// `||p - g(m)||` in discrete L2 over cells whose interval density exceeds `rho`.
    pub price: S,
    /// `sum ht hx^d m |v + grad u|^2`, twice the kinetic gap term.
    pub velocity: S,
    /// `c sum ht hx^d |J(m) - J*(p)|^2`, bounded by the Fenchel term.
    pub qp: S,
}

pub fn mfg_residuals<S: Real>(
    spec: &ProblemSpec<S>,
    primal: &PrimalState<S>,
    dual: &DualState<S>,
    rho: S,
) -> Result<MfgResiduals<S>> {
    if !(rho > S::zero()) {
        return Err(crate::error::invalid(format!("rho must be > 0, got {rho}")));
    }
    let parts = gap_decomposition(spec, primal, dual)?;
    let grid = spec.grid;
    let mbar = primal.interval_density();
    let model = &spec.model;
    let mut price = S::zero();
    let mut qp = S::zero();
    for (&m, &p) in mbar.data().iter().zip(dual.p.data()) {
        if m > rho {
            let e = p - model.g(m)?;
            price = price + e * e;
        }
        if m >= S::zero() {
            let e = model.j(m) - model.j_star(p);
            qp = qp + e * e;
        }
    }
    let w = grid.ht() * grid.cell_volume();
    Ok(MfgResiduals { price: (price * w).sqrt(), velocity: S::c(2.0) * parts.kinetic, qp: model.c() * qp * w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congestion::CongestionModel;
    use crate::grid::{Grid, Layout, ScalarField, VectorField};
    use crate::solver::{FourierSeries, SolverKnobs};
    use std::f64::consts::PI;

    fn uniform_spec(model: CongestionModel<f64>, psi: f64) -> ProblemSpec<f64> {
        let g = Grid::new(1, 16, 8, 1.0).unwrap();
        ProblemSpec::from_series(g, model, &FourierSeries::constant(psi), None, SolverKnobs::default()).unwrap()
    }

    fn uniform_primal(g: &Grid<f64>) -> PrimalState<f64> {
        PrimalState::new(ScalarField::constant(g, Layout::Nodes, 1.0), VectorField::zeros(g, Layout::Intervals)).unwrap()
    }

    fn matched_dual(g: &Grid<f64>, psi: f64) -> DualState<f64> {
        DualState::from_potential(ScalarField::from_fn(g, Layout::Nodes, |t, _| psi + 1.0 - t)).unwrap()
    }

    #[test]
    fn uniform_values() {
        let spec = uniform_spec(CongestionModel::quadratic(), 0.3);
        let b = evaluate_b(&spec, &uniform_primal(&spec.grid));
        assert!((b - 0.8).abs() < 1e-14);
        let a = evaluate_a(&spec, &matched_dual(&spec.grid, 0.3)).unwrap();
        assert!((a - (0.5 - 1.3)).abs() < 1e-14);
        let parts = gap_decomposition(&spec, &uniform_primal(&spec.grid), &matched_dual(&spec.grid, 0.3)).unwrap();
        assert!(parts.gap.abs() < 1e-12 && parts.fenchel.abs() < 1e-12 && parts.kinetic == 0.0);
    }

    #[test]
    fn zero_price() {
        let g = Grid::<f64>::new(1, 16, 8, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, Layout::Nodes, |_, x| 0.2 * (2.0 * PI * x[0]).cos());
        let dual = DualState { u: u.clone(), p: ScalarField::zeros(&g, Layout::Intervals) };
        let psi = FourierSeries::cosine(0.0, 0.2, 1);
        let m0 = FourierSeries::cosine(1.0, 0.5, 1);
        let quad = ProblemSpec::from_series(g, CongestionModel::quadratic(), &psi, Some(&m0), SolverKnobs::default()).unwrap();
        let ent = ProblemSpec::from_series(g, CongestionModel::entropy_with_c0(0.9).unwrap(), &psi, Some(&m0), SolverKnobs::default()).unwrap();
        let pairing = integrate(&g, &u.slice(0).iter().zip(quad.m0.slice(0)).map(|(a, b)| a * b).collect::<Vec<_>>());
        assert!((evaluate_a(&quad, &dual).unwrap() + pairing).abs() < 1e-14);
        assert!((evaluate_a(&ent, &dual).unwrap() - (1.0 - pairing)).abs() < 1e-13);
    }

    #[test]
    fn domain_violations() {
        let spec = uniform_spec(CongestionModel::quadratic(), 0.0);
        let g = spec.grid;
        let mut st = uniform_primal(&g);
        st.m.slice_mut(3)[2] = -1e-3;
        assert_eq!(evaluate_b(&spec, &st), f64::INFINITY);
        let mut st = uniform_primal(&g);
        st.m.slice_mut(3)[2] = 0.0;
        st.m.slice_mut(4)[2] = 0.0;
        assert!(evaluate_b(&spec, &st).is_finite());
        st.w.slice_mut(3)[2] = 0.1;
        assert_eq!(evaluate_b(&spec, &st), f64::INFINITY);
    }

    #[test]
    fn infeasible_dual_is_rejected() {
        let spec = uniform_spec(CongestionModel::quadratic(), 0.0);
        let dual = matched_dual(&spec.grid, 1e-9);
        assert!(evaluate_a(&spec, &dual).is_err());
    }

    #[test]
    fn perturbed_dual_keeps_identity() {
        let spec = uniform_spec(CongestionModel::quadratic(), 0.0);
        let g = spec.grid;
        let primal = uniform_primal(&g);
        let mut gaps = Vec::new();
        for &eta in &[0.002, 0.001] {
            let u = ScalarField::from_fn(&g, Layout::Nodes, |t, x| 1.0 - t + eta * (2.0 * PI * x[0]).cos() * (1.0 - t));
            let parts = gap_decomposition(&spec, &primal, &DualState::from_potential(u).unwrap()).unwrap();
            assert!(parts.identity_defect() < 1e-12);
            gaps.push((parts.fenchel, parts.kinetic));
        }
        for (big, small) in [(gaps[0].0, gaps[1].0), (gaps[0].1, gaps[1].1)] {
            assert!(small > 0.0 && (big / small - 4.0).abs() < 0.3, "{gaps:?}");
        }
    }

    #[test]
    fn velocity_shift_only_moves_kinetic() {
        let spec = uniform_spec(CongestionModel::quadratic(), 0.0);
        let g = spec.grid;
        let dual = matched_dual(&g, 0.0);
        let still = gap_decomposition(&spec, &uniform_primal(&g), &dual).unwrap();
        let moving = PrimalState::new(
            ScalarField::constant(&g, Layout::Nodes, 1.0),
            VectorField::from_fn(&g, Layout::Intervals, |_, _| [0.25, 0.0]),
        )
        .unwrap();
        let shifted = gap_decomposition(&spec, &moving, &dual).unwrap();
        assert!(shifted.kinetic > still.kinetic + 1e-3);
        assert!((shifted.fenchel - still.fenchel).abs() < 1e-14);
        assert!(shifted.identity_defect() < 1e-12);
        let res = mfg_residuals(&spec, &moving, &dual, 1e-3).unwrap();
        assert!(res.price < 1e-14 && (res.velocity - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn pairing_closes_the_identity_off_the_constraint() {
        let spec = uniform_spec(CongestionModel::quadratic(), 0.2);
        let g = spec.grid;
        let tau = std::f64::consts::TAU;
        let u = ScalarField::from_fn(&g, Layout::Nodes, |t, x| 1.2 - t + 0.3 * t * (1.0 - t) * (tau * x[0]).cos());
        let dual = DualState::from_potential(u).unwrap();
        let m = ScalarField::from_fn(&g, Layout::Nodes, |t, x| 1.0 + 0.2 * t * (tau * x[0]).sin());
        let w = VectorField::from_fn(&g, Layout::Intervals, |t, x| [0.1 * (tau * (x[0] + t)).cos(), 0.0]);
        let off = PrimalState::new(m, w).unwrap();
        let parts = gap_decomposition(&spec, &off, &dual).unwrap();
        let pairing = continuity_pairing(&spec, &off, &dual).unwrap();
        assert!(pairing.abs() > 1e-3);
        assert!((parts.a + parts.b - pairing - parts.fenchel - parts.kinetic).abs() < 1e-12);
        let exact = PrimalState::from_momentum(&spec.m0, off.w.clone()).unwrap();
        assert!(continuity_pairing(&spec, &exact, &dual).unwrap().abs() < 1e-14);
    }
}
