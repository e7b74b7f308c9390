//! Densities, momenta and the measure-theoretic tools built on them.

mod pushforward;
mod speed;
mod trajectory;
mod w2;

pub use pushforward::{pushforward_terminal, Pushforward};
pub use speed::{metric_speed, SpeedMethod};
pub use trajectory::{flow_trajectories, Trajectory};
pub use w2::{w2_circle, w2_circle_measures, CircleMeasure};

use crate::error::{shape, Result};
use crate::grid::{divergence_slice, integrate, Layout, ScalarField, VectorField};
use crate::real::Real;

/// Threshold below which a density carries no velocity.
pub const VELOCITY_FLOOR: f64 = 1e-12;

/// Density on time nodes and momentum `w = m v` on time intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalState<S> {
    pub m: ScalarField<S>,
    pub w: VectorField<S>,
}

impl<S: Real> PrimalState<S> {
    pub fn new(m: ScalarField<S>, w: VectorField<S>) -> Result<Self> {
        if m.layout() != Layout::Nodes || w.layout() != Layout::Intervals {
            return Err(shape("density must live on nodes and momentum on intervals"));
        }
        if !m.grid().same_shape(w.grid()) {
            return Err(shape("density and momentum on different grids"));
        }
        Ok(PrimalState { m, w })
    }

    /// The unique node density with `m_0 = m0` that solves the discrete
    /// continuity equation `m_{k+1} = m_k - ht div w_k` exactly.
    pub fn from_momentum(m0: &ScalarField<S>, w: VectorField<S>) -> Result<Self> {
        let grid = *w.grid();
        if m0.layout() != Layout::Spatial || !m0.grid().same_shape(&grid) || w.layout() != Layout::Intervals {
            return Err(shape("from_momentum needs a spatial m0 and an interval momentum on one grid"));
        }
        let n = grid.points();
        let ht = grid.ht();
        let mut m = ScalarField::zeros(&grid, Layout::Nodes);
        m.slice_mut(0).copy_from_slice(m0.slice(0));
        let mut div = vec![S::zero(); n];
        for k in 0..grid.nt() {
            divergence_slice(&grid, w.slice(k), &mut div);
            let data = m.data_mut();
            let (head, tail) = data.split_at_mut((k + 1) * n);
            let cur = &head[k * n..];
            for i in 0..n {
                tail[i] = cur[i] - ht * div[i];
            }
        }
        Ok(PrimalState { m, w })
    }

    /// The density that carries the momentum of interval `k`: `m_{k+1}`.
    pub fn interval_density(&self) -> ScalarField<S> {
        let grid = *self.m.grid();
        let n = grid.points();
        ScalarField::from_vec(&grid, Layout::Intervals, self.m.data()[n..].to_vec()).expect("node field")
    }

    /// `w / m_bar` where `m_bar > 1e-12`, zero elsewhere.
    pub fn velocity(&self) -> VectorField<S> {
        let mbar = self.interval_density();
        let grid = *self.m.grid();
        let n = grid.points();
        let floor = S::c(VELOCITY_FLOOR);
        let mut v = self.w.clone();
        for k in 0..grid.nt() {
            let dens = mbar.slice(k);
            let slab = v.slice_mut(k);
            for a in 0..grid.dim() {
                for i in 0..n {
                    let x = &mut slab[a * n + i];
                    *x = if dens[i] > floor { *x / dens[i] } else { S::zero() };
                }
            }
        }
        v
    }

    /// Mass of every node slice.
    pub fn masses(&self) -> Vec<S> {
        (0..self.m.slices()).map(|k| integrate(self.m.grid(), self.m.slice(k))).collect()
    }
}

/// Largest discrete L1 norm over intervals of `(m_{k+1} - m_k)/ht + div w_k`,
/// plus the L1 mismatch of the first slice with `m0`.
pub fn continuity_residual<S: Real>(state: &PrimalState<S>, m0: &ScalarField<S>) -> Result<S> {
    let grid = *state.m.grid();
    if m0.layout() != Layout::Spatial || !m0.grid().same_shape(&grid) {
        return Err(shape("initial density must be a spatial field on the state grid"));
    }
    let n = grid.points();
    let inv_ht = S::one() / grid.ht();
    let mut div = vec![S::zero(); n];
    let mut worst = S::zero();
    for k in 0..grid.nt() {
        divergence_slice(&grid, state.w.slice(k), &mut div);
        let (a, b) = (state.m.slice(k), state.m.slice(k + 1));
        let l1 = (0..n).fold(S::zero(), |s, i| s + ((b[i] - a[i]) * inv_ht + div[i]).abs());
        worst = worst.max(l1 * grid.cell_volume());
    }
    let first = state.m.slice(0).iter().zip(m0.slice(0)).fold(S::zero(), |s, (&x, &y)| s + (x - y).abs());
    Ok(worst + first * grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn static_uniform_is_conservative() {
        let g = Grid::<f64>::new(1, 16, 8, 1.0).unwrap();
        let st = PrimalState::new(ScalarField::constant(&g, Layout::Nodes, 1.0), VectorField::zeros(&g, Layout::Intervals)).unwrap();
        assert_eq!(continuity_residual(&st, &g.sample(|_| 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn zero_momentum_measures_time_variation() {
        let g = Grid::<f64>::new(1, 8, 4, 1.0).unwrap();
        let m = ScalarField::from_fn(&g, Layout::Nodes, |t, x| 1.0 + t * (2.0 * PI * x[0]).cos());
        let st = PrimalState::new(m.clone(), VectorField::zeros(&g, Layout::Intervals)).unwrap();
        let r = continuity_residual(&st, &m.spatial(0)).unwrap();
        // every interval changes by the same amount: hx * sum |cos| * ht / ht
        let tv: f64 = (0..8).map(|i| (2.0 * PI * i as f64 / 8.0).cos().abs()).sum::<f64>() / 8.0;
        assert!((r - tv).abs() < 1e-12, "{r} vs {tv}");
    }

    #[test]
    fn translating_profile_is_consistent() {
        let rho = |x: f64| 1.0 + 0.5 * (2.0 * PI * x).sin();
        let mut last = f64::INFINITY;
        for &n in &[32usize, 64, 128] {
            let g = Grid::<f64>::new(1, n, n, 1.0).unwrap();
            let c = 1.0;
            let m = ScalarField::from_fn(&g, Layout::Nodes, |t, x| rho(x[0] - c * t));
            let w = VectorField::from_fn(&g, Layout::Intervals, |t, x| [c * rho(x[0] - c * t), 0.0]);
            let st = PrimalState::new(m, w).unwrap();
            let r = continuity_residual(&st, &g.sample(|x| rho(x[0]))).unwrap();
            assert!(r < last);
            last = r;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn velocity_respects_floor() {
        let g = Grid::<f64>::new(1, 4, 4, 1.0).unwrap();
        let m = ScalarField::from_fn(&g, Layout::Nodes, |_, x| if x[0] < 0.5 { 2.0 } else { 0.0 });
        let w = VectorField::from_fn(&g, Layout::Intervals, |_, _| [1.0, 0.0]);
        let v = PrimalState::new(m, w).unwrap().velocity();
        assert_eq!(v.component(0, 0), &[0.5, 0.5, 0.0, 0.0]);
    }
}
