//! Agent paths `x'(t) = -grad u(t, x(t))`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{shape, Result};
use crate::grid::{gradient_x, interpolate, wrap_position, Layout, ScalarField, VectorField};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<S>,
    /// Positions wrapped to `[0, 1)^d`; unused components are zero.
    pub positions: Vec<[S; 2]>,
    /// Displacement from the start without wrapping.
    pub unwrapped: Vec<[S; 2]>,
}

impl<S: Real> Trajectory<S> {
    /// CSV with header `t,x1` or `t,x1,x2`.
    pub fn write_csv(&self, mut out: impl Write, dim: usize) -> std::io::Result<()> {
        let header = if dim == 1 { "t,x1" } else { "t,x1,x2" };
        writeln!(out, "{header}")?;
        for (t, x) in self.times.iter().zip(&self.positions) {
            if dim == 1 {
                writeln!(out, "{},{}", t.as_f64(), x[0].as_f64())?;
            } else {
                writeln!(out, "{},{},{}", t.as_f64(), x[0].as_f64(), x[1].as_f64())?;
            }
        }
        Ok(())
    }
}

/// `-grad u` at time `t` and position `x`: bilinear in space, linear in
/// time between node slices.
fn velocity<S: Real>(grad: &VectorField<S>, t: S, x: [S; 2]) -> [S; 2] {
    let grid = grad.grid();
    let nt = grid.nt();
    let s = (t / grid.ht()).max(S::zero()).min(S::c(nt as f64));
    let k = s.floor().to_usize().unwrap_or(0).min(nt - 1);
    let frac = s - S::c(k as f64);
    let mut out = [S::zero(); 2];
    for (a, o) in out.iter_mut().enumerate().take(grid.dim()) {
        let g0 = interpolate(grid, grad.component(k, a), x);
        let g1 = interpolate(grid, grad.component(k + 1, a), x);
        *o = -(g0 * (S::one() - frac) + g1 * frac);
    }
    out
}

/// Classical RK4 with `substeps` steps per time interval, sampled at every
/// time node.
pub fn flow_trajectories<S: Real>(u: &ScalarField<S>, starts: &[[S; 2]], substeps: usize) -> Result<Vec<Trajectory<S>>> {
    if u.layout() != Layout::Nodes {
        return Err(shape("trajectories need the potential on time nodes"));
    }
    let grid = *u.grid();
    let grad = gradient_x(u);
    let substeps = substeps.max(1);
    let h = grid.ht() / S::c(substeps as f64);
    let half = S::c(0.5);
    let sixth = S::one() / S::c(6.0);
    let two = S::c(2.0);
    let d = grid.dim();
    Ok(starts
        .par_iter()
        .map(|&x0| {
            let mut x = x0;
            let mut times = vec![S::zero()];
            let mut positions = vec![wrap_position(&grid, x)];
            let mut unwrapped = vec![[S::zero(); 2]];
            let add = |p: [S; 2], v: [S; 2], s: S| [p[0] + v[0] * s, p[1] + v[1] * s];
            for k in 0..grid.nt() {
                for j in 0..substeps {
                    let t = grid.node_time(k) + h * S::c(j as f64);
                    let k1 = velocity(&grad, t, x);
                    let k2 = velocity(&grad, t + h * half, add(x, k1, h * half));
                    let k3 = velocity(&grad, t + h * half, add(x, k2, h * half));
                    let k4 = velocity(&grad, t + h, add(x, k3, h));
                    for a in 0..d {
                        x[a] = x[a] + h * sixth * (k1[a] + two * k2[a] + two * k3[a] + k4[a]);
                    }
                }
                times.push(grid.node_time(k + 1));
                positions.push(wrap_position(&grid, x));
                unwrapped.push([x[0] - x0[0], x[1] - x0[1]]);
            }
            Trajectory { times, positions, unwrapped }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn flat_potential_is_stationary() {
        let g = Grid::<f64>::new(1, 16, 8, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, Layout::Nodes, |t, _| 3.0 - t);
        let tr = flow_trajectories(&u, &[[0.3, 0.0]], 4).unwrap();
        assert!(tr[0].positions.iter().all(|p| p[0] == 0.3));
        assert_eq!(tr[0].times.len(), 9);
    }

    #[test]
    fn constant_slope_moves_at_constant_speed() {
        // a periodic potential that is affine near the start: sin has slope
        // 2 pi a at 0; use a linear-in-space slice field built from it
        let g = Grid::<f64>::new(1, 64, 16, 1.0).unwrap();
        let slope = 0.25;
        // centred differences of a sawtooth are exact away from its jump
        let u = ScalarField::from_fn(&g, Layout::Nodes, |_, x| slope * x[0]);
        let tr = flow_trajectories(&u, &[[0.5, 0.0]], 2).unwrap();
        let end = *tr[0].positions.last().unwrap();
        assert!((end[0] - (0.5 - slope)).abs() < 1e-12, "{end:?}");
        let _ = PI;
    }

    #[test]
    fn positions_are_wrapped() {
        let g = Grid::<f64>::new(2, 16, 8, 2.0).unwrap();
        let u = ScalarField::from_fn(&g, Layout::Nodes, |_, x| -0.2 * (2.0 * PI * x[0]).sin() / (2.0 * PI));
        let tr = flow_trajectories(&u, &[[0.95, 0.5], [0.1, 0.99]], 4).unwrap();
        for t in &tr {
            for p in &t.positions {
                assert!((0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1]));
            }
        }
        let mut csv = Vec::new();
        tr[0].write_csv(&mut csv, 2).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,x1,x2\n0,0.95,0.5\n"));
    }
}
