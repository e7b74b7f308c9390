//! Image of a density under `R(x) = x - delta v(x)`.

use crate::error::{invalid, shape, Result};
use crate::grid::{gradient_slice, integrate, interpolate, Layout, ScalarField, VectorField};
use crate::real::Real;

/// Result of [`pushforward_terminal`]. `density` is renormalized to the
/// mass of the input; `raw_mass` is the mass of the sampled change of
/// variables before that correction.
#[derive(Clone, Debug)]
pub struct Pushforward<S> {
    pub density: ScalarField<S>,
    pub raw_mass: S,
}

/// Density of `(x - delta v(x))_# m` by change of variables: at every node
/// `y` the preimage `x` is found by the contraction `x <- y + delta v(x)` and
/// the value is `m(x) / det(I - delta Dv(x))`. `v` is sampled on the grid
/// (spatial layout) and interpolated bilinearly, as are `m` and `Dv`.
pub fn pushforward_terminal<S: Real>(m: &ScalarField<S>, v: &VectorField<S>, delta: S) -> Result<Pushforward<S>> {
    let grid = *m.grid();
    if m.layout() != Layout::Spatial || v.layout() != Layout::Spatial || !v.grid().same_shape(&grid) {
        return Err(shape("pushforward needs a spatial density and a spatial vector field on one grid"));
    }
    if !(delta >= S::zero()) {
        return Err(invalid(format!("delta must be >= 0, got {delta}")));
    }
    let n = grid.points();
    let d = grid.dim();
    let vs = v.slice(0);
    // jac[a][b] = d v_a / d x_b
    let mut jac = vec![vec![S::zero(); n]; d * d];
    let mut buf = vec![S::zero(); n * d];
    for a in 0..d {
        gradient_slice(&grid, &vs[a * n..(a + 1) * n], &mut buf);
        for b in 0..d {
            jac[a * d + b].copy_from_slice(&buf[b * n..(b + 1) * n]);
        }
    }
    // row-sum norm of Dv bounds the Lipschitz constant of the interpolant
    let lip = (0..n).fold(S::zero(), |acc, i| {
        let row = (0..d).fold(S::zero(), |r, a| r.max((0..d).fold(S::zero(), |s, b| s + jac[a * d + b][i].abs())));
        acc.max(row)
    });
    if !(delta * lip < S::c(0.5)) {
        return Err(invalid(format!("delta * Lip(v) = {} must be < 1/2", delta * lip)));
    }

    let mut out = ScalarField::zeros(&grid, Layout::Spatial);
    let src = m.slice(0);
    let tol = S::tol(1e-15);
    for (i, o) in out.slice_mut(0).iter_mut().enumerate() {
        let y = grid.position(i);
        let mut x = y;
        for _ in 0..200 {
            let mut next = y;
            for a in 0..d {
                next[a] = y[a] + delta * interpolate(&grid, &vs[a * n..(a + 1) * n], x);
            }
            let step = (0..d).fold(S::zero(), |s, a| s.max((next[a] - x[a]).abs()));
            x = next;
            if step <= tol {
                break;
            }
        }
        let dv: Vec<S> = jac.iter().map(|j| interpolate(&grid, j, x)).collect();
        let det = if d == 1 {
            S::one() - delta * dv[0]
        } else {
            (S::one() - delta * dv[0]) * (S::one() - delta * dv[3]) - delta * delta * dv[1] * dv[2]
        };
        *o = interpolate(&grid, src, x) / det;
    }
    let raw_mass = integrate(&grid, out.slice(0));
    let want = integrate(&grid, src);
    if raw_mass > S::zero() {
        let scale = want / raw_mass;
        out.data_mut().iter_mut().for_each(|x| *x = *x * scale);
    }
    Ok(Pushforward { density: out, raw_mass })
}
