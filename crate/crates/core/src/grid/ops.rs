use super::{wrap, Grid, Layout, ScalarField, VectorField};
use crate::error::{shape, Result};
use crate::real::Real;

/// Calls `f(i, prev, next)` for every node with its two periodic neighbours
/// along `axis`.
#[inline]
fn for_each_line<S: Real>(grid: &Grid<S>, axis: usize, mut f: impl FnMut(usize, usize, usize)) {
    let nx = grid.nx();
    let (stride, lines, line_step) = match (grid.dim(), axis) {
        (1, _) => (1, 1, 0),
        (_, 0) => (1, nx, nx),
        _ => (nx, nx, 1),
    };
    for line in 0..lines {
        let base = line * line_step;
        for j in 0..nx {
            let prev = if j == 0 { nx - 1 } else { j - 1 };
            let next = if j + 1 == nx { 0 } else { j + 1 };
            f(base + j * stride, base + prev * stride, base + next * stride);
        }
    }
}

/// Centered periodic gradient of one spatial slice; `out` holds `d` components.
pub fn gradient_slice<S: Real>(grid: &Grid<S>, f: &[S], out: &mut [S]) {
    let n = grid.points();
    let inv = S::one() / (S::c(2.0) * grid.hx());
    for axis in 0..grid.dim() {
        let comp = &mut out[axis * n..(axis + 1) * n];
        for_each_line(grid, axis, |i, prev, next| comp[i] = (f[next] - f[prev]) * inv);
    }
}

/// Centered periodic divergence; minus the transpose of [`gradient_slice`].
pub fn divergence_slice<S: Real>(grid: &Grid<S>, w: &[S], out: &mut [S]) {
    let n = grid.points();
    let inv = S::one() / (S::c(2.0) * grid.hx());
    out.iter_mut().for_each(|x| *x = S::zero());
    for axis in 0..grid.dim() {
        let comp = &w[axis * n..(axis + 1) * n];
        for_each_line(grid, axis, |i, prev, next| out[i] = out[i] + (comp[next] - comp[prev]) * inv);
    }
}

pub fn gradient_x<S: Real>(f: &ScalarField<S>) -> VectorField<S> {
    let grid = *f.grid();
    let mut out = VectorField::zeros(&grid, f.layout());
    for k in 0..f.slices() {
        gradient_slice(&grid, f.slice(k), out.slice_mut(k));
    }
    out
}

pub fn divergence<S: Real>(w: &VectorField<S>) -> ScalarField<S> {
    let grid = *w.grid();
    let mut out = ScalarField::zeros(&grid, w.layout());
    for k in 0..w.slices() {
        divergence_slice(&grid, w.slice(k), out.slice_mut(k));
    }
    out
}

fn require_nodes<S: Real>(f: &ScalarField<S>, what: &str) -> Result<()> {
    if f.layout() != Layout::Nodes {
        return Err(shape(format!("{what} needs a node field, got {:?}", f.layout())));
    }
    Ok(())
}

/// Forward quotient `(f_{k+1} - f_k) / ht`, located on intervals.
pub fn time_derivative<S: Real>(f: &ScalarField<S>) -> Result<ScalarField<S>> {
    require_nodes(f, "time_derivative")?;
    let grid = *f.grid();
    let inv = S::one() / grid.ht();
    let mut out = ScalarField::zeros(&grid, Layout::Intervals);
    for k in 0..grid.nt() {
        let (a, b) = (f.slice(k), f.slice(k + 1));
        for (o, (&x0, &x1)) in out.slice_mut(k).iter_mut().zip(a.iter().zip(b)) {
            *o = (x1 - x0) * inv;
        }
    }
    Ok(out)
}

/// Midpoint average `(f_k + f_{k+1}) / 2`, located on intervals.
pub fn time_average<S: Real>(f: &ScalarField<S>) -> Result<ScalarField<S>> {
    require_nodes(f, "time_average")?;
    let grid = *f.grid();
    let half = S::c(0.5);
    let mut out = ScalarField::zeros(&grid, Layout::Intervals);
    for k in 0..grid.nt() {
        let (a, b) = (f.slice(k), f.slice(k + 1));
        for (o, (&x0, &x1)) in out.slice_mut(k).iter_mut().zip(a.iter().zip(b)) {
            *o = (x0 + x1) * half;
        }
    }
    Ok(out)
}

/// A pair living on time intervals: a scalar part (time derivative / density)
/// and a vector part (spatial gradient / momentum).
#[derive(Clone, Debug, PartialEq)]
pub struct StaggeredPair<S> {
    pub a: ScalarField<S>,
    pub b: VectorField<S>,
}

impl<S: Real> StaggeredPair<S> {
    pub fn zeros(grid: &Grid<S>) -> Self {
        StaggeredPair { a: ScalarField::zeros(grid, Layout::Intervals), b: VectorField::zeros(grid, Layout::Intervals) }
    }

    pub fn grid(&self) -> &Grid<S> {
        self.a.grid()
    }

    pub fn check(&self) -> Result<()> {
        if self.a.layout() != Layout::Intervals || self.b.layout() != Layout::Intervals {
            return Err(shape("staggered pair must live on intervals"));
        }
        if !self.a.grid().same_shape(self.b.grid()) {
            return Err(shape("staggered pair components on different grids"));
        }
        Ok(())
    }

    /// Weighted inner product `ht hx^d sum(a a' + b . b')`.
    pub fn dot(&self, other: &Self) -> S {
        let g = self.grid();
        let w = g.ht() * g.cell_volume();
        let sa = self.a.data().iter().zip(other.a.data()).fold(S::zero(), |s, (&x, &y)| s + x * y);
        let sb = self.b.data().iter().zip(other.b.data()).fold(S::zero(), |s, (&x, &y)| s + x * y);
        w * (sa + sb)
    }

    pub fn norm(&self) -> S {
        self.dot(self).sqrt()
    }
}

/// The space-time gradient `u -> (D_t u, grad u)`: on interval `k` the time
/// quotient `(u_{k+1} - u_k)/ht` and the spatial gradient at its left node.
pub fn space_time_gradient<S: Real>(u: &ScalarField<S>) -> Result<StaggeredPair<S>> {
    let a = time_derivative(u)?;
    let grid = *u.grid();
    let mut b = VectorField::zeros(&grid, Layout::Intervals);
    for k in 0..grid.nt() {
        gradient_slice(&grid, u.slice(k), b.slice_mut(k));
    }
    Ok(StaggeredPair { a, b })
}

/// Transpose of [`space_time_gradient`] for plain index sums, returned on
/// nodes: `(a_{j-1} - a_j)/ht - div b_j` with zero padding outside `0..nt`.
pub fn space_time_gradient_adjoint<S: Real>(pair: &StaggeredPair<S>) -> Result<ScalarField<S>> {
    pair.check()?;
    let grid = *pair.grid();
    let n = grid.points();
    let nt = grid.nt();
    let inv_ht = S::one() / grid.ht();
    let mut out = ScalarField::zeros(&grid, Layout::Nodes);
    let mut div = vec![S::zero(); n];
    for j in 0..=nt {
        let slab = out.slice_mut(j);
        if j > 0 {
            let prev = pair.a.slice(j - 1);
            for i in 0..n {
                slab[i] = prev[i] * inv_ht;
            }
        }
        if j < nt {
            divergence_slice(&grid, pair.b.slice(j), &mut div);
            let cur = pair.a.slice(j);
            for i in 0..n {
                slab[i] = slab[i] - cur[i] * inv_ht - div[i];
            }
        }
    }
    Ok(out)
}

/// `<D u, mu> - <u, D^T mu>` with quadrature weights `ht hx^d` on both sides;
/// the node sum includes the `t = 0` and `t = T` boundary slices.
pub fn adjoint_pair_check<S: Real>(u: &ScalarField<S>, mu: &StaggeredPair<S>) -> Result<S> {
    mu.check()?;
    if !u.grid().same_shape(mu.grid()) {
        return Err(shape("potential and staggered pair on different grids"));
    }
    let du = space_time_gradient(u)?;
    let dt_mu = space_time_gradient_adjoint(mu)?;
    let g = u.grid();
    let w = g.ht() * g.cell_volume();
    let rhs = u.data().iter().zip(dt_mu.data()).fold(S::zero(), |s, (&x, &y)| s + x * y) * w;
    Ok(du.dot(mu) - rhs)
}

/// Periodic (bi)linear interpolation of a spatial slice at a physical point.
pub fn interpolate<S: Real>(grid: &Grid<S>, f: &[S], pos: [S; 2]) -> S {
    let nxs = S::c(grid.nx() as f64);
    let mut base = [0isize; 2];
    let mut frac = [S::zero(); 2];
    for axis in 0..grid.dim() {
        let s = pos[axis] * nxs;
        let fl = s.floor();
        base[axis] = fl.to_isize().unwrap_or(0);
        frac[axis] = s - fl;
    }
    let nx = grid.nx();
    match grid.dim() {
        1 => {
            let i0 = wrap(base[0], nx);
            let i1 = wrap(base[0] + 1, nx);
            f[i0] * (S::one() - frac[0]) + f[i1] * frac[0]
        }
        _ => {
            let ix0 = wrap(base[0], nx);
            let ix1 = wrap(base[0] + 1, nx);
            let iy0 = wrap(base[1], nx);
            let iy1 = wrap(base[1] + 1, nx);
            let (fx, fy) = (frac[0], frac[1]);
            let v00 = f[grid.ravel([ix0, iy0])];
            let v10 = f[grid.ravel([ix1, iy0])];
            let v01 = f[grid.ravel([ix0, iy1])];
            let v11 = f[grid.ravel([ix1, iy1])];
            (v00 * (S::one() - fx) + v10 * fx) * (S::one() - fy) + (v01 * (S::one() - fx) + v11 * fx) * fy
        }
    }
}

/// `out(x) = f(x + disp hx)` with periodic (bi)linear interpolation; `disp`
/// is measured in cells. Integer displacements copy values exactly.
pub fn shift_slice<S: Real>(grid: &Grid<S>, f: &[S], disp: [S; 2], out: &mut [S]) {
    let nx = grid.nx();
    let mut whole = [0isize; 2];
    let mut frac = [S::zero(); 2];
    for axis in 0..grid.dim() {
        let fl = disp[axis].floor();
        whole[axis] = fl.to_isize().unwrap_or(0);
        frac[axis] = disp[axis] - fl;
    }
    let one = S::one();
    for (i, o) in out.iter_mut().enumerate() {
        let ij = grid.unravel(i);
        match grid.dim() {
            1 => {
                let i0 = wrap(ij[0] as isize + whole[0], nx);
                let i1 = wrap(ij[0] as isize + whole[0] + 1, nx);
                *o = if frac[0] == S::zero() { f[i0] } else { f[i0] * (one - frac[0]) + f[i1] * frac[0] };
            }
            _ => {
                let ix0 = wrap(ij[0] as isize + whole[0], nx);
                let ix1 = wrap(ij[0] as isize + whole[0] + 1, nx);
                let iy0 = wrap(ij[1] as isize + whole[1], nx);
                let iy1 = wrap(ij[1] as isize + whole[1] + 1, nx);
                let (fx, fy) = (frac[0], frac[1]);
                let lerp = |a: S, b: S, t: S| if t == S::zero() { a } else { a * (one - t) + b * t };
                let lo = lerp(f[grid.ravel([ix0, iy0])], f[grid.ravel([ix1, iy0])], fx);
                let hi = lerp(f[grid.ravel([ix0, iy1])], f[grid.ravel([ix1, iy1])], fx);
                *o = lerp(lo, hi, fy);
            }
        }
    }
}

/// `f(t, x + zeta(t) delta hx)` slice by slice; `zeta` holds one value per
/// slice of `f` and `delta` is in cells.
pub fn shift_space<S: Real>(f: &ScalarField<S>, delta: [S; 2], zeta: &[S]) -> Result<ScalarField<S>> {
    if zeta.len() != f.slices() {
        return Err(shape(format!("zeta has {} samples for {} slices", zeta.len(), f.slices())));
    }
    let grid = *f.grid();
    let mut out = f.clone();
    for (k, &z) in zeta.iter().enumerate() {
        if z == S::zero() {
            continue;
        }
        let disp = [delta[0] * z, delta[1] * z];
        shift_slice(&grid, f.slice(k), disp, out.slice_mut(k));
    }
    Ok(out)
}

/// `hx^d` times the sum of a spatial slice.
pub fn integrate<S: Real>(grid: &Grid<S>, f: &[S]) -> S {
    f.iter().fold(S::zero(), |s, &x| s + x) * grid.cell_volume()
}

pub fn integrate_slice<S: Real>(f: &ScalarField<S>, k: usize) -> S {
    integrate(f.grid(), f.slice(k))
}
