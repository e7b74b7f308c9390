//! Space-time elliptic solve for the potential step of the splitting scheme.
//!
//! The operator is `r D^T D` with `D` the space-time gradient of
//! [`space_time_gradient`]: a discrete `-r(d_tt + Laplacian)` whose row at
//! `t = 0` is the natural (zero-flux) closure and whose last node is fixed.
//! Space is diagonalized by the DFT; every mode leaves one real tridiagonal
//! system in time.

use num_complex::Complex;
use rayon::prelude::*;

use super::ops::{space_time_gradient, space_time_gradient_adjoint};
use super::{Grid, Layout, ScalarField};
use crate::error::{invalid, shape, Result};
use crate::real::Real;

/// `r D^T D u` on nodes `0..nt`; the last slice is left at zero because the
/// final node carries the essential condition instead of an equation.
pub fn apply_elliptic<S: Real>(u: &ScalarField<S>, r: S) -> Result<ScalarField<S>> {
    let du = space_time_gradient(u)?;
    let mut out = space_time_gradient_adjoint(&du)?;
    let nt = u.grid().nt();
    out.data_mut().iter_mut().for_each(|x| *x = *x * r);
    out.slice_mut(nt).iter_mut().for_each(|x| *x = S::zero());
    Ok(out)
}

/// Solves `r D^T D u = rhs + (neumann0 / ht) [t = 0]` on nodes `0..nt` with
/// `u(T) = dirichlet_t`. `rhs` is a node field whose final slice is ignored.
pub fn elliptic_solve<S: Real>(
    rhs: &ScalarField<S>,
    neumann0: &ScalarField<S>,
    dirichlet_t: &ScalarField<S>,
    r: S,
) -> Result<ScalarField<S>> {
    if !(r > S::zero()) {
        return Err(invalid(format!("penalty r must be > 0, got {r}")));
    }
    if rhs.layout() != Layout::Nodes {
        return Err(shape("elliptic right-hand side must be a node field"));
    }
    for f in [neumann0, dirichlet_t] {
        if f.layout() != Layout::Spatial || !f.grid().same_shape(rhs.grid()) {
            return Err(shape("boundary data must be spatial fields on the solve grid"));
        }
    }
    let grid = *rhs.grid();
    let n = grid.points();
    let nt = grid.nt();
    let ht = grid.ht();
    let inv_r = S::one() / r;

    // Rows 0..nt in spectral space.
    let mut rows: Vec<Complex<S>> = Vec::with_capacity(nt * n);
    for j in 0..nt {
        let src = rhs.slice(j);
        if j == 0 {
            let bc = neumann0.slice(0);
            rows.extend(src.iter().zip(bc).map(|(&a, &b)| Complex::new((a + b / ht) * inv_r, S::zero())));
        } else {
            rows.extend(src.iter().map(|&a| Complex::new(a * inv_r, S::zero())));
        }
    }
    rows.par_chunks_mut(n).for_each(|row| fft_nd(&grid, row, false));
    let mut top: Vec<Complex<S>> = dirichlet_t.slice(0).iter().map(|&x| Complex::new(x, S::zero())).collect();
    fft_nd(&grid, &mut top, false);

    let symbols = laplacian_symbols(&grid);
    let inv_ht2 = S::one() / (ht * ht);
    let two = S::c(2.0);

    // Thomas sweep, vectorized over modes.
    let mut cprime = vec![S::zero(); nt * n];
    for j in 0..nt {
        for m in 0..n {
            let k2 = symbols[m];
            let off = -inv_ht2;
            let diag = if j == 0 { inv_ht2 + k2 } else { two * inv_ht2 + k2 };
            let mut rhs_m = rows[j * n + m];
            if j + 1 == nt {
                rhs_m = rhs_m - top[m] * off;
            }
            let (den, d_prev) = if j == 0 {
                (diag, Complex::new(S::zero(), S::zero()))
            } else {
                (diag - off * cprime[(j - 1) * n + m], rows[(j - 1) * n + m])
            };
            cprime[j * n + m] = off / den;
            rows[j * n + m] = (rhs_m - d_prev * off) / den;
        }
    }
    for j in (0..nt.saturating_sub(1)).rev() {
        for m in 0..n {
            let next = rows[(j + 1) * n + m];
            rows[j * n + m] = rows[j * n + m] - next * cprime[j * n + m];
        }
    }

    rows.par_chunks_mut(n).for_each(|row| fft_nd(&grid, row, true));
    let scale = S::one() / S::c(n as f64);
    let mut out = ScalarField::zeros(&grid, Layout::Nodes);
    for j in 0..nt {
        for (o, z) in out.slice_mut(j).iter_mut().zip(&rows[j * n..(j + 1) * n]) {
            *o = z.re * scale;
        }
    }
    out.slice_mut(nt).copy_from_slice(dirichlet_t.slice(0));
    Ok(out)
}

/// Symbol of minus the squared centered gradient for every DFT mode.
fn laplacian_symbols<S: Real>(grid: &Grid<S>) -> Vec<S> {
    let nx = grid.nx();
    let hx = grid.hx();
    let per_axis: Vec<S> = (0..nx)
        .map(|k| {
            let s = (S::c(2.0) * S::PI() * S::c(k as f64) / S::c(nx as f64)).sin() / hx;
            s * s
        })
        .collect();
    (0..grid.points())
        .map(|m| {
            let ij = grid.unravel(m);
            (0..grid.dim()).fold(S::zero(), |acc, a| acc + per_axis[ij[a]])
        })
        .collect()
}

/// Unnormalized d-dimensional DFT of one spatial slice.
pub(crate) fn fft_nd<S: Real>(grid: &Grid<S>, buf: &mut [Complex<S>], inverse: bool) {
    let nx = grid.nx();
    match grid.dim() {
        1 => S::fft(buf, inverse),
        _ => {
            for row in buf.chunks_mut(nx) {
                S::fft(row, inverse);
            }
            let mut col = vec![Complex::new(S::zero(), S::zero()); nx];
            for ix in 0..nx {
                for iy in 0..nx {
                    col[iy] = buf[iy * nx + ix];
                }
                S::fft(&mut col, inverse);
                for iy in 0..nx {
                    buf[iy * nx + ix] = col[iy];
                }
            }
        }
    }
}
