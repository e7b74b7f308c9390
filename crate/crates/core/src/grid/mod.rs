//! Discrete space-time calculus on `[0, T] x T^d`.
//!
//! The torus has unit side and `nx` cells per axis; space is collocated and
//! periodic. Time carries two staggered families: nodes `t_k = k ht`
//! (`k = 0..=nt`) hold the potential and the density, intervals
//! `[t_k, t_{k+1}]` hold time derivatives, momenta and prices.

mod elliptic;
mod io;
mod ops;

pub use elliptic::{apply_elliptic, elliptic_solve};
pub use io::{read_field, read_vector_field, write_field, write_vector_field, FieldHeader};
pub use ops::{
    adjoint_pair_check, divergence, divergence_slice, gradient_slice, gradient_x, integrate,
    integrate_slice, interpolate, shift_slice, shift_space, space_time_gradient,
    space_time_gradient_adjoint, time_average, time_derivative, StaggeredPair,
};

use crate::error::{invalid, shape, Result};
use crate::real::Real;

/// Uniform periodic grid on `[0, T] x T^d`, `d` in `{1, 2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<S> {
    dim: usize,
    nx: usize,
    nt: usize,
    horizon: S,
}

impl<S: Real> Grid<S> {
    pub fn new(dim: usize, nx: usize, nt: usize, horizon: S) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(invalid(format!("d must be 1 or 2, got {dim}")));
        }
        if nx < 4 {
            return Err(invalid(format!("Nx ≥ 4 required, got {nx}")));
        }
        if nt < 4 {
            return Err(invalid(format!("Nt ≥ 4 required, got {nt}")));
        }
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(invalid(format!("T > 0 required, got {horizon}")));
        }
        Ok(Grid { dim, nx, nt, horizon })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn hx(&self) -> S {
        S::one() / S::c(self.nx as f64)
    }

    pub fn ht(&self) -> S {
        self.horizon / S::c(self.nt as f64)
    }

    /// Number of spatial nodes, `nx^d`.
    pub fn points(&self) -> usize {
        self.nx.pow(self.dim as u32)
    }

    /// `hx^d`.
    pub fn cell_volume(&self) -> S {
        self.hx().powi(self.dim as i32)
    }

    pub fn node_time(&self, k: usize) -> S {
        S::c(k as f64) * self.ht()
    }

    pub fn interval_midpoint(&self, k: usize) -> S {
        (S::c(k as f64) + S::c(0.5)) * self.ht()
    }

    /// Per-axis integer coordinates of a flat spatial index (axis 0 fastest).
    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        match self.dim {
            1 => [idx, 0],
            _ => [idx % self.nx, idx / self.nx],
        }
    }

    pub fn ravel(&self, ij: [usize; 2]) -> usize {
        match self.dim {
            1 => ij[0],
            _ => ij[1] * self.nx + ij[0],
        }
    }

    /// Physical position of a spatial node.
    pub fn position(&self, idx: usize) -> [S; 2] {
        let ij = self.unravel(idx);
        let hx = self.hx();
        [S::c(ij[0] as f64) * hx, S::c(ij[1] as f64) * hx]
    }

    /// Flat index of the neighbour `offset` cells away along `axis`.
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let mut ij = self.unravel(idx);
        ij[axis] = wrap(ij[axis] as isize + offset, self.nx);
        self.ravel(ij)
    }

    pub fn same_shape(&self, other: &Grid<S>) -> bool {
        self.dim == other.dim && self.nx == other.nx && self.nt == other.nt && self.horizon == other.horizon
    }

    /// Evaluates `f(position)` on every spatial node.
    pub fn sample(&self, f: impl Fn([S; 2]) -> S) -> ScalarField<S> {
        let data = (0..self.points()).map(|i| f(self.position(i))).collect();
        ScalarField { grid: *self, layout: Layout::Spatial, data }
    }
}

/// Wraps the active coordinates of a point into `[0, 1)`.
pub fn wrap_position<S: Real>(grid: &Grid<S>, x: [S; 2]) -> [S; 2] {
    let mut out = [S::zero(); 2];
    for a in 0..grid.dim() {
        let r = x[a] - x[a].floor();
        out[a] = if r >= S::one() { S::zero() } else { r };
    }
    out
}

#[inline]
pub(crate) fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Where the time slices of a field live.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// `nt + 1` slices at `t_k`.
    Nodes,
    /// `nt` slices at interval midpoints.
    Intervals,
    /// A single time-independent slice.
    Spatial,
}

impl Layout {
    pub fn slices(self, nt: usize) -> usize {
        match self {
            Layout::Nodes => nt + 1,
            Layout::Intervals => nt,
            Layout::Spatial => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layout::Nodes => "node",
            Layout::Intervals => "interval",
            Layout::Spatial => "spatial",
        }
    }

    pub fn from_name(s: &str) -> Option<Layout> {
        match s {
            "node" => Some(Layout::Nodes),
            "interval" => Some(Layout::Intervals),
            "spatial" => Some(Layout::Spatial),
            _ => None,
        }
    }

    /// Time stamp of slice `k`.
    pub fn time<S: Real>(self, grid: &Grid<S>, k: usize) -> S {
        match self {
            Layout::Nodes => grid.node_time(k),
            Layout::Intervals => grid.interval_midpoint(k),
            Layout::Spatial => S::zero(),
        }
    }
}

/// Scalar values on every (time slice, spatial node) pair, time-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<S> {
    grid: Grid<S>,
    layout: Layout,
    data: Vec<S>,
}

impl<S: Real> ScalarField<S> {
    pub fn zeros(grid: &Grid<S>, layout: Layout) -> Self {
        Self::constant(grid, layout, S::zero())
    }

    pub fn constant(grid: &Grid<S>, layout: Layout, value: S) -> Self {
        let len = layout.slices(grid.nt()) * grid.points();
        ScalarField { grid: *grid, layout, data: vec![value; len] }
    }

    pub fn from_vec(grid: &Grid<S>, layout: Layout, data: Vec<S>) -> Result<Self> {
        let len = layout.slices(grid.nt()) * grid.points();
        if data.len() != len {
            return Err(shape(format!("expected {len} values, got {}", data.len())));
        }
        Ok(ScalarField { grid: *grid, layout, data })
    }

    /// `f(t, position)` on every slice.
    pub fn from_fn(grid: &Grid<S>, layout: Layout, f: impl Fn(S, [S; 2]) -> S) -> Self {
        let n = grid.points();
        let mut data = Vec::with_capacity(layout.slices(grid.nt()) * n);
        for k in 0..layout.slices(grid.nt()) {
            let t = layout.time(grid, k);
            data.extend((0..n).map(|i| f(t, grid.position(i))));
        }
        ScalarField { grid: *grid, layout, data }
    }

    /// Repeats a spatial slice on every slice of `layout`.
    pub fn extend_in_time(spatial: &ScalarField<S>, layout: Layout) -> Self {
        let grid = spatial.grid;
        let slices = layout.slices(grid.nt());
        let mut data = Vec::with_capacity(slices * grid.points());
        for _ in 0..slices {
            data.extend_from_slice(spatial.slice(0));
        }
        ScalarField { grid, layout, data }
    }

    pub fn grid(&self) -> &Grid<S> {
        &self.grid
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn slices(&self) -> usize {
        self.layout.slices(self.grid.nt())
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn slice(&self, k: usize) -> &[S] {
        let n = self.grid.points();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [S] {
        let n = self.grid.points();
        &mut self.data[k * n..(k + 1) * n]
    }

    /// Copies slice `k` out as a spatial field.
    pub fn spatial(&self, k: usize) -> ScalarField<S> {
        ScalarField { grid: self.grid, layout: Layout::Spatial, data: self.slice(k).to_vec() }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        ScalarField { grid: self.grid, layout: self.layout, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(ScalarField { grid: self.grid, layout: self.layout, data })
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if !self.grid.same_shape(&other.grid) || self.layout != other.layout {
            return Err(shape(format!(
                "{:?} field vs {:?} field on different or mismatched grids",
                self.layout, other.layout
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn min(&self) -> S {
        self.data.iter().fold(S::infinity(), |m, &x| m.min(x))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Euclidean norm of the raw values (no quadrature weights).
    pub fn l2_raw(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &x| acc + x * x).sqrt()
    }
}

/// `d` spatial components per (time slice, spatial node); within a slice the
/// components are stored one after the other.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<S> {
    grid: Grid<S>,
    layout: Layout,
    data: Vec<S>,
}

impl<S: Real> VectorField<S> {
    pub fn zeros(grid: &Grid<S>, layout: Layout) -> Self {
        let len = layout.slices(grid.nt()) * grid.points() * grid.dim();
        VectorField { grid: *grid, layout, data: vec![S::zero(); len] }
    }

    pub fn from_vec(grid: &Grid<S>, layout: Layout, data: Vec<S>) -> Result<Self> {
        let len = layout.slices(grid.nt()) * grid.points() * grid.dim();
        if data.len() != len {
            return Err(shape(format!("expected {len} values, got {}", data.len())));
        }
        Ok(VectorField { grid: *grid, layout, data })
    }

    /// `f(t, position)` returning all `d` components (extra entries ignored).
    pub fn from_fn(grid: &Grid<S>, layout: Layout, f: impl Fn(S, [S; 2]) -> [S; 2]) -> Self {
        let n = grid.points();
        let d = grid.dim();
        let mut field = Self::zeros(grid, layout);
        for k in 0..layout.slices(grid.nt()) {
            let t = layout.time(grid, k);
            let slab = field.slice_mut(k);
            for i in 0..n {
                let v = f(t, grid.position(i));
                for a in 0..d {
                    slab[a * n + i] = v[a];
                }
            }
        }
        field
    }

    pub fn grid(&self) -> &Grid<S> {
        &self.grid
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn slices(&self) -> usize {
        self.layout.slices(self.grid.nt())
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// All components of slice `k`.
    pub fn slice(&self, k: usize) -> &[S] {
        let m = self.grid.points() * self.grid.dim();
        &self.data[k * m..(k + 1) * m]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [S] {
        let m = self.grid.points() * self.grid.dim();
        &mut self.data[k * m..(k + 1) * m]
    }

    pub fn component(&self, k: usize, axis: usize) -> &[S] {
        let n = self.grid.points();
        &self.slice(k)[axis * n..(axis + 1) * n]
    }

    /// Squared Euclidean length at (slice, node).
    pub fn norm_sq_at(&self, k: usize, i: usize) -> S {
        let n = self.grid.points();
        let slab = self.slice(k);
        (0..self.grid.dim()).fold(S::zero(), |acc, a| acc + slab[a * n + i] * slab[a * n + i])
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if !self.grid.same_shape(&other.grid) || self.layout != other.layout {
            return Err(shape("vector fields on different grids or layouts"));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn l2_raw(&self) -> S {
        self.data.iter().fold(S::zero(), |acc, &x| acc + x * x).sqrt()
    }
}
