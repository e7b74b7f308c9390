//! Variational mean field games with local congestion on the flat torus.
//!
//! Grids and discrete operators live in [`grid`], congestion costs and their
//! conjugates in [`congestion`], densities and transport distances in
//! [`transport`], the primal/dual solver in [`solver`] and the regularity
//! experiments in [`analysis`]. Everything numerical is generic over
//! [`Real`](real::Real) (`f32` or `f64`); the aliases below fix `f64`.

pub mod analysis;
pub mod congestion;
pub mod error;
pub mod grid;
pub mod real;
pub mod solver;
pub mod transport;

pub use error::{MfgError, Result};
pub use real::Real;

pub type Grid = grid::Grid<f64>;
pub type ScalarField = grid::ScalarField<f64>;
pub type VectorField = grid::VectorField<f64>;
pub type CongestionModel = congestion::CongestionModel<f64>;
pub type PrimalState = transport::PrimalState<f64>;
pub type DualState = solver::DualState<f64>;
pub type ProblemSpec = solver::ProblemSpec<f64>;
pub type SolverKnobs = solver::SolverKnobs<f64>;
pub type SolveOutcome = solver::SolveOutcome<f64>;
