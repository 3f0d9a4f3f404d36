//! Finite-horizon optimal investment with proportional transaction costs
//! under CRRA utility, solved in polar coordinates.
//!
//! The value function `φ(x, y, t) = b^γ V(θ, t)` reduces the problem to a
//! one-dimensional double obstacle problem for `V` on a bounded angular
//! domain. [`solver::solve`] marches it backward from the horizon on an
//! adaptive interval that tracks the buying and selling frontiers, using
//! either Chebyshev collocation or central differences for the step.

pub mod adaptive_mesh;
pub mod chebyshev;
pub mod error;
pub mod fd_baseline;
pub mod frontier;
pub mod harness;
pub mod model;
pub mod solver;
pub mod spectral_stepper;

pub use adaptive_mesh::MeshPolicy;
pub use error::{Result, SolverError};
pub use frontier::{SellValueTime, TimeSlice};
pub use model::{critical_quantities, ModelParams, PolarDomain, Side};
pub use harness::Config;
pub use solver::{
    crossing_report, first_positive_frontier_time, solve, Backend, CrossingReport, OnsetReport,
    SolutionPath, SolveOptions,
};
