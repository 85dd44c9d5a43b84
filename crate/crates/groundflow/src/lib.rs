//! Ground states of two-component nonlinear Schrödinger systems with
//! trapping potentials, computed as constrained energy minimizers.
//!
//! The energy of a pair `(u1, u2)` on a box is
//!
//! ```text
//!   E[u1, u2] = 1/2 * sum_i ( |grad u_i|^2 + V_i u_i^2 )  -  integral G(u1, u2)
//! ```
//!
//! where each `V_i <= 0` is a trapping well and `G` collects attractive
//! power nonlinearities plus cross-coupling terms. Minimization runs over
//! pairs with prescribed squared L2 masses `(a1, a2)`. The solver is a
//! normalized gradient flow: semi-implicit descent steps, pointwise
//! positivity clamping, and per-component mass renormalization.
//!
//! Beyond the solver, the crate ships the measurement tools used to probe
//! structure of the minimizers at desk scale: exponential tail-rate fits,
//! translated-copy overlap integrals, glued two-bump trial states for the
//! strict binding inequality, symmetric-decreasing and coupled
//! rearrangements, and certified pointwise inequality searches that back
//! the coercivity bound.
//!
//! Entry points: [`solver::solve_ground_state`] for a single minimization,
//! [`solver::sweep_masses`] for mass grids, and the `verify` module for the
//! structural checks. The `groundflow` binary wraps these behind a small
//! config-file driven CLI; the `examples/` directory exercises each
//! capability end to end.

pub mod cli;
pub mod energy;
pub mod grid;
pub mod model;
pub mod rearrange;
pub mod report;
pub mod solver;
pub mod verify;

mod fft;

/// Crate-wide error type. Variants mirror the failure surfaces callers can
/// actually act on: bad inputs, mismatched discretizations, and solves that
/// ran out of road.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("solver failed to converge: {0}")]
    NonConvergence(String),
    #[error("multiplier undefined: component {0} carries zero mass")]
    UndefinedMultiplier(usize),
    #[error("fit window error: {0}")]
    Window(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
