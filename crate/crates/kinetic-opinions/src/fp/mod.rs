//! Deterministic mean-field solvers.
//!
//! - [`chang_cooper`]: implicit Chang-Cooper / exponential-fitting finite
//!   volumes for the degenerate opinion Fokker-Planck equation,
//! - [`transport`]: conservative upwind and exact characteristics for the
//!   activity transport equation,
//! - [`split`]: Strang splitting for the full two-dimensional density,
//! - [`nonlocal`]: quadrature of the nonlocal compromise drift,
//! - [`grid`]: the cell-averaged density containers.

pub mod chang_cooper;
pub mod grid;
pub mod nonlocal;
pub mod split;
pub mod transport;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FpError {
    #[error(transparent)]
    Grid(#[from] grid::GridError),
    #[error("dt = {dt} violates the drift stability bound dt <= {bound} (max drift {max_drift} on step {step})")]
    StabilityViolation {
        dt: f64,
        bound: f64,
        max_drift: f64,
        step: f64,
    },
    #[error("dt = {dt} violates the CFL bound dt*max|V|/dA = {cfl} > 1")]
    CflViolation { dt: f64, cfl: f64 },
    #[error("input density has negative cells: {0}")]
    NegativeInput(grid::GridError),
    #[error("control parameters do not satisfy the admissibility inequalities (both fluxes positive)")]
    ControlNotAdmissible,
    #[error("mass reached the activity boundary on a domain that cannot regrow")]
    MassAtBoundary,
    #[error("drift table has {got} entries, expected one per cell edge ({expected})")]
    DriftTableLength { got: usize, expected: usize },
}
