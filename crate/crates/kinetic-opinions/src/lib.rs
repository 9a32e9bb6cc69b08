//! Kinetic opinion dynamics with a variable social activity level.
//!
//! A population of agents carries an opinion w in [-1,1] and an activity
//! level A in R. Binary interactions move opinions toward each other with a
//! probability that grows with activity, while the activity itself rises
//! with each interaction and fades at a constant rate; an optional control
//! replaces a fraction of the activity updates with a contraction toward
//! zero. This crate provides, on top of the shared microscopic rules:
//!
//! - a Boltzmann-type Monte Carlo simulator for finite ensembles ([`mc`]),
//! - deterministic mean-field solvers for the opinion marginal (a
//!   Chang-Cooper finite-volume scheme for the degenerate Fokker-Planck
//!   equation), the activity marginal (conservative upwind transport plus
//!   exact characteristics), and the full two-dimensional density ([`fp`]),
//! - closed-form Beta-type equilibria with polarization/consensus regime
//!   classification ([`equilibria`]),
//! - feasibility analysis of the activity control strategy ([`control`]),
//! - macroscopic observables, entropy/Hellinger functionals and rate fitting
//!   ([`diagnostics`]),
//! - a config-driven scenario runner with reproducible CSV/JSON output
//!   ([`config`], [`runner`]), exposed through the `kinop` binary.
//!
//! Each major capability has a runnable example under `examples/`.

pub mod config;
pub mod control;
pub mod diagnostics;
pub mod equilibria;
pub mod fp;
pub mod mc;
pub mod micro;
pub mod model;
pub mod rng;
pub mod runner;

pub use model::{InteractionKernels, ModelParams, RawParams};
