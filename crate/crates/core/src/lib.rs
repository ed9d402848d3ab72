//! Steady-state photon correlations from a chain of dipole-coupled two-level
//! atoms in which a single atom is resonantly driven.
//!
//! Pipeline: [`config::ChainConfig`] -> [`couplings::build_couplings`] ->
//! [`liouvillian::build_generator`] -> [`liouvillian::steady_state`] ->
//! [`correlations::expectations`] -> [`correlations::AngularScan`] ->
//! [`analysis::find_peaks`]. [`io::run_scan`] runs all of it.

pub mod analysis;
pub mod config;
pub mod correlations;
pub mod couplings;
pub mod error;
pub mod io;
pub mod linalg;
pub mod liouvillian;

pub use config::{ChainConfig, CoherentWeight};
pub use error::{Error, Result};
