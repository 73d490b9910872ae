//! Exact pure-dephasing coherence of an NV-center spin qubit coupled to a
//! small ¹³C bath, sampled on field-locked time grids, and the
//! polarization-product bounds those samples yield.
//!
//! Module map:
//! - [`lattice`]: random ¹³C placement on diamond and bath selection
//! - [`hyperfine`]: dipolar couplings, Larmor frequency, ω_k and a_k
//! - [`coherence`]: closed-form ρ01(t) and its t′ / t″ samplings
//! - [`estimator`]: staircases, product bounds, amplitude calibration, sweeps
//! - [`oracle`]: dense conditional-propagator reference for every closed form
//! - [`cli`], [`config`], [`io`], [`fixtures`], [`reproduce`]: the command-line tool

pub mod cli;
pub mod coherence;
pub mod config;
pub mod error;
pub mod estimator;
pub mod fixtures;
pub mod hyperfine;
pub mod io;
pub mod lattice;
pub mod oracle;
pub mod reproduce;

pub use error::{Error, Result};
