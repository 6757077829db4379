//! Simulation and verification toolkit for memory-reinforced random walks.
//!
//! The crate covers three layers:
//!
//! * exact forward simulators for the multi-dimensional reinforced walk
//!   (random step sizes, running center of mass) and for the randomized
//!   play-the-winner urn ([`walkers`]), plus the recursive
//!   stochastic-approximation view of both ([`sa`]);
//! * closed-form limit constants: covariance blocks, iterated-logarithm
//!   constants, Bessel zeros, small-ball constants ([`theory`]) and exact
//!   samplers for the limit Gaussian processes ([`gaussian`]);
//! * Monte Carlo estimators and verification experiments that compare the
//!   simulators against the constants ([`stats`], [`experiments`]).
//!
//! Replicate-level work is embarrassingly parallel and runs on rayon when
//! the `parallel` feature (default) is enabled; [`batch`] provides the
//! deterministic chunked reduction that keeps results identical across
//! worker counts.

pub mod batch;
pub mod experiments;
pub mod gaussian;
pub mod io;
pub mod model;
pub mod report;
pub mod rng;
pub mod sa;
pub mod special;
pub mod stats;
pub mod theory;
pub mod walkers;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ErwError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("recursion diverged at step {step}: last state {last:?}")]
    Diverged { step: u64, last: Vec<f64> },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ErwError>;
