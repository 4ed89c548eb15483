//! Delayed-rejection Markov chain Monte Carlo with three-Gaussian mixture proposals.

pub mod calibration;
pub mod diagnostics;
pub mod dr_engine;
pub mod error;
pub mod exec;
pub mod logspace;
pub mod oracle;
pub mod proposal;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod targets;

pub use error::{DrError, Result};
