//! Benchmarking library for neural-network optimizers: workloads, baseline
//! and learned optimizers, budgeted trial execution, time-to-target
//! analysis, and performance-profile scoring.

pub mod error;
pub mod learned;
pub mod optim;
pub mod params;
pub mod protocol;
pub mod rng;
pub mod scoring;
pub mod workloads;

pub use error::{Error, Result};
