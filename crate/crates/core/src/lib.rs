//! Energy-optimal selection of offloading users in a mobile-edge-computing
//! cell where tasks use both device-local data and cloud-server data.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: scenario types and validation
//! - [`costs`]: rates, transmission times, energies and their per-cardinality
//!   linear decomposition
//! - [`solver`]: branch-and-bound over the per-cardinality binary programs,
//!   plus an exhaustive reference search
//! - [`analysis`]: mean transmission time of an iid population
//! - [`montecarlo`]: seeded scenario sampling and parameter sweeps
//! - [`cli`]: file formats and the command implementations behind the binary

pub mod analysis;
pub mod cli;
pub mod costs;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod solver;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
