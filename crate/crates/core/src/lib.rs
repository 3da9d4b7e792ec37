//! Sparse multipath OFDM channel estimation from pilots corrupted by
//! Gaussian and impulsive noise.
//!
//! The estimator solves the dual of a penalized atomic norm program as a
//! semidefinite program, reads path frequencies off the peaks of the dual
//! polynomial and impulse locations off the saturated dual entries, and
//! recovers gains by least squares.
//!
//! * [`model`]: pilot grid, atoms, channels, noise and measurements
//! * [`conic`]: the ADMM conic solver with its cone projections
//! * [`estimator`]: the dual SDP and the penalized l1 baseline
//! * [`localize`]: dual polynomial, support extraction, gain recovery
//! * [`experiments`]: seeded trials, phase transitions and MSE sweeps

pub mod conic;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod io;
pub mod localize;
pub mod model;
pub mod par;

pub use error::{Error, Result};
pub use model::C64;
