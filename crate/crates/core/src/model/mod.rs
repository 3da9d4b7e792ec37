//! Pilot-domain signal model: the index set, sinusoidal atoms, sparse
//! multipath channels, Gaussian plus impulsive noise, and measurements.

mod channel;
mod grid;
mod measurement;
mod noise;
mod scenario;

pub use channel::{
    gen_channel, min_wrapped_separation, wrapped_distance, Channel, Tap, MIN_SEPARATION_CELLS,
};
pub use grid::{atom, atom_matrix, PilotGrid};
pub use measurement::{synth_measurements, Measurement, Truth};
pub use noise::{
    complex_gaussian, gen_impulsive, sigma_from_snr_db, ImpulseNoise, NoiseSpec,
    DEFAULT_IMPULSE_SCALE,
};
pub use scenario::Scenario;

pub type C64 = num_complex::Complex<f64>;
