use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{PilotGrid, C64};
use crate::error::{Error, Result};

/// Impulse RMS amplitude relative to the unit-variance channel gains.
pub const DEFAULT_IMPULSE_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Gaussian standard deviation per complex sample, `E|w|^2 = sigma^2`.
    pub sigma: f64,
    /// Number of corrupted pilots.
    pub impulses: usize,
    /// RMS impulse amplitude.
    pub impulse_scale: f64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, impulses: usize, impulse_scale: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma must be non-negative, got {sigma}"
            )));
        }
        if !(impulse_scale > 0.0 && impulse_scale.is_finite()) {
            return Err(Error::Domain(format!(
                "impulse scale must be positive, got {impulse_scale}"
            )));
        }
        Ok(Self {
            sigma,
            impulses,
            impulse_scale,
        })
    }

    pub fn from_snr_db(snr_db: f64, impulses: usize, impulse_scale: f64) -> Result<Self> {
        Self::new(sigma_from_snr_db(snr_db)?, impulses, impulse_scale)
    }
}

/// `SNR = 10 log10(1 / sigma^2)` inverted. `+inf` maps to a noiseless model.
pub fn sigma_from_snr_db(snr_db: f64) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::Domain(format!("invalid SNR {snr_db} dB")));
    }
    Ok(10f64.powf(-snr_db / 20.0))
}

/// Circular complex Gaussian with `E|x|^2 = std^2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, std: f64) -> C64 {
    let s = std / std::f64::consts::SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// A sparse impulsive corruption: support positions (into the pilot vector,
/// ascending) and the dense length-`P` vector that is zero off the support.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseNoise {
    pub support: Vec<usize>,
    pub values: Vec<C64>,
}

/// Draws `r` distinct pilot positions uniformly and fills them with circular
/// Gaussian amplitudes of RMS `spec.impulse_scale`.
pub fn gen_impulsive<R: Rng + ?Sized>(
    r: usize,
    grid: &PilotGrid,
    spec: &NoiseSpec,
    rng: &mut R,
) -> Result<ImpulseNoise> {
    let p = grid.pilots();
    if r > p {
        return Err(Error::Domain(format!("{r} impulses exceed {p} pilots")));
    }
    let mut support = index::sample(rng, p, r).into_vec();
    support.sort_unstable();
    let mut values = vec![C64::new(0.0, 0.0); p];
    for &k in &support {
        values[k] = complex_gaussian(rng, spec.impulse_scale);
    }
    Ok(ImpulseNoise { support, values })
}
