use serde::{Deserialize, Serialize};

use super::{NoiseSpec, PilotGrid, DEFAULT_IMPULSE_SCALE};
use crate::error::{Error, Result};

/// A single estimation scenario, read from a `key = value` text file:
///
/// ```text
/// N = 512
/// P = 64
/// Ts = 5e-6
/// s = 5
/// r = 5
/// snr_db = 10
/// lambda = 0.1
/// seed = 1
/// ```
///
/// `impulse_scale` and `noise_ball` are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "N")]
    pub subcarriers: usize,
    #[serde(rename = "P")]
    pub pilots: usize,
    #[serde(rename = "Ts")]
    pub ts: f64,
    pub s: usize,
    pub r: usize,
    pub snr_db: f64,
    pub lambda: f64,
    pub seed: u64,
    #[serde(default = "default_impulse_scale")]
    pub impulse_scale: f64,
    /// Multiplier on `sigma sqrt(P)` for the residual ball radius.
    #[serde(default = "default_noise_ball")]
    pub noise_ball: f64,
}

fn default_impulse_scale() -> f64 {
    DEFAULT_IMPULSE_SCALE
}

fn default_noise_ball() -> f64 {
    crate::estimator::DEFAULT_NOISE_BALL
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let sc: Scenario =
            toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
        sc.grid()?;
        sc.noise()?;
        if !(sc.lambda > 0.0) {
            return Err(Error::Parse(format!(
                "lambda must be positive, got {}",
                sc.lambda
            )));
        }
        if sc.r > sc.pilots {
            return Err(Error::Parse(format!(
                "r = {} exceeds P = {}",
                sc.r, sc.pilots
            )));
        }
        Ok(sc)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("scenario fields are plain scalars")
    }

    pub fn grid(&self) -> Result<PilotGrid> {
        PilotGrid::new(self.subcarriers, self.pilots, self.ts)
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::from_snr_db(self.snr_db, self.r, self.impulse_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str =
        "N = 512\nP = 64\nTs = 5e-6\ns = 5\nr = 5\nsnr_db = 10\nlambda = 0.1\nseed = 1\n";

    #[test]
    fn parses_reference_setting() {
        let sc = Scenario::parse(FIG1).unwrap();
        assert_eq!(sc.pilots, 64);
        assert_eq!(sc.subcarriers, 512);
        assert_eq!(sc.impulse_scale, 10.0);
        assert_eq!(sc.grid().unwrap().spacing(), 8);
        assert_eq!(Scenario::parse(&sc.to_text()).unwrap(), sc);
    }

    #[test]
    fn rejects_malformed() {
        assert!(Scenario::parse("N = 512\nP = 64").is_err());
        assert!(Scenario::parse(&FIG1.replace("P = 64", "P = 60")).is_err());
        assert!(Scenario::parse(&FIG1.replace("lambda = 0.1", "lambda = -1")).is_err());
        assert!(Scenario::parse(&format!("{FIG1}bogus = 3\n")).is_err());
        assert!(Scenario::parse("P == 3").is_err());
    }
}
