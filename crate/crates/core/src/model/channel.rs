use rand::Rng;

use super::noise::complex_gaussian;
use super::{PilotGrid, C64};
use crate::error::{Error, Result};

/// Minimum tap separation in units of `1/P`.
pub const MIN_SEPARATION_CELLS: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    /// Delay in seconds.
    pub delay: f64,
    pub gain: C64,
}

/// A sparse multipath channel, taps sorted by strictly increasing delay.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Channel {
    taps: Vec<Tap>,
}

impl Channel {
    /// Builds a channel, checking `0 <= tau < P Ts` and sorting by delay.
    pub fn new(mut taps: Vec<Tap>, grid: &PilotGrid) -> Result<Self> {
        for t in &taps {
            if !(0.0..grid.max_delay()).contains(&t.delay) {
                return Err(Error::Domain(format!(
                    "delay {} outside [0, {})",
                    t.delay,
                    grid.max_delay()
                )));
            }
        }
        taps.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        if taps.windows(2).any(|w| w[0].delay == w[1].delay) {
            return Err(Error::Domain("duplicate tap delays".into()));
        }
        Ok(Self { taps })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn gains(&self) -> Vec<C64> {
        self.taps.iter().map(|t| t.gain).collect()
    }

    pub fn delays(&self) -> Vec<f64> {
        self.taps.iter().map(|t| t.delay).collect()
    }

    /// Normalized frequencies `f_k = tau_k / (P Ts)`.
    pub fn frequencies(&self, grid: &PilotGrid) -> Vec<f64> {
        self.taps
            .iter()
            .map(|t| grid.delay_to_freq(t.delay))
            .collect()
    }

    /// The noiseless pilot vector `h = sum_k alpha_k a(f_k, 0)`.
    pub fn response(&self, grid: &PilotGrid) -> Vec<C64> {
        let v = super::atom_matrix(&self.frequencies(grid), grid);
        let alpha = nalgebra::DVector::from_vec(self.gains());
        (v * alpha).iter().copied().collect()
    }
}

/// Distance on the unit torus.
pub fn wrapped_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Smallest pairwise wrapped distance, `+inf` for fewer than two points.
pub fn min_wrapped_separation(freqs: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, &a) in freqs.iter().enumerate() {
        for &b in &freqs[i + 1..] {
            best = best.min(wrapped_distance(a, b));
        }
    }
    best
}

/// Draws `s` taps with delays uniform on `[Ts, (P-1) Ts)` conditioned on a
/// pairwise separation of at least `1.5 / P` in normalized frequency, and
/// i.i.d. standard circular complex Gaussian gains.
///
/// The conditional law is sampled exactly by the spacing map: draw `s`
/// uniform points on an interval shortened by `(s-1) d`, sort them, and
/// shift the `i`-th by `i d`. Since all frequencies stay inside
/// `[1/P, 1 - 1/P)`, the wrap-around gap is at least `2/P` and needs no
/// separate check.
pub fn gen_channel<R: Rng + ?Sized>(s: usize, grid: &PilotGrid, rng: &mut R) -> Result<Channel> {
    let p = grid.pilots() as f64;
    let sep = MIN_SEPARATION_CELLS / p;
    let lo = 1.0 / p;
    let hi = (p - 1.0) / p;
    let room = (hi - lo) - s.saturating_sub(1) as f64 * sep;
    if s > 0 && (room <= 0.0 || s as f64 * sep >= 1.0) {
        return Err(Error::Separation {
            taps: s,
            pilots: grid.pilots(),
        });
    }

    let mut u: Vec<f64> = (0..s).map(|_| rng.random::<f64>() * room).collect();
    u.sort_by(f64::total_cmp);
    let taps = u
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = lo + x + i as f64 * sep;
            Tap {
                delay: grid.freq_to_delay(f),
                gain: C64::new(0.0, 0.0),
            }
        })
        .collect::<Vec<_>>();
    let taps = taps
        .into_iter()
        .map(|t| Tap {
            gain: complex_gaussian(rng, 1.0),
            ..t
        })
        .collect();
    Channel::new(taps, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid64() -> PilotGrid {
        PilotGrid::new(512, 64, 5e-6).unwrap()
    }

    #[test]
    fn single_tap_any_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = gen_channel(1, &grid64(), &mut rng).unwrap();
        assert_eq!(ch.len(), 1);
        let tau = ch.taps()[0].delay;
        assert!((5e-6..63.0 * 5e-6).contains(&tau));
    }

    #[test]
    fn five_taps_respect_separation_by_pair_scan() {
        let g = grid64();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ch = gen_channel(5, &g, &mut rng).unwrap();
            let f = ch.frequencies(&g);
            for i in 0..f.len() {
                for j in 0..f.len() {
                    if i != j {
                        let d = (f[i] - f[j]).abs();
                        assert!(d.min(1.0 - d) >= 1.5 / 64.0 - 1e-15);
                    }
                }
            }
            assert!(ch.delays().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn dense_channels_still_sample() {
        // 20 taps at P = 64 occupy almost half the band.
        let g = grid64();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ch = gen_channel(20, &g, &mut rng).unwrap();
        assert!(min_wrapped_separation(&ch.frequencies(&g)) >= 1.5 / 64.0 - 1e-15);
    }

    #[test]
    fn infeasible_tap_count_errors() {
        let g = grid64();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            gen_channel(43, &g, &mut rng),
            Err(Error::Separation { .. })
        ));
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let g = grid64();
        let a = gen_channel(5, &g, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = gen_channel(5, &g, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn channel_rejects_out_of_range_delay() {
        let g = grid64();
        let bad = Tap {
            delay: 64.0 * 5e-6,
            gain: C64::new(1.0, 0.0),
        };
        assert!(Channel::new(vec![bad], &g).is_err());
    }

    #[test]
    fn wrapped_distance_folds() {
        assert!((wrapped_distance(0.05, 0.95) - 0.1).abs() < 1e-15);
        assert_eq!(min_wrapped_separation(&[0.3]), f64::INFINITY);
    }
}
