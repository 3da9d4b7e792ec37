use rand::Rng;

use super::noise::{complex_gaussian, gen_impulsive};
use super::{Channel, NoiseSpec, PilotGrid, C64};
use crate::error::{Error, Result};

/// Ground truth kept alongside synthetic measurements for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub channel: Channel,
    /// Noiseless channel vector `V alpha`.
    pub h: Vec<C64>,
    /// Impulse support positions, ascending.
    pub impulse_support: Vec<usize>,
    pub impulses: Vec<C64>,
    pub noise: Vec<C64>,
}

impl Truth {
    /// `h + w + z`, evaluated in the same order as synthesis.
    pub fn recompose(&self) -> Vec<C64> {
        self.h
            .iter()
            .zip(&self.noise)
            .zip(&self.impulses)
            .map(|((h, w), z)| h + w + z)
            .collect()
    }
}

/// The pilot vector `y` indexed by `J`, plus optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub y: Vec<C64>,
    pub truth: Option<Truth>,
}

impl Measurement {
    pub fn new(y: Vec<C64>, grid: &PilotGrid) -> Result<Self> {
        if y.len() != grid.pilots() {
            return Err(Error::Dimension(format!(
                "measurement has {} entries, grid has {} pilots",
                y.len(),
                grid.pilots()
            )));
        }
        Ok(Self { y, truth: None })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// CSV with columns `index,re,im`, one row per `l` in `J`.
    pub fn to_csv(&self, grid: &PilotGrid) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "re", "im"])?;
        for (pos, v) in self.y.iter().enumerate() {
            w.write_record([
                grid.index_at(pos).to_string(),
                crate::io::fmt_f64(v.re),
                crate::io::fmt_f64(v.im),
            ])?;
        }
        crate::io::finish_csv(w)
    }

    /// Reads the `index,re,im` layout back; rows may come in any order.
    pub fn from_csv(bytes: &[u8], grid: &PilotGrid) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let mut y = vec![None; grid.pilots()];
        for rec in r.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<&str> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse(format!("row {:?} is missing a column", rec)))
            };
            let l: i64 = field(0)?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("index: {e}")))?;
            let re: f64 = field(1)?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("re: {e}")))?;
            let im: f64 = field(2)?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("im: {e}")))?;
            let pos = grid
                .position_of(l)
                .ok_or_else(|| Error::Parse(format!("index {l} is not a pilot index")))?;
            y[pos] = Some(C64::new(re, im));
        }
        let y = y
            .into_iter()
            .enumerate()
            .map(|(pos, v)| {
                v.ok_or_else(|| Error::Parse(format!("missing pilot index {}", grid.index_at(pos))))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(y, grid)
    }
}

/// `y = sum_k alpha_k a(f_k, 0) + w + z` with `w` circular Gaussian of std
/// `spec.sigma` and `spec.impulses` impulses.
pub fn synth_measurements<R: Rng + ?Sized>(
    ch: &Channel,
    spec: &NoiseSpec,
    grid: &PilotGrid,
    rng: &mut R,
) -> Result<Measurement> {
    let h = ch.response(grid);
    let noise: Vec<C64> = (0..grid.pilots())
        .map(|_| complex_gaussian(rng, spec.sigma))
        .collect();
    let imp = gen_impulsive(spec.impulses, grid, spec, rng)?;
    let truth = Truth {
        channel: ch.clone(),
        h,
        impulse_support: imp.support,
        impulses: imp.values,
        noise,
    };
    Ok(Measurement {
        y: truth.recompose(),
        truth: Some(truth),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{atom, gen_channel, Tap};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> PilotGrid {
        PilotGrid::new(512, 64, 5e-6).unwrap()
    }

    #[test]
    fn clean_single_tap_is_all_ones() {
        let g = grid();
        let ch = Channel::new(
            vec![Tap {
                delay: 0.0,
                gain: C64::new(1.0, 0.0),
            }],
            &g,
        )
        .unwrap();
        let spec = NoiseSpec::new(0.0, 0, 10.0).unwrap();
        let m = synth_measurements(&ch, &spec, &g, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(m.y.iter().all(|v| (*v - C64::new(1.0, 0.0)).norm() == 0.0));
    }

    #[test]
    fn clean_energy_matches_dense_matvec() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = gen_channel(3, &g, &mut rng).unwrap();
        let spec = NoiseSpec::new(0.0, 0, 10.0).unwrap();
        let m = synth_measurements(&ch, &spec, &g, &mut rng).unwrap();
        // oracle: explicit per-entry sum of atoms
        let mut oracle = vec![C64::new(0.0, 0.0); 64];
        for t in ch.taps() {
            let a = atom(g.delay_to_freq(t.delay), 0.0, &g).unwrap();
            for (o, x) in oracle.iter_mut().zip(a) {
                *o += t.gain * x;
            }
        }
        let e1: f64 = m.y.iter().map(|v| v.norm_sqr()).sum();
        let e2: f64 = oracle.iter().map(|v| v.norm_sqr()).sum();
        assert!((e1 - e2).abs() < 1e-10 * e2);
    }

    #[test]
    fn truth_reconstructs_exactly() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ch = gen_channel(5, &g, &mut rng).unwrap();
        let spec = NoiseSpec::from_snr_db(10.0, 5, 10.0).unwrap();
        let m = synth_measurements(&ch, &spec, &g, &mut rng).unwrap();
        let t = m.truth.as_ref().unwrap();
        assert_eq!(t.recompose(), m.y);
        assert_eq!(t.h, ch.response(&g));
        assert_eq!(t.impulse_support.len(), 5);
    }

    #[test]
    fn seeds_give_identical_measurements() {
        let g = grid();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ch = gen_channel(4, &g, &mut rng).unwrap();
            let spec = NoiseSpec::from_snr_db(20.0, 3, 10.0).unwrap();
            synth_measurements(&ch, &spec, &g, &mut rng).unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3).y, run(4).y);
    }

    #[test]
    fn csv_round_trip() {
        let g = PilotGrid::new(16, 4, 1.0).unwrap();
        let m = Measurement::new(
            vec![
                C64::new(1.0, -2.0),
                C64::new(0.5, 0.25),
                C64::new(-3.0, 1e-9),
                C64::new(0.0, 0.0),
            ],
            &g,
        )
        .unwrap();
        let bytes = m.to_csv(&g).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("index,re,im\n-1,"));
        let back = Measurement::from_csv(&bytes, &g).unwrap();
        assert_eq!(back.y, m.y);
    }

    #[test]
    fn wrong_length_rejected() {
        let g = PilotGrid::new(16, 4, 1.0).unwrap();
        assert!(Measurement::new(vec![C64::new(0.0, 0.0); 3], &g).is_err());
    }
}
