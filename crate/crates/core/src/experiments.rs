//! Monte Carlo harness: single trials, phase-transition grids and
//! error-versus-SNR sweeps, all seeded and reduced in a fixed order.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conic::{Settings, Status};
use crate::error::{Error, Result};
use crate::estimator::{
    noise_radius, solve_panm, solve_plm, DualSolution, PanmParams, PlmParams, DEFAULT_NOISE_BALL,
    DEFAULT_PLM_GRID_FACTOR,
};
use crate::localize::{localize, EstimateResult, LocalizeOptions};
use crate::model::{
    gen_channel, synth_measurements, Measurement, NoiseSpec, PilotGrid, Truth, C64,
    DEFAULT_IMPULSE_SCALE,
};
use crate::par::*;

/// Largest `|h - h_hat|_2` counted as a successful recovery.
pub const SUCCESS_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Panm,
    Plm,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Panm => "panm",
            Estimator::Plm => "plm",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "panm" => Ok(Estimator::Panm),
            "plm" => Ok(Estimator::Plm),
            other => Err(Error::Parse(format!(
                "unknown estimator `{other}` (expected panm or plm)"
            ))),
        }
    }
}

/// How a batch of independent trials is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Work-stealing pool when the `parallel` feature is on, otherwise sequential.
    #[default]
    Parallel,
    Sequential,
}

/// Maps `f` over `jobs`, keeping input order in the output.
pub fn map_trials<J, T, F>(jobs: Vec<J>, exec: Execution, f: F) -> Vec<T>
where
    J: Send,
    T: Send,
    F: Fn(J) -> T + Sync + Send,
{
    match exec {
        Execution::Parallel => jobs.into_par_iter().map(f).collect(),
        Execution::Sequential => jobs.into_iter().map(f).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub grid: PilotGrid,
    pub s: usize,
    pub r: usize,
    /// `+inf` gives noiseless measurements.
    pub snr_db: f64,
    pub lambda: f64,
    pub seed: u64,
    pub estimator: Estimator,
    pub impulse_scale: f64,
    /// `eps = noise_ball sigma sqrt(P)` unless `epsilon` is set.
    pub noise_ball: f64,
    pub epsilon: Option<f64>,
    /// Baseline grid size; `None` uses `4 P`.
    pub plm_grid: Option<usize>,
    pub settings: Settings,
    pub localize: LocalizeOptions,
}

impl TrialConfig {
    pub fn new(grid: PilotGrid, s: usize, r: usize, snr_db: f64, lambda: f64, seed: u64) -> Self {
        Self {
            grid,
            s,
            r,
            snr_db,
            lambda,
            seed,
            estimator: Estimator::Panm,
            impulse_scale: DEFAULT_IMPULSE_SCALE,
            noise_ball: DEFAULT_NOISE_BALL,
            epsilon: None,
            plm_grid: None,
            settings: Settings::default(),
            localize: LocalizeOptions::default(),
        }
    }

    pub fn with_estimator(mut self, estimator: Estimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::from_snr_db(self.snr_db, self.r, self.impulse_scale)
    }

    pub fn epsilon(&self) -> Result<f64> {
        match self.epsilon {
            Some(e) => Ok(e),
            None => Ok(noise_radius(
                self.noise()?.sigma,
                self.grid.pilots(),
                self.noise_ball,
            )),
        }
    }

    pub fn plm_grid_size(&self) -> usize {
        self.plm_grid
            .unwrap_or(DEFAULT_PLM_GRID_FACTOR * self.grid.pilots())
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::Domain(format!("invalid SNR {} dB", self.snr_db)));
        }
        if !(self.noise_ball > 0.0 && self.noise_ball.is_finite()) {
            return Err(Error::Domain(format!(
                "noise ball factor must be positive, got {}",
                self.noise_ball
            )));
        }
        if self.r > self.grid.pilots() {
            return Err(Error::Domain(format!(
                "{} impulses exceed {} pilots",
                self.r,
                self.grid.pilots()
            )));
        }
        PanmParams::new(self.lambda, self.epsilon()?)?;
        Ok(())
    }

    /// The synthetic instance this configuration describes.
    pub fn instance(&self) -> Result<Measurement> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let ch = gen_channel(self.s, &self.grid, &mut rng)?;
        synth_measurements(&ch, &self.noise()?, &self.grid, &mut rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub truth: Truth,
    pub estimate: EstimateResult,
    /// Present for PANM runs.
    pub dual: Option<DualSolution>,
    /// `|h - h_hat|_2`.
    pub error: f64,
    pub success: bool,
    pub status: Status,
    pub iterations: usize,
    /// Why the trial counts as failed even if the error is small.
    pub failure: Option<String>,
    pub wall_time: f64,
}

/// `|h - h_hat|_2 <= 1e-2`.
pub fn success(h: &[C64], h_hat: &[C64]) -> Result<bool> {
    Ok(error_norm(h, h_hat)? <= SUCCESS_THRESHOLD)
}

pub fn error_norm(h: &[C64], h_hat: &[C64]) -> Result<f64> {
    if h.len() != h_hat.len() {
        return Err(Error::Dimension(format!(
            "channel lengths differ: {} vs {}",
            h.len(),
            h_hat.len()
        )));
    }
    Ok(h.iter()
        .zip(h_hat)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Generates, solves, localizes and scores one instance.
///
/// A solver that stops at the iteration cap, or a detection step that finds
/// more unknowns than pilots, yields a failed trial rather than an error.
pub fn run_trial(cfg: &TrialConfig) -> Result<TrialOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let meas = cfg.instance()?;
    let truth = meas
        .truth
        .clone()
        .expect("synthetic measurements carry truth");
    let eps = cfg.epsilon()?;
    let p = cfg.grid.pilots();

    let (estimate, dual, status, iterations, mut failure) = match cfg.estimator {
        Estimator::Panm => {
            let params = PanmParams::new(cfg.lambda, eps)?.with_settings(cfg.settings);
            let dual = solve_panm(&meas.y, &params)?;
            let (est, fail) = match localize(&meas.y, &cfg.grid, &dual, cfg.lambda, &cfg.localize) {
                Ok(e) => (e, None),
                Err(e @ Error::Identifiability { .. }) => (empty_estimate(p), Some(e.to_string())),
                Err(e) => return Err(e),
            };
            let (st, it) = (dual.result.status, dual.result.iterations);
            (est, Some(dual), st, it, fail)
        }
        Estimator::Plm => {
            let params =
                PlmParams::new(cfg.lambda, eps, cfg.plm_grid_size())?.with_settings(cfg.settings);
            let sol = solve_plm(&meas.y, &cfg.grid, &params)?;
            let est = sol.to_estimate(&cfg.grid, params.grid_size);
            (est, None, sol.result.status, sol.result.iterations, None)
        }
    };
    if status != Status::Converged && failure.is_none() {
        failure = Some(format!("solver stopped: {status}"));
    }
    let error = error_norm(&truth.h, &estimate.h)?;
    let success = failure.is_none() && error <= SUCCESS_THRESHOLD;
    Ok(TrialOutcome {
        truth,
        estimate,
        dual,
        error,
        success,
        status,
        iterations,
        failure,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn empty_estimate(p: usize) -> EstimateResult {
    EstimateResult {
        freqs: Vec::new(),
        delays: Vec::new(),
        gains: Vec::new(),
        impulse_support: Vec::new(),
        impulses: Vec::new(),
        h: vec![C64::new(0.0, 0.0); p],
    }
}

/// SplitMix64 finalizer over a master seed and a job coordinate.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    let mut x = master;
    for &c in coords {
        x = mix(x ^ mix(c.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    x
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Success counts over an `(s, r)` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseGrid {
    pub s_values: Vec<usize>,
    pub r_values: Vec<usize>,
    pub trials: usize,
    /// Row-major in `s`, then `r`.
    pub successes: Vec<usize>,
}

impl PhaseGrid {
    /// Reads the `s,r,successes,trials` layout. Cells must form a full grid.
    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut rows: Vec<(usize, usize, usize, usize)> = Vec::new();
        for rec in csv::Reader::from_reader(bytes).records() {
            let rec = rec?;
            let mut v = [0usize; 4];
            for (i, slot) in v.iter_mut().enumerate() {
                let field = rec
                    .get(i)
                    .ok_or_else(|| Error::Parse(format!("short row {rec:?}")))?;
                *slot = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad integer `{field}` in phase grid")))?;
            }
            rows.push((v[0], v[1], v[2], v[3]));
        }
        let mut s_values: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let mut r_values: Vec<usize> = rows.iter().map(|r| r.1).collect();
        s_values.sort_unstable();
        s_values.dedup();
        r_values.sort_unstable();
        r_values.dedup();
        let trials = rows.first().map_or(0, |r| r.3);
        if rows.len() != s_values.len() * r_values.len()
            || rows.iter().any(|r| r.3 != trials || r.2 > trials)
        {
            return Err(Error::Parse(
                "phase grid rows do not form a consistent grid".into(),
            ));
        }
        let mut successes = vec![0; rows.len()];
        for (s, r, k, _) in rows {
            let si = s_values.binary_search(&s).expect("value collected above");
            let ri = r_values.binary_search(&r).expect("value collected above");
            successes[si * r_values.len() + ri] = k;
        }
        Ok(Self {
            s_values,
            r_values,
            trials,
            successes,
        })
    }

    pub fn get(&self, si: usize, ri: usize) -> usize {
        self.successes[si * self.r_values.len() + ri]
    }

    pub fn rate(&self, si: usize, ri: usize) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.get(si, ri) as f64 / self.trials as f64
        }
    }

    /// Iterates `(s, r, successes)` in CSV order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.s_values.iter().enumerate().flat_map(move |(si, &s)| {
            self.r_values
                .iter()
                .enumerate()
                .map(move |(ri, &r)| (s, r, self.get(si, ri)))
        })
    }

    /// CSV with columns `s,r,successes,trials`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["s", "r", "successes", "trials"])?;
        for (s, r, k) in self.cells() {
            w.write_record([s, r, k, self.trials].map(|v| v.to_string()))?;
        }
        crate::io::finish_csv(w)
    }
}

/// Runs `trials` instances per `(s, r)` cell. `base.seed` is the master seed;
/// each trial seed depends only on it and the trial's `(s, r, index)`.
pub fn run_phase_transition(
    base: &TrialConfig,
    s_values: &[usize],
    r_values: &[usize],
    trials: usize,
    exec: Execution,
) -> Result<PhaseGrid> {
    if s_values.is_empty() || r_values.is_empty() {
        return Err(Error::Domain("phase grid ranges must be non-empty".into()));
    }
    let mut jobs = Vec::with_capacity(s_values.len() * r_values.len() * trials);
    for &s in s_values {
        for &r in r_values {
            for t in 0..trials {
                let seed = derive_seed(base.seed, &[s as u64, r as u64, t as u64]);
                jobs.push(TrialConfig {
                    s,
                    r,
                    seed,
                    ..*base
                });
            }
        }
    }
    let outcomes = map_trials(jobs, exec, |cfg| run_trial(&cfg).map(|o| o.success));
    let mut successes = Vec::with_capacity(s_values.len() * r_values.len());
    let mut it = outcomes.into_iter();
    for _ in 0..s_values.len() * r_values.len() {
        let mut k = 0;
        for _ in 0..trials {
            if it.next().expect("one outcome per job")? {
                k += 1;
            }
        }
        successes.push(k);
    }
    Ok(PhaseGrid {
        s_values: s_values.to_vec(),
        r_values: r_values.to_vec(),
        trials,
        successes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub estimator: Estimator,
    pub snr_db: f64,
    /// Mean of `|h - h_hat|_2` over trials.
    pub mean_mse: f64,
    /// Standard error of that mean.
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Reads the `estimator,snr_db,mean_mse,stderr,trials` layout.
    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut rows = Vec::new();
        for rec in csv::Reader::from_reader(bytes).records() {
            let rec = rec?;
            let get = |i: usize| {
                rec.get(i)
                    .map(str::trim)
                    .ok_or_else(|| Error::Parse(format!("short row {rec:?}")))
            };
            let num = |i: usize| -> Result<f64> {
                let f = get(i)?;
                f.parse()
                    .map_err(|_| Error::Parse(format!("bad number `{f}` in sweep table")))
            };
            let trials = get(4)?;
            rows.push(SweepRow {
                estimator: get(0)?.parse()?,
                snr_db: num(1)?,
                mean_mse: num(2)?,
                stderr: num(3)?,
                trials: trials
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad trial count `{trials}`")))?,
            });
        }
        Ok(Self { rows })
    }

    pub fn row(&self, estimator: Estimator, snr_db: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.snr_db == snr_db)
    }

    /// CSV with columns `estimator,snr_db,mean_mse,stderr,trials`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        use crate::io::fmt_f64;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["estimator", "snr_db", "mean_mse", "stderr", "trials"])?;
        for r in &self.rows {
            w.write_record([
                r.estimator.to_string(),
                fmt_f64(r.snr_db),
                fmt_f64(r.mean_mse),
                fmt_f64(r.stderr),
                r.trials.to_string(),
            ])?;
        }
        crate::io::finish_csv(w)
    }
}

/// Mean channel error per `(estimator, SNR)`. Every estimator sees the same
/// instances: trial seeds depend on the SNR index and trial index only.
pub fn run_mse_sweep(
    base: &TrialConfig,
    snr_list: &[f64],
    trials: usize,
    estimators: &[Estimator],
    exec: Execution,
) -> Result<SweepTable> {
    if snr_list.is_empty() || estimators.is_empty() {
        return Err(Error::Domain(
            "sweep needs at least one SNR and one estimator".into(),
        ));
    }
    let mut jobs = Vec::new();
    for &est in estimators {
        for (i, &snr_db) in snr_list.iter().enumerate() {
            for t in 0..trials {
                let seed = derive_seed(base.seed, &[i as u64, t as u64]);
                jobs.push(TrialConfig {
                    snr_db,
                    seed,
                    estimator: est,
                    ..*base
                });
            }
        }
    }
    let errors = map_trials(jobs, exec, |cfg| run_trial(&cfg).map(|o| o.error));
    let mut it = errors.into_iter();
    let mut rows = Vec::new();
    for &est in estimators {
        for &snr_db in snr_list {
            let vals = (0..trials)
                .map(|_| it.next().expect("one outcome per job"))
                .collect::<Result<Vec<_>>>()?;
            let (mean_mse, stderr) = mean_stderr(&vals);
            rows.push(SweepRow {
                estimator: est,
                snr_db,
                mean_mse,
                stderr,
                trials,
            });
        }
    }
    Ok(SweepTable { rows })
}

/// Sample mean and standard error; `(NaN, NaN)` for no samples.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
