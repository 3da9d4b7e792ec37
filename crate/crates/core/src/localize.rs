//! Support detection from the dual polynomial and least-squares gain recovery.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::estimator::DualSolution;
use crate::model::{atom_matrix, wrapped_distance, PilotGrid, C64};

pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.99;
pub const DEFAULT_IMPULSE_RATIO: f64 = 0.99;
/// Taps fitted below this fraction of the strongest gain are dropped.
pub const DEFAULT_MIN_GAIN_RATIO: f64 = 1e-3;

/// Evaluates `Q(f) = sum_l q_l exp(j 2 pi f l)` at `f = i / n`, `i = 0..n`.
pub fn dual_poly(q: &[C64], grid: &PilotGrid, n: usize) -> Result<Vec<C64>> {
    let p = grid.pilots();
    if q.len() != p {
        return Err(Error::Dimension(format!(
            "q has {} entries, grid has {p} pilots",
            q.len()
        )));
    }
    if n < p {
        return Err(Error::Domain(format!(
            "evaluation grid of {n} points is coarser than {p} pilots"
        )));
    }
    let mut buf = vec![C64::new(0.0, 0.0); n];
    buf[..p].copy_from_slice(q);
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let first = grid.first_index();
    for (i, v) in buf.iter_mut().enumerate() {
        // phase of the first index, reduced mod n to keep the argument small
        let k = (i as i64 * first).rem_euclid(n as i64);
        *v *= C64::from_polar(1.0, TAU * k as f64 / n as f64);
    }
    Ok(buf)
}

/// `Q(f)` and its first two derivatives at a single frequency.
pub fn dual_poly_at(q: &[C64], grid: &PilotGrid, f: f64) -> (C64, C64, C64) {
    let mut out = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for (pos, c) in q.iter().enumerate() {
        let l = grid.index_at(pos) as f64;
        let e = c * C64::from_polar(1.0, TAU * (f * l).rem_euclid(1.0));
        let w = C64::new(0.0, TAU * l);
        out.0 += e;
        out.1 += w * e;
        out.2 += w * w * e;
    }
    out
}

/// Local maxima of `|Q|` on a uniform grid that reach `threshold`, refined by
/// a parabola through `|Q|^2` and merged when closer than half a cell `1/P`.
pub fn find_frequencies(samples: &[C64], pilots: usize, threshold: f64) -> Vec<f64> {
    let n = samples.len();
    if n < 3 {
        return Vec::new();
    }
    let mag: Vec<f64> = samples.iter().map(|v| v.norm_sqr()).collect();
    let thr = threshold * threshold;
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let (l, c, r) = (mag[(i + n - 1) % n], mag[i], mag[(i + 1) % n]);
        if c < thr || c <= l || c < r {
            continue;
        }
        let den = l - 2.0 * c + r;
        let shift = if den < 0.0 {
            (0.5 * (l - r) / den).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let f = ((i as f64 + shift) / n as f64).rem_euclid(1.0);
        peaks.push((f, c));
    }
    merge_peaks(peaks, 0.5 / pilots as f64)
}

fn merge_peaks(mut peaks: Vec<(f64, f64)>, radius: f64) -> Vec<f64> {
    // strongest first, drop anything within `radius` of a kept peak
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut kept: Vec<f64> = Vec::new();
    for (f, _) in peaks {
        if kept.iter().all(|&k| wrapped_distance(k, f) >= radius) {
            kept.push(f);
        }
    }
    kept.sort_by(f64::total_cmp);
    kept
}

/// Newton iterations on `|Q(f)|^2` started from each coarse peak.
pub fn refine_frequencies(q: &[C64], grid: &PilotGrid, freqs: &[f64]) -> Vec<f64> {
    let max_step = 0.25 / grid.pilots() as f64;
    let mut out: Vec<f64> = freqs
        .iter()
        .map(|&f0| {
            let mut f = f0;
            for _ in 0..20 {
                let (v, d1, d2) = dual_poly_at(q, grid, f);
                let g1 = 2.0 * (v.conj() * d1).re;
                let g2 = 2.0 * (d1.norm_sqr() + (v.conj() * d2).re);
                if g2 >= 0.0 {
                    break;
                }
                let step = (-g1 / g2).clamp(-max_step, max_step);
                let next = (f + step).rem_euclid(1.0);
                if dual_poly_at(q, grid, next).0.norm_sqr() < v.norm_sqr() {
                    break;
                }
                f = next;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            f
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Positions `k` with `|q_k| >= ratio * lambda`.
pub fn find_impulses(q: &[C64], lambda: f64, ratio: f64) -> Vec<usize> {
    q.iter()
        .enumerate()
        .filter(|(_, v)| v.norm() >= ratio * lambda)
        .map(|(k, _)| k)
        .collect()
}

/// Delays `tau = f P Ts` of the detected frequencies.
pub fn delays_from_freqs(freqs: &[f64], grid: &PilotGrid) -> Vec<f64> {
    freqs.iter().map(|&f| grid.freq_to_delay(f)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainFit {
    pub alpha: Vec<C64>,
    pub beta: Vec<C64>,
    /// `V(freqs) alpha`.
    pub h: Vec<C64>,
}

/// Joint least squares `y ~ V(freqs) alpha + E beta` over the detected
/// supports, using the minimum-norm solution when columns are dependent.
pub fn recover_gains(
    y: &[C64],
    grid: &PilotGrid,
    freqs: &[f64],
    support: &[usize],
) -> Result<GainFit> {
    let p = grid.pilots();
    if y.len() != p {
        return Err(Error::Dimension(format!(
            "measurement has {} entries, grid has {p} pilots",
            y.len()
        )));
    }
    let (s, r) = (freqs.len(), support.len());
    if s + r > p {
        return Err(Error::Identifiability {
            unknowns: s + r,
            measurements: p,
        });
    }
    if let Some(&k) = support.iter().find(|&&k| k >= p) {
        return Err(Error::Domain(format!(
            "impulse position {k} is outside 0..{p}"
        )));
    }
    if s + r == 0 {
        return Ok(GainFit {
            alpha: Vec::new(),
            beta: Vec::new(),
            h: vec![C64::new(0.0, 0.0); p],
        });
    }
    let v = atom_matrix(freqs, grid);
    let mut m = DMatrix::zeros(p, s + r);
    m.columns_mut(0, s).copy_from(&v);
    for (j, &k) in support.iter().enumerate() {
        m[(k, s + j)] = C64::new(1.0, 0.0);
    }
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * (p.max(s + r) as f64) * f64::EPSILON;
    let rhs = DVector::from_column_slice(y);
    let sol = svd.solve(&rhs, eps).map_err(|e| Error::Numerical {
        iteration: 0,
        reason: e.to_string(),
    })?;
    let alpha: Vec<C64> = sol.rows(0, s).iter().copied().collect();
    let beta: Vec<C64> = sol.rows(s, r).iter().copied().collect();
    let h = (&v * DVector::from_column_slice(&alpha))
        .iter()
        .copied()
        .collect();
    Ok(GainFit { alpha, beta, h })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizeOptions {
    /// Evaluation grid for peak search; `None` picks `max(2^16, 16 P)`.
    pub grid_n: Option<usize>,
    pub peak_threshold: f64,
    pub impulse_ratio: f64,
    /// Polish each peak with Newton steps on the exact polynomial.
    pub refine: bool,
    /// Relative gain below which a detected tap is treated as spurious.
    /// Degenerate duals (noiseless data, large `lambda`) can touch the unit
    /// level away from the true support; those peaks fit to near-zero gain.
    pub min_gain_ratio: f64,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        Self {
            grid_n: None,
            peak_threshold: DEFAULT_PEAK_THRESHOLD,
            impulse_ratio: DEFAULT_IMPULSE_RATIO,
            refine: true,
            min_gain_ratio: DEFAULT_MIN_GAIN_RATIO,
        }
    }
}

impl LocalizeOptions {
    pub fn grid_size(&self, pilots: usize) -> usize {
        self.grid_n.unwrap_or_else(|| (1 << 16).max(16 * pilots))
    }
}

/// Recovered channel and impulses.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub freqs: Vec<f64>,
    pub delays: Vec<f64>,
    pub gains: Vec<C64>,
    pub impulse_support: Vec<usize>,
    pub impulses: Vec<C64>,
    /// Channel estimate on the pilots.
    pub h: Vec<C64>,
}

impl EstimateResult {
    /// CSV with columns `freq,delay,re,im`.
    pub fn taps_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["freq", "delay", "re", "im"])?;
        for ((f, d), a) in self.freqs.iter().zip(&self.delays).zip(&self.gains) {
            w.write_record([f, d, &a.re, &a.im].map(|v| crate::io::fmt_f64(*v)))?;
        }
        crate::io::finish_csv(w)
    }

    /// CSV with columns `index,re,im`, `index` being the pilot subcarrier.
    pub fn impulses_csv(&self, grid: &PilotGrid) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "re", "im"])?;
        for (k, b) in self.impulse_support.iter().zip(&self.impulses) {
            w.write_record([
                grid.index_at(*k).to_string(),
                crate::io::fmt_f64(b.re),
                crate::io::fmt_f64(b.im),
            ])?;
        }
        crate::io::finish_csv(w)
    }

    /// `|h - h_hat|_2 / |h|_2`, or the absolute error when `h` is zero.
    pub fn relative_error(&self, h: &[C64]) -> f64 {
        relative_error(h, &self.h)
    }
}

pub fn relative_error(h: &[C64], h_hat: &[C64]) -> f64 {
    let err = h
        .iter()
        .zip(h_hat)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let norm = h.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        err / norm
    } else {
        err
    }
}

/// Frequencies whose fitted gain reaches `ratio` times the strongest one.
pub fn strong_taps(freqs: &[f64], alpha: &[C64], ratio: f64) -> Vec<f64> {
    let strongest = alpha.iter().map(|a| a.norm()).fold(0.0, f64::max);
    freqs
        .iter()
        .zip(alpha)
        .filter(|(_, a)| a.norm() >= ratio * strongest)
        .map(|(f, _)| *f)
        .collect()
}

/// Frequencies, impulse support and gains from a solved dual program.
pub fn localize(
    y: &[C64],
    grid: &PilotGrid,
    dual: &DualSolution,
    lambda: f64,
    opts: &LocalizeOptions,
) -> Result<EstimateResult> {
    let samples = dual_poly(&dual.q, grid, opts.grid_size(grid.pilots()))?;
    let mut freqs = find_frequencies(&samples, grid.pilots(), opts.peak_threshold);
    if opts.refine {
        freqs = refine_frequencies(&dual.q, grid, &freqs);
    }
    let support = find_impulses(&dual.q, lambda, opts.impulse_ratio);
    let mut fit = recover_gains(y, grid, &freqs, &support)?;
    let kept = strong_taps(&freqs, &fit.alpha, opts.min_gain_ratio);
    if kept.len() < freqs.len() {
        freqs = kept;
        fit = recover_gains(y, grid, &freqs, &support)?;
    }
    Ok(EstimateResult {
        delays: delays_from_freqs(&freqs, grid),
        freqs,
        gains: fit.alpha,
        impulse_support: support,
        impulses: fit.beta,
        h: fit.h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(p: usize) -> PilotGrid {
        PilotGrid::new(p, p, 1.0).unwrap()
    }

    #[test]
    fn dual_poly_matches_direct_sum() {
        let g = grid(7);
        let q: Vec<C64> = (0..7)
            .map(|k| C64::new(k as f64 * 0.1, 1.0 - k as f64 * 0.2))
            .collect();
        let n = 40;
        let fast = dual_poly(&q, &g, n).unwrap();
        for (i, v) in fast.iter().enumerate() {
            let f = i as f64 / n as f64;
            let direct: C64 = (0..7)
                .map(|k| q[k] * C64::from_polar(1.0, TAU * f * g.index_at(k) as f64))
                .sum();
            assert!((v - direct).norm() < 1e-12);
            assert!((dual_poly_at(&q, &g, f).0 - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn unit_shift_has_flat_modulus() {
        let g = grid(8);
        let mut q = vec![C64::new(0.0, 0.0); 8];
        q[1] = C64::new(1.0, 0.0);
        for v in dual_poly(&q, &g, 64).unwrap() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = grid(8);
        assert!(dual_poly(&[C64::new(0.0, 0.0); 8], &g, 7).is_err());
    }

    #[test]
    fn single_peak_is_located() {
        let g = grid(16);
        let a = crate::model::atom(0.3, 0.0, &g).unwrap();
        // q = a / P peaks at f = 0.3 with |Q| = 1
        let q: Vec<C64> = a.iter().map(|v| v / 16.0).collect();
        let samples = dual_poly(&q, &g, 4 * 16).unwrap();
        let f = find_frequencies(&samples, 16, 0.9);
        assert_eq!(f.len(), 1);
        assert!(wrapped_distance(f[0], 0.3) < 1e-2);
        let r = refine_frequencies(&q, &g, &f);
        assert!(wrapped_distance(r[0], 0.3) < 1e-12, "{}", r[0]);
    }

    #[test]
    fn fine_grid_peak_within_1e4() {
        let g = grid(16);
        let a = crate::model::atom(0.3, 0.0, &g).unwrap();
        let q: Vec<C64> = a.iter().map(|v| v / 16.0).collect();
        let f = find_frequencies(&dual_poly(&q, &g, 1 << 12).unwrap(), 16, 0.99);
        assert_eq!(f.len(), 1);
        assert!((f[0] - 0.3).abs() < 1e-4);
    }

    #[test]
    fn close_peaks_merge() {
        let f = merge_peaks(
            vec![
                (0.1, 1.0),
                (0.1 + 0.2 / 16.0, 0.99),
                (0.999, 0.995),
                (0.5, 1.0),
            ],
            0.5 / 16.0,
        );
        assert_eq!(f, vec![0.1, 0.5, 0.999]);
        let f = merge_peaks(vec![(0.001, 0.99), (0.999, 1.0)], 0.5 / 16.0);
        assert_eq!(f, vec![0.999]);
    }

    #[test]
    fn impulses_by_ratio() {
        let q = [
            C64::new(0.1, 0.0),
            C64::new(0.0, 0.0995),
            C64::new(0.05, 0.0),
        ];
        assert_eq!(find_impulses(&q, 0.1, 0.99), vec![0, 1]);
    }

    #[test]
    fn gains_exact_when_noiseless() {
        let g = grid(16);
        let freqs = [0.2, 0.55];
        let alpha = [C64::new(1.0, -0.5), C64::new(-0.3, 0.8)];
        let v = atom_matrix(&freqs, &g);
        let mut y: Vec<C64> = (&v * DVector::from_column_slice(&alpha))
            .iter()
            .copied()
            .collect();
        y[3] += C64::new(4.0, 1.0);
        let fit = recover_gains(&y, &g, &freqs, &[3]).unwrap();
        for (a, b) in fit.alpha.iter().zip(&alpha) {
            assert!((a - b).norm() < 1e-10);
        }
        assert!((fit.beta[0] - C64::new(4.0, 1.0)).norm() < 1e-10);
    }

    #[test]
    fn negligible_taps_are_pruned() {
        let alpha = [
            C64::new(1.0, 0.0),
            C64::new(0.0, 5e-4),
            C64::new(0.0, -1e-3),
        ];
        assert_eq!(strong_taps(&[0.1, 0.2, 0.3], &alpha, 1e-3), vec![0.1, 0.3]);
        assert!(strong_taps(&[], &[], 1e-3).is_empty());
    }

    #[test]
    fn too_many_unknowns() {
        let g = grid(4);
        let y = vec![C64::new(1.0, 0.0); 4];
        let err = recover_gains(&y, &g, &[0.1, 0.6], &[0, 1, 2]).unwrap_err();
        assert!(matches!(
            err,
            Error::Identifiability {
                unknowns: 5,
                measurements: 4
            }
        ));
    }

    #[test]
    fn duplicate_columns_use_min_norm() {
        let g = grid(8);
        let y: Vec<C64> = crate::model::atom(0.25, 0.0, &g).unwrap();
        let fit = recover_gains(&y, &g, &[0.25, 0.25], &[]).unwrap();
        assert!((fit.alpha[0] - C64::new(0.5, 0.0)).norm() < 1e-10);
        assert!((fit.alpha[1] - C64::new(0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn delays_scale_with_grid() {
        let g = PilotGrid::new(256, 64, 1e-7).unwrap();
        let d = delays_from_freqs(&[0.25], &g);
        assert!((d[0] - 0.25 * 64.0 * 1e-7).abs() < 1e-20);
    }
}
