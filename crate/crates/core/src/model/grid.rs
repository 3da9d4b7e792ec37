use std::f64::consts::TAU;

use super::C64;
use crate::error::{Error, Result};

/// The pilot layout: `N` subcarriers, `P` equispaced pilots, sampling
/// interval `Ts`, and the centered pilot index set `J`.
///
/// For odd `P`, `J = {-(P-1)/2, ..., (P-1)/2}`. For even `P` the set is
/// `{-(P/2-1), ..., P/2}`, so it always holds exactly `P` indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotGrid {
    subcarriers: usize,
    pilots: usize,
    ts: f64,
}

impl PilotGrid {
    pub fn new(subcarriers: usize, pilots: usize, ts: f64) -> Result<Self> {
        if pilots == 0 {
            return Err(Error::Domain("pilot count must be positive".into()));
        }
        if !subcarriers.is_multiple_of(pilots) {
            return Err(Error::Domain(format!(
                "pilot count {pilots} does not divide subcarrier count {subcarriers}"
            )));
        }
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::Domain(format!(
                "sampling interval must be positive, got {ts}"
            )));
        }
        Ok(Self {
            subcarriers,
            pilots,
            ts,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn pilots(&self) -> usize {
        self.pilots
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// Pilot spacing `D = N / P` in subcarriers.
    pub fn spacing(&self) -> usize {
        self.subcarriers / self.pilots
    }

    /// Smallest element of `J`.
    pub fn first_index(&self) -> i64 {
        -(((self.pilots - 1) / 2) as i64)
    }

    /// Element of `J` stored at vector position `pos`.
    pub fn index_at(&self, pos: usize) -> i64 {
        self.first_index() + pos as i64
    }

    /// Vector position of index `l`, if `l` belongs to `J`.
    pub fn position_of(&self, l: i64) -> Option<usize> {
        let pos = l - self.first_index();
        (0..self.pilots as i64)
            .contains(&pos)
            .then_some(pos as usize)
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.pilots).map(|p| self.index_at(p))
    }

    /// Largest admissible delay `P * Ts` (exclusive).
    pub fn max_delay(&self) -> f64 {
        self.pilots as f64 * self.ts
    }

    /// `f = tau / (P Ts)`.
    pub fn delay_to_freq(&self, tau: f64) -> f64 {
        tau / self.max_delay()
    }

    /// `tau = f P Ts`.
    pub fn freq_to_delay(&self, f: f64) -> f64 {
        f * self.max_delay()
    }
}

/// Sinusoidal atom `a(f, phi)(l) = e^{j phi} e^{-j 2 pi l f}` for `l` in `J`.
pub fn atom(f: f64, phi: f64, grid: &PilotGrid) -> Result<Vec<C64>> {
    if !(0.0..1.0).contains(&f) {
        return Err(Error::Domain(format!("frequency {f} outside [0, 1)")));
    }
    if !(0.0..TAU).contains(&phi) {
        return Err(Error::Domain(format!("phase {phi} outside [0, 2pi)")));
    }
    Ok(atom_unchecked(f, phi, grid))
}

pub(crate) fn atom_unchecked(f: f64, phi: f64, grid: &PilotGrid) -> Vec<C64> {
    grid.indices()
        .map(|l| C64::from_polar(1.0, phi - TAU * (l as f64) * f))
        .collect()
}

/// Column-major `P x K` matrix whose columns are `a(f_k, 0)`.
pub fn atom_matrix(freqs: &[f64], grid: &PilotGrid) -> nalgebra::DMatrix<C64> {
    let p = grid.pilots();
    let mut m = nalgebra::DMatrix::zeros(p, freqs.len());
    for (k, &f) in freqs.iter().enumerate() {
        for (row, v) in atom_unchecked(f, 0.0, grid).into_iter().enumerate() {
            m[(row, k)] = v;
        }
    }
    m
}
