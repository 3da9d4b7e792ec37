//! On-grid baseline: the same robust fit restricted to a fixed frequency grid.
//!
//! ```text
//! minimize   sum_g |c_g| + lambda sum_k |z_k|
//! subject to |y - F c - z|_2 <= eps
//! ```
//!
//! with `F` the atoms at `f_g = g / G`. Complex moduli are second-order cone
//! epigraphs, so the cost is the true complex l1 norm.

use crate::conic::{self, Cone, ConeSpec, ConicProblem, CscMatrix, Settings, SolverResult};
use crate::error::{Error, Result};
use crate::localize::{delays_from_freqs, EstimateResult};
use crate::model::{atom_matrix, PilotGrid, C64};

/// Grid size as a multiple of the pilot count.
pub const DEFAULT_PLM_GRID_FACTOR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlmParams {
    pub lambda: f64,
    pub epsilon: f64,
    /// Number of grid frequencies `G`.
    pub grid_size: usize,
    pub settings: Settings,
}

impl PlmParams {
    pub fn new(lambda: f64, epsilon: f64, grid_size: usize) -> Result<Self> {
        let p = Self {
            lambda,
            epsilon,
            grid_size,
            settings: Settings::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_settings(mut self, settings: Settings) -> Self {
        self.settings = settings;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Domain(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.grid_size == 0 {
            return Err(Error::Domain("grid size must be positive".into()));
        }
        Ok(())
    }
}

/// The uniform frequency grid `g / G`.
pub fn plm_grid(grid_size: usize) -> Vec<f64> {
    (0..grid_size)
        .map(|g| g as f64 / grid_size as f64)
        .collect()
}

/// Encodes the baseline problem. Variables are laid out as
/// `[Re c, Im c, u, Re z, Im z, v]` with `u`, `v` the modulus epigraphs.
pub fn build_plm(y: &[C64], grid: &PilotGrid, params: &PlmParams) -> Result<ConicProblem> {
    params.validate()?;
    let p = grid.pilots();
    if y.len() != p {
        return Err(Error::Dimension(format!(
            "measurement has {} entries, grid has {p} pilots",
            y.len()
        )));
    }
    let g = params.grid_size;
    let f = atom_matrix(&plm_grid(g), grid);
    let (re_c, im_c, u) = (0, g, 2 * g);
    let (re_z, im_z, v) = (3 * g, 3 * g + p, 3 * g + 2 * p);
    let n = 3 * g + 3 * p;

    let mut trip = Vec::with_capacity(4 * p * g + 4 * g + 6 * p);
    let mut b = Vec::new();
    for k in 0..g {
        let r = b.len();
        b.extend([0.0; 3]);
        trip.push((r, u + k, -1.0));
        trip.push((r + 1, re_c + k, -1.0));
        trip.push((r + 2, im_c + k, -1.0));
    }
    for k in 0..p {
        let r = b.len();
        b.extend([0.0; 3]);
        trip.push((r, v + k, -1.0));
        trip.push((r + 1, re_z + k, -1.0));
        trip.push((r + 2, im_z + k, -1.0));
    }
    // (eps, Re(y - Fc - z), Im(y - Fc - z))
    let r = b.len();
    b.push(params.epsilon);
    b.extend(y.iter().map(|v| v.re));
    b.extend(y.iter().map(|v| v.im));
    for l in 0..p {
        for k in 0..g {
            let a = f[(l, k)];
            trip.push((r + 1 + l, re_c + k, a.re));
            trip.push((r + 1 + l, im_c + k, -a.im));
            trip.push((r + 1 + p + l, re_c + k, a.im));
            trip.push((r + 1 + p + l, im_c + k, a.re));
        }
        trip.push((r + 1 + l, re_z + l, 1.0));
        trip.push((r + 1 + p + l, im_z + l, 1.0));
    }

    let mut blocks: Vec<Cone> = std::iter::repeat_n(Cone::SecondOrder(3), g + p).collect();
    blocks.push(Cone::SecondOrder(2 * p + 1));
    let mut c = vec![0.0; n];
    c[u..u + g].fill(1.0);
    c[v..v + p].fill(params.lambda);
    let a = CscMatrix::from_triplets(b.len(), n, &trip)?;
    ConicProblem::new(c, a, b, ConeSpec::new(blocks))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlmSolution {
    /// Grid coefficients.
    pub c: Vec<C64>,
    /// Impulse estimate.
    pub z: Vec<C64>,
    /// Channel estimate `F c`.
    pub h: Vec<C64>,
    pub objective: f64,
    pub result: SolverResult,
}

/// Entries smaller than this fraction of the largest are not reported as taps
/// or impulses. The channel estimate always uses every coefficient.
const REPORT_FRACTION: f64 = 1e-2;

impl PlmSolution {
    /// Tabulates the grid taps and impulses that carry visible weight.
    pub fn to_estimate(&self, grid: &PilotGrid, grid_size: usize) -> EstimateResult {
        let freqs = plm_grid(grid_size);
        let cmax = self.c.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let zmax = self.z.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let taps: Vec<usize> = (0..self.c.len())
            .filter(|&g| cmax > 0.0 && self.c[g].norm() >= REPORT_FRACTION * cmax)
            .collect();
        let support: Vec<usize> = (0..self.z.len())
            .filter(|&k| zmax > 0.0 && self.z[k].norm() >= REPORT_FRACTION * zmax)
            .collect();
        let f: Vec<f64> = taps.iter().map(|&g| freqs[g]).collect();
        EstimateResult {
            delays: delays_from_freqs(&f, grid),
            freqs: f,
            gains: taps.iter().map(|&g| self.c[g]).collect(),
            impulses: support.iter().map(|&k| self.z[k]).collect(),
            impulse_support: support,
            h: self.h.clone(),
        }
    }
}

pub fn solve_plm(y: &[C64], grid: &PilotGrid, params: &PlmParams) -> Result<PlmSolution> {
    let problem = build_plm(y, grid, params)?;
    let result = conic::solve(&problem, &params.settings)?;
    let (g, p) = (params.grid_size, grid.pilots());
    let x = &result.x;
    let c: Vec<C64> = (0..g).map(|k| C64::new(x[k], x[g + k])).collect();
    let z: Vec<C64> = (0..p)
        .map(|k| C64::new(x[3 * g + k], x[3 * g + p + k]))
        .collect();
    let f = atom_matrix(&plm_grid(g), grid);
    let h = (&f * nalgebra::DVector::from_column_slice(&c))
        .iter()
        .copied()
        .collect();
    let objective = c.iter().map(|v| v.norm()).sum::<f64>()
        + params.lambda * z.iter().map(|v| v.norm()).sum::<f64>();
    Ok(PlmSolution {
        c,
        z,
        h,
        objective,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_grid_atom_is_recovered() {
        let grid = PilotGrid::new(16, 16, 1.0).unwrap();
        let params = PlmParams::new(1.0, 1e-6, 32).unwrap();
        let freqs = plm_grid(32);
        let alpha = C64::new(-0.4, 0.7);
        let a = crate::model::atom(freqs[9], 0.0, &grid).unwrap();
        let y: Vec<C64> = a.iter().map(|v| v * alpha).collect();
        let sol = solve_plm(&y, &grid, &params).unwrap();
        assert!(sol.result.converged());
        assert!((sol.c[9] - alpha).norm() < 1e-3, "{}", sol.c[9]);
        assert!((sol.objective - alpha.norm()).abs() < 1e-3);
        let err: f64 = sol
            .h
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-3);
    }

    #[test]
    fn shape_and_validation() {
        let grid = PilotGrid::new(8, 8, 1.0).unwrap();
        let params = PlmParams::new(1.0, 0.1, 32).unwrap();
        let y = vec![C64::new(1.0, 0.0); 8];
        let prob = build_plm(&y, &grid, &params).unwrap();
        assert_eq!(prob.num_vars(), 3 * 32 + 3 * 8);
        assert_eq!(prob.num_rows(), 3 * 40 + 17);
        assert!(build_plm(&y[..7], &grid, &params).is_err());
        assert!(PlmParams::new(1.0, 0.1, 0).is_err());
    }
}
