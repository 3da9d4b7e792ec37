//! Atomic-norm channel estimation with an impulsive-noise penalty.
//!
//! The estimate comes from the dual program
//!
//! ```text
//! maximize   Re<q, y> - eps |q|_2
//! subject to [[Q0, q], [q^H, 1]] >= 0
//!            sum_i Q0[i, i+k] = delta_k,   k = 0..P-1
//!            |q_k| <= lambda
//! ```
//!
//! whose optimal `q` is the coefficient vector of the dual polynomial used
//! for support detection in [`crate::localize`].

mod plm;

pub use plm::{build_plm, plm_grid, solve_plm, PlmParams, PlmSolution, DEFAULT_PLM_GRID_FACTOR};

use nalgebra::DMatrix;

use crate::conic::{
    self, svec_index, Cone, ConeSpec, ConicProblem, CscMatrix, Settings, SolverResult,
};
use crate::error::{Error, Result};
use crate::model::{PilotGrid, C64};

/// Default multiple of `sigma sqrt(P)` used as the noise-ball radius.
pub const DEFAULT_NOISE_BALL: f64 = 2.5;

/// Radius of the residual ball for noise level `sigma`.
pub fn noise_radius(sigma: f64, pilots: usize, noise_ball: f64) -> f64 {
    noise_ball * sigma * (pilots as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanmParams {
    /// Weight of the impulse penalty.
    pub lambda: f64,
    /// Residual ball radius.
    pub epsilon: f64,
    pub settings: Settings,
}

impl PanmParams {
    pub fn new(lambda: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            lambda,
            epsilon,
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
        Ok(())
    }
}

/// Positions of the dual variables inside the conic variable vector.
///
/// Order: `Re q`, `Im q`, the diagonal of `Q0`, then `(Re, Im)` pairs of the
/// strict upper triangle of `Q0` row by row, then the epigraph variable `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DualLayout {
    pub pilots: usize,
}

impl DualLayout {
    pub fn num_vars(&self) -> usize {
        let p = self.pilots;
        2 * p + p * p + 1
    }

    pub fn q_re(&self, i: usize) -> usize {
        i
    }

    pub fn q_im(&self, i: usize) -> usize {
        self.pilots + i
    }

    pub fn diag(&self, i: usize) -> usize {
        2 * self.pilots + i
    }

    fn pair(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.pilots);
        let p = self.pilots;
        let before = i * (2 * p - i - 1) / 2;
        3 * p + 2 * (before + (j - i - 1))
    }

    /// `Re Q0[i, j]` for `i < j`.
    pub fn off_re(&self, i: usize, j: usize) -> usize {
        self.pair(i, j)
    }

    /// `Im Q0[i, j]` for `i < j`.
    pub fn off_im(&self, i: usize, j: usize) -> usize {
        self.pair(i, j) + 1
    }

    pub fn t(&self) -> usize {
        self.num_vars() - 1
    }

    /// Number of equality rows carrying the trace constraints.
    pub fn trace_rows(&self) -> usize {
        2 * self.pilots - 1
    }

    pub fn q(&self, x: &[f64]) -> Vec<C64> {
        (0..self.pilots)
            .map(|i| C64::new(x[self.q_re(i)], x[self.q_im(i)]))
            .collect()
    }

    pub fn q0(&self, x: &[f64]) -> DMatrix<C64> {
        let p = self.pilots;
        let mut m = DMatrix::zeros(p, p);
        for i in 0..p {
            m[(i, i)] = C64::new(x[self.diag(i)], 0.0);
            for j in i + 1..p {
                let v = C64::new(x[self.off_re(i, j)], x[self.off_im(i, j)]);
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        m
    }
}

/// Encodes the dual program for measurements `y` as a conic problem.
///
/// The Hermitian block is imposed through its real embedding
/// `[[Re M, -Im M], [Im M, Re M]]`, the bound `|q_k| <= lambda` as `P`
/// three-dimensional second-order cones and `eps |q|_2` through an epigraph.
pub fn build_dual_sdp(y: &[C64], params: &PanmParams) -> Result<ConicProblem> {
    params.validate()?;
    let p = y.len();
    if p < 3 {
        return Err(Error::Unsupported(format!(
            "at least 3 pilots are required, got {p}"
        )));
    }
    if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Domain(
            "measurements contain non-finite values".into(),
        ));
    }
    let lay = DualLayout { pilots: p };
    let n = lay.num_vars();
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = Vec::new();

    // trace rows
    for i in 0..p {
        trip.push((0, lay.diag(i), 1.0));
    }
    b.push(1.0);
    for k in 1..p {
        let r = 2 * k - 1;
        for i in 0..p - k {
            trip.push((r, lay.off_re(i, i + k), 1.0));
            trip.push((r + 1, lay.off_im(i, i + k), 1.0));
        }
        b.extend([0.0, 0.0]);
    }

    // PSD block of side 2(P+1)
    let n1 = p + 1;
    let side = 2 * n1;
    let base = b.len();
    let dim = side * (side + 1) / 2;
    b.resize(base + dim, 0.0);
    let mut put = |i: usize, j: usize, var: usize, coef: f64| {
        let (i, j) = if i < j { (j, i) } else { (i, j) };
        let scale = if i == j {
            1.0
        } else {
            std::f64::consts::SQRT_2
        };
        trip.push((base + svec_index(side, i, j), var, -coef * scale));
    };
    for a in 0..n1 {
        for c in a..n1 {
            if a == p {
                continue;
            }
            let (re, im) = if c == p {
                (lay.q_re(a), Some(lay.q_im(a)))
            } else if a == c {
                (lay.diag(a), None)
            } else {
                (lay.off_re(a, c), Some(lay.off_im(a, c)))
            };
            put(a, c, re, 1.0);
            put(a + n1, c + n1, re, 1.0);
            if let Some(im) = im {
                put(a + n1, c, im, 1.0);
                put(c + n1, a, im, -1.0);
            }
        }
    }
    b[base + svec_index(side, p, p)] = 1.0;
    b[base + svec_index(side, p + n1, p + n1)] = 1.0;

    // |q_k| <= lambda
    for i in 0..p {
        let r = b.len();
        b.extend([params.lambda, 0.0, 0.0]);
        trip.push((r + 1, lay.q_re(i), -1.0));
        trip.push((r + 2, lay.q_im(i), -1.0));
    }

    // |q|_2 <= t
    let r = b.len();
    b.resize(r + 2 * p + 1, 0.0);
    trip.push((r, lay.t(), -1.0));
    for i in 0..p {
        trip.push((r + 1 + i, lay.q_re(i), -1.0));
        trip.push((r + 1 + p + i, lay.q_im(i), -1.0));
    }

    let mut blocks = vec![Cone::Zero(lay.trace_rows()), Cone::Psd(side)];
    blocks.extend(std::iter::repeat_n(Cone::SecondOrder(3), p));
    blocks.push(Cone::SecondOrder(2 * p + 1));

    let mut c = vec![0.0; n];
    for (i, v) in y.iter().enumerate() {
        c[lay.q_re(i)] = -v.re;
        c[lay.q_im(i)] = -v.im;
    }
    c[lay.t()] = params.epsilon;

    let a = CscMatrix::from_triplets(b.len(), n, &trip)?;
    ConicProblem::new(c, a, b, ConeSpec::new(blocks))
}

/// Optimal dual variables and the solver run that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Dual polynomial coefficients, indexed like the pilots.
    pub q: Vec<C64>,
    /// Hermitian certificate matrix.
    pub q0: DMatrix<C64>,
    /// `Re<q, y> - eps |q|_2` evaluated at the returned `q`.
    pub objective: f64,
    pub result: SolverResult,
}

impl DualSolution {
    /// `max_k |tr(Theta_k Q0) - delta_k|`.
    pub fn trace_residual(&self) -> f64 {
        let p = self.q.len();
        (0..p)
            .map(|k| {
                let s: C64 = (0..p - k).map(|i| self.q0[(i, i + k)]).sum();
                let target = if k == 0 { 1.0 } else { 0.0 };
                (s - target).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of `[[Q0, q], [q^H, 1]]`.
    pub fn min_block_eigenvalue(&self) -> Result<f64> {
        let p = self.q.len();
        let mut m = DMatrix::from_element(p + 1, p + 1, C64::new(0.0, 0.0));
        m.view_mut((0, 0), (p, p)).copy_from(&self.q0);
        for i in 0..p {
            m[(i, p)] = self.q[i];
            m[(p, i)] = self.q[i].conj();
        }
        m[(p, p)] = C64::new(1.0, 0.0);
        let e = conic::hermitian_embed(&m)?;
        let ev = e.symmetric_eigenvalues();
        Ok(ev.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// CSV with columns `index,re,im`.
    pub fn to_csv(&self, grid: &PilotGrid) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["index", "re", "im"])?;
        for (pos, v) in self.q.iter().enumerate() {
            w.write_record([
                grid.index_at(pos).to_string(),
                crate::io::fmt_f64(v.re),
                crate::io::fmt_f64(v.im),
            ])?;
        }
        crate::io::finish_csv(w)
    }
}

/// Solves the dual program. A run that stops at the iteration cap is still
/// returned; check `result.status`.
///
/// Entries of `q` that overshoot the `lambda` bound by the solver tolerance
/// are pulled back radially onto it.
pub fn solve_panm(y: &[C64], params: &PanmParams) -> Result<DualSolution> {
    let problem = build_dual_sdp(y, params)?;
    let result = conic::solve(&problem, &params.settings)?;
    let lay = DualLayout { pilots: y.len() };
    let mut q = lay.q(&result.x);
    for v in q.iter_mut() {
        let m = v.norm();
        if m > params.lambda {
            *v *= params.lambda / m;
        }
    }
    let q0 = lay.q0(&result.x);
    let objective = dual_objective(y, &q, params.epsilon);
    Ok(DualSolution {
        q,
        q0,
        objective,
        result,
    })
}

/// `Re<q, y> - eps |q|_2`.
pub fn dual_objective(y: &[C64], q: &[C64], epsilon: f64) -> f64 {
    let inner: f64 = y
        .iter()
        .zip(q)
        .map(|(a, b)| a.re * b.re + a.im * b.im)
        .sum();
    let norm = q.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    inner - epsilon * norm
}

/// Primal cost `sum |alpha| + lambda sum |beta|` of a recovered estimate.
pub fn primal_surrogate(alpha: &[C64], beta: &[C64], lambda: f64) -> f64 {
    alpha.iter().map(|a| a.norm()).sum::<f64>()
        + lambda * beta.iter().map(|b| b.norm()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_a_bijection() {
        for p in 3..9 {
            let lay = DualLayout { pilots: p };
            let mut seen = vec![false; lay.num_vars()];
            let mut mark = |k: usize| {
                assert!(!seen[k], "index {k} used twice for P={p}");
                seen[k] = true;
            };
            for i in 0..p {
                mark(lay.q_re(i));
                mark(lay.q_im(i));
                mark(lay.diag(i));
                for j in i + 1..p {
                    mark(lay.off_re(i, j));
                    mark(lay.off_im(i, j));
                }
            }
            mark(lay.t());
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn p3_problem_shape() {
        let y = vec![C64::new(1.0, 0.5); 3];
        let params = PanmParams::new(0.5, 0.1).unwrap();
        let prob = build_dual_sdp(&y, &params).unwrap();
        assert_eq!(prob.num_vars(), 16);
        let names: Vec<_> = prob.cones.blocks.iter().map(|c| c.name()).collect();
        assert_eq!(names.iter().filter(|n| **n == "psd").count(), 1);
        assert_eq!(prob.cones.blocks[1], Cone::Psd(8));
        assert_eq!(prob.cones.blocks[0], Cone::Zero(5));
    }

    #[test]
    fn small_pilot_counts_are_rejected() {
        let params = PanmParams::new(0.5, 0.1).unwrap();
        for p in 0..3 {
            let y = vec![C64::new(1.0, 0.0); p];
            assert!(matches!(
                build_dual_sdp(&y, &params),
                Err(Error::Unsupported(_))
            ));
        }
    }

    #[test]
    fn invalid_params() {
        assert!(PanmParams::new(0.0, 0.1).is_err());
        assert!(PanmParams::new(0.1, -1.0).is_err());
        assert!(PanmParams::new(f64::NAN, 0.1).is_err());
    }

    // Feasible point: q = 0, Q0 = I/P, t = 0 must give a slack inside the cones.
    #[test]
    fn trivial_point_is_feasible() {
        let p = 5;
        let y = vec![C64::new(0.3, -0.2); p];
        let params = PanmParams::new(0.5, 0.1).unwrap();
        let prob = build_dual_sdp(&y, &params).unwrap();
        let lay = DualLayout { pilots: p };
        let mut x = vec![0.0; lay.num_vars()];
        for i in 0..p {
            x[lay.diag(i)] = 1.0 / p as f64;
        }
        let mut ax = vec![0.0; prob.num_rows()];
        prob.a.mul_vec(&x, &mut ax);
        let s: Vec<f64> = prob.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let mut off = 0;
        for cone in &prob.cones.blocks {
            let d = cone.dim();
            assert!(cone.contains(&s[off..off + d], 1e-12).unwrap(), "{cone:?}");
            off += d;
        }
    }

    // For y = alpha a(f) and a large lambda the optimal value is |alpha|.
    #[test]
    fn single_atom_objective_bounded_by_gain() {
        let grid = PilotGrid::new(16, 16, 1.0).unwrap();
        let alpha = C64::new(0.6, 0.8);
        let atom = crate::model::atom(0.3, 0.0, &grid).unwrap();
        let y: Vec<C64> = atom.iter().map(|a| a * alpha).collect();
        let params = PanmParams::new(2.0, 1e-6).unwrap();
        let sol = solve_panm(&y, &params).unwrap();
        assert!(sol.result.converged(), "{:?}", sol.result.status);
        assert!(
            (sol.objective - 1.0).abs() < 1e-3,
            "objective {}",
            sol.objective
        );
        assert!(sol.trace_residual() < 1e-5);
        assert!(sol.min_block_eigenvalue().unwrap() > -1e-5);
    }

    // A lone spike costs lambda |beta| as an impulse and |beta| as atoms
    // (the atomic norm of a unit vector is 1), so the optimum is the smaller.
    #[test]
    fn single_impulse_optimum() {
        let p = 12;
        let beta = C64::new(-1.2, 0.5);
        let mut y = vec![C64::new(0.0, 0.0); p];
        y[4] = beta;
        for lambda in [0.3, 2.0] {
            let params = PanmParams::new(lambda, 0.0).unwrap();
            let sol = solve_panm(&y, &params).unwrap();
            assert!(sol.result.converged());
            let want = beta.norm() * lambda.min(1.0);
            assert!(
                (sol.objective - want).abs() < 1e-4 * (1.0 + want),
                "lambda {lambda}: {} vs {want}",
                sol.objective
            );
        }
    }

    #[test]
    fn surrogate_and_objective() {
        let a = [C64::new(3.0, 4.0)];
        let b = [C64::new(0.0, 2.0), C64::new(1.0, 0.0)];
        assert!((primal_surrogate(&a, &b, 0.5) - 6.5).abs() < 1e-15);
        let y = [C64::new(1.0, 2.0), C64::new(0.0, -1.0)];
        let q = [C64::new(0.5, 0.5), C64::new(1.0, 1.0)];
        let want = 0.5 - 0.1 * 2.5f64.sqrt();
        assert!((dual_objective(&y, &q, 0.1) - want).abs() < 1e-15);
    }
}
