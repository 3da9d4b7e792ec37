use std::time::Instant;

use super::anderson::Anderson;
use super::cones::{norm2, Cone};
use super::ldl::LdlFactor;
use super::sparse::CscMatrix;
use super::{ConicProblem, SolverResult, Status};
use crate::error::{Error, Result};

/// Solver parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Relative tolerance applied to the primal residual, dual residual and gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Over-relaxation in `(0, 2)`.
    pub alpha: f64,
    /// Initial constraint penalty.
    pub rho: f64,
    /// Proximal weight on `x`.
    pub sigma: f64,
    /// Penalty multiplier for equality rows.
    pub eq_rho_scale: f64,
    pub scaling_iters: usize,
    pub adaptive_rho: bool,
    /// Iterations between residual checks.
    pub check_every: usize,
    /// Iterations between penalty updates.
    pub adapt_every: usize,
    /// Tolerance for the infeasibility heuristics.
    pub infeasible_tol: f64,
    /// Anderson acceleration memory; 0 turns it off.
    pub anderson_memory: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 50_000,
            alpha: 1.5,
            rho: 0.1,
            sigma: 1e-6,
            eq_rho_scale: 1e3,
            scaling_iters: 25,
            adaptive_rho: true,
            check_every: 25,
            adapt_every: 100,
            infeasible_tol: 1e-7,
            anderson_memory: 10,
        }
    }
}

impl Settings {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ruiz equilibration of `A`, keeping row scales constant inside SOC and PSD
/// blocks so that the scaled cone equals the original one.
struct Scaling {
    /// Column scale, `x = D xs`.
    d: Vec<f64>,
    /// Row scale, `ss = E s`.
    e: Vec<f64>,
    /// Objective scale.
    c: f64,
}

fn equilibrate(a: &mut CscMatrix, p: &ConicProblem, iters: usize) -> Scaling {
    let (m, n) = (a.nrows, a.ncols);
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let clamp = |v: f64| {
        if v < SCALE_MIN {
            1.0
        } else {
            1.0 / v.min(SCALE_MAX).sqrt()
        }
    };
    for _ in 0..iters {
        let dc: Vec<f64> = a.col_norms_inf().into_iter().map(clamp).collect();
        let mut er: Vec<f64> = a.row_norms_inf().into_iter().map(clamp).collect();
        for (off, cone) in p.cones.offsets() {
            if matches!(cone, Cone::SecondOrder(_) | Cone::Psd(_)) {
                let blk = &mut er[off..off + cone.dim()];
                let mean = blk.iter().sum::<f64>() / blk.len() as f64;
                blk.fill(mean);
            }
        }
        a.scale(&er, &dc);
        d.iter_mut().zip(&dc).for_each(|(x, y)| *x *= y);
        e.iter_mut().zip(&er).for_each(|(x, y)| *x *= y);
    }
    let cmax = inf_norm(&p.c.iter().zip(&d).map(|(c, d)| c * d).collect::<Vec<_>>());
    let c = 1.0 / cmax.clamp(1.0, SCALE_MAX);
    Scaling { d, e, c }
}

/// Upper triangle of `[[sigma I, A'], [A, -diag(1/rho)]]`.
fn kkt_upper(a: &CscMatrix, sigma: f64, rho: &[f64]) -> Result<CscMatrix> {
    let (m, n) = (a.nrows, a.ncols);
    let mut trip = Vec::with_capacity(a.nnz() + n + m);
    for j in 0..n {
        trip.push((j, j, sigma));
    }
    for (r, c, v) in a.triplets() {
        trip.push((c, n + r, v));
    }
    for (i, r) in rho.iter().enumerate() {
        trip.push((n + i, n + i, -1.0 / r));
    }
    CscMatrix::from_triplets(n + m, n + m, &trip)
}

struct Unscaled {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    pobj: f64,
    dobj: f64,
    pres: f64,
    dres: f64,
    gap: f64,
}

fn unscale(p: &ConicProblem, sc: &Scaling, x: &[f64], s: &[f64], y: &[f64]) -> Unscaled {
    let x: Vec<f64> = x.iter().zip(&sc.d).map(|(v, d)| v * d).collect();
    let s: Vec<f64> = s.iter().zip(&sc.e).map(|(v, e)| v / e).collect();
    let z: Vec<f64> = y.iter().zip(&sc.e).map(|(v, e)| -v * e / sc.c).collect();
    let mut ax = vec![0.0; p.num_rows()];
    p.a.mul_vec(&x, &mut ax);
    let rp: Vec<f64> = ax
        .iter()
        .zip(&s)
        .zip(&p.b)
        .map(|((a, s), b)| a + s - b)
        .collect();
    let mut atz = vec![0.0; p.num_vars()];
    p.a.tr_mul_vec(&z, &mut atz);
    let rd: Vec<f64> = atz.iter().zip(&p.c).map(|(a, c)| a + c).collect();
    let pobj = dot(&p.c, &x);
    let dobj = -dot(&p.b, &z);
    Unscaled {
        pres: inf_norm(&rp) / (1.0 + inf_norm(&p.b)),
        dres: inf_norm(&rd) / (1.0 + inf_norm(&p.c)),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
        x,
        s,
        z,
        pobj,
        dobj,
    }
}

/// Solves `p` by over-relaxed ADMM on the equilibrated problem.
///
/// Each iteration solves the quasi-definite system
/// `[[sigma I, A'], [A, -1/rho]] [x; nu] = [sigma x - c; b - s + y/rho]`
/// with a cached `LDL'` factor, then projects onto the cone. The factor is
/// rebuilt only when the adaptive penalty moves by more than a factor of 5.
pub fn solve(p: &ConicProblem, settings: &Settings) -> Result<SolverResult> {
    p.validate()?;
    if !(settings.alpha > 0.0 && settings.alpha < 2.0) {
        return Err(Error::Domain(format!(
            "relaxation {} outside (0, 2)",
            settings.alpha
        )));
    }
    let (m, n) = (p.num_rows(), p.num_vars());
    let start = Instant::now();

    let mut a = p.a.clone();
    let sc = equilibrate(&mut a, p, settings.scaling_iters);
    let c: Vec<f64> = p.c.iter().zip(&sc.d).map(|(c, d)| c * d * sc.c).collect();
    let b: Vec<f64> = p.b.iter().zip(&sc.e).map(|(b, e)| b * e).collect();

    let mut eq = vec![false; m];
    for (off, cone) in p.cones.offsets() {
        if let Cone::Zero(d) = cone {
            eq[off..off + d].fill(true);
        }
    }
    let rho_for = |base: f64| -> Vec<f64> {
        eq.iter()
            .map(|&e| {
                if e {
                    base * settings.eq_rho_scale
                } else {
                    base
                }
            })
            .collect()
    };
    let mut rho_base = settings.rho;
    let mut rho = rho_for(rho_base);
    let mut factor = LdlFactor::new(&kkt_upper(&a, settings.sigma, &rho)?)?;
    let mut factorizations = 1;

    // The iteration state is `(x, v)` with `v = s + y / rho`; the slack and
    // the multiplier are the two parts of the cone split of `v`.
    let mut x = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut s = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut rhs = vec![0.0; n + m];
    let mut x_prev = x.clone();
    let mut y_prev = y.clone();
    let mut ax = vec![0.0; m];
    let mut aty = vec![0.0; n];

    let alpha = settings.alpha;
    let mut status = Status::MaxIter;
    let mut iterations = settings.max_iter;
    let mut last = None;

    let accel = settings.anderson_memory > 0;
    let mut aa = Anderson::new(settings.anderson_memory);
    let mut w_in = vec![0.0; n + m];
    let mut w_out = vec![0.0; n + m];
    // Plain iterate and its fixed-point residual, kept while an
    // extrapolated point is on trial.
    let mut fallback: Option<(Vec<f64>, f64)> = None;

    for it in 0..=settings.max_iter {
        s.copy_from_slice(&v);
        p.cones.project(&mut s)?;
        for i in 0..m {
            y[i] = rho[i] * (v[i] - s[i]);
        }

        let check = it > 0 && (it % settings.check_every == 0 || it == settings.max_iter);
        if check {
            if x.iter().chain(&y).any(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    iteration: it,
                    reason: "non-finite iterate".into(),
                });
            }
            let u = unscale(p, &sc, &x, &s, &y);
            let residuals_met = u.pres <= settings.tol && u.dres <= settings.tol;
            let done = residuals_met && u.gap <= settings.tol;
            last = Some(u);
            if done {
                status = Status::Converged;
                iterations = it;
                break;
            }
            if infeasibility_suspected(
                &a,
                p,
                &b,
                &c,
                &x,
                &x_prev,
                &y,
                &y_prev,
                settings.infeasible_tol,
            )? {
                status = Status::InfeasibleSuspected;
                iterations = it;
                break;
            }
            x_prev.copy_from_slice(&x);
            y_prev.copy_from_slice(&y);

            // Once both residuals meet the tolerance only the gap is left,
            // and rebalancing them tends to stall it.
            if settings.adaptive_rho && !residuals_met && it % settings.adapt_every == 0 {
                a.mul_vec(&x, &mut ax);
                a.tr_mul_vec(&y, &mut aty);
                let rp: Vec<f64> = ax
                    .iter()
                    .zip(&s)
                    .zip(&b)
                    .map(|((a, s), b)| a + s - b)
                    .collect();
                let rd: Vec<f64> = c.iter().zip(&aty).map(|(c, a)| c - a).collect();
                let pn =
                    inf_norm(&rp) / inf_norm(&ax).max(inf_norm(&s)).max(inf_norm(&b)).max(1e-10);
                let dn = inf_norm(&rd) / inf_norm(&c).max(inf_norm(&aty)).max(1e-10);
                let ratio = (pn / dn.max(1e-12)).sqrt().clamp(1e-2, 1e2);
                if !(0.2..=5.0).contains(&ratio) {
                    rho_base = (rho_base * ratio).clamp(RHO_MIN, RHO_MAX);
                    rho = rho_for(rho_base);
                    factor = LdlFactor::new(&kkt_upper(&a, settings.sigma, &rho)?)?;
                    factorizations += 1;
                    for i in 0..m {
                        v[i] = s[i] + y[i] / rho[i];
                    }
                    aa.reset();
                    fallback = None;
                }
            }
        }
        if it == settings.max_iter {
            break;
        }

        if accel {
            w_in[..n].copy_from_slice(&x);
            w_in[n..].copy_from_slice(&v);
        }
        for j in 0..n {
            rhs[j] = settings.sigma * x[j] - c[j];
        }
        for i in 0..m {
            rhs[n + i] = b[i] - s[i] + y[i] / rho[i];
        }
        factor.solve(&mut rhs);
        for j in 0..n {
            x[j] = alpha * rhs[j] + (1.0 - alpha) * x[j];
        }
        for i in 0..m {
            let s_tilde = s[i] - (y[i] + rhs[n + i]) / rho[i];
            v[i] = alpha * s_tilde + (1.0 - alpha) * s[i] + y[i] / rho[i];
        }

        if accel {
            w_out[..n].copy_from_slice(&x);
            w_out[n..].copy_from_slice(&v);
            let g: Vec<f64> = w_in.iter().zip(&w_out).map(|(a, b)| a - b).collect();
            let gn = norm2(&g);
            if let Some((plain, before)) = fallback.take() {
                if gn > before {
                    x.copy_from_slice(&plain[..n]);
                    v.copy_from_slice(&plain[n..]);
                    aa.reset();
                    continue;
                }
            }
            if let Some(next) = aa.push(&w_out, &g) {
                fallback = Some((w_out.clone(), gn));
                x.copy_from_slice(&next[..n]);
                v.copy_from_slice(&next[n..]);
            }
        }
    }

    let u = last.unwrap_or_else(|| unscale(p, &sc, &x, &s, &y));
    Ok(SolverResult {
        x: u.x,
        s: u.s,
        z: u.z,
        objective: u.pobj,
        dual_objective: u.dobj,
        primal_residual: u.pres,
        dual_residual: u.dres,
        gap: u.gap,
        iterations,
        status,
        solve_time: start.elapsed().as_secs_f64(),
        factorizations,
    })
}

/// Certificate heuristics on successive differences, in scaled variables.
///
/// Primal infeasibility: `w = y_prev - y` approaches a ray with `A'w = 0`,
/// `w` in the dual cone and `b'w < 0`. Dual infeasibility: `dx` with
/// `-A dx` in the cone and `c'dx < 0`.
#[allow(clippy::too_many_arguments)]
fn infeasibility_suspected(
    a: &CscMatrix,
    p: &ConicProblem,
    b: &[f64],
    c: &[f64],
    x: &[f64],
    x_prev: &[f64],
    y: &[f64],
    y_prev: &[f64],
    tol: f64,
) -> Result<bool> {
    let w: Vec<f64> = y_prev.iter().zip(y).map(|(a, b)| a - b).collect();
    let wn = inf_norm(&w);
    if wn > tol {
        let bw = dot(b, &w);
        if bw < -tol * wn {
            let mut atw = vec![0.0; a.ncols];
            a.tr_mul_vec(&w, &mut atw);
            let mut proj = w.clone();
            p.cones.project_dual(&mut proj)?;
            let far = norm2(&proj.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>());
            if inf_norm(&atw) <= tol * bw.abs() && far <= tol * bw.abs() {
                return Ok(true);
            }
        }
    }
    let dx: Vec<f64> = x.iter().zip(x_prev).map(|(a, b)| a - b).collect();
    let dxn = inf_norm(&dx);
    if dxn > tol {
        let cdx = dot(c, &dx);
        if cdx < -tol * dxn {
            let mut adx = vec![0.0; a.nrows];
            a.mul_vec(&dx, &mut adx);
            let neg: Vec<f64> = adx.iter().map(|v| -v).collect();
            let mut proj = neg.clone();
            p.cones.project(&mut proj)?;
            let far = norm2(
                &proj
                    .iter()
                    .zip(&neg)
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            );
            if far <= tol * cdx.abs() {
                return Ok(true);
            }
        }
    }
    Ok(false)
}
