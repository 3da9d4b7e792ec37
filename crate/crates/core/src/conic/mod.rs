//! A first-order conic solver for
//!
//! ```text
//! minimize c'x  subject to  A x + s = b,  s in K
//! ```
//!
//! where `K` is a product of zero, nonnegative, second-order and PSD cones.
//! The iteration is an over-relaxed ADMM that alternates one quasi-definite
//! linear solve (factored once per penalty value) with cone projections,
//! optionally sped up by safeguarded Anderson acceleration.

mod admm;
mod anderson;
mod cones;
mod eigen;
mod ldl;
mod sparse;
mod triplet;

pub use admm::{solve, Settings};
pub use cones::{
    hermitian_embed, project_nonneg, project_psd, project_soc, smat, svec, svec_index, Cone,
    ConeSpec,
};
pub use ldl::LdlFactor;
pub use sparse::CscMatrix;
pub use triplet::{from_text as problem_from_text, to_text as problem_to_text};

use crate::error::{Error, Result};

/// A conic program in standard form.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub cones: ConeSpec,
}

impl ConicProblem {
    pub fn new(c: Vec<f64>, a: CscMatrix, b: Vec<f64>, cones: ConeSpec) -> Result<Self> {
        let p = Self { c, a, b, cones };
        p.validate()?;
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        for cone in &self.cones.blocks {
            cone.validate()?;
        }
        let m = self.cones.dim();
        if self.a.nrows != m || self.b.len() != m {
            return Err(Error::Dimension(format!(
                "A has {} rows and b has {} entries but the cones span {m}",
                self.a.nrows,
                self.b.len()
            )));
        }
        if self.a.ncols != self.c.len() {
            return Err(Error::Dimension(format!(
                "A has {} columns but c has {} entries",
                self.a.ncols,
                self.c.len()
            )));
        }
        if self
            .c
            .iter()
            .chain(&self.b)
            .chain(&self.a.nzval)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Domain(
                "problem data contains non-finite values".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIter,
    InfeasibleSuspected,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::InfeasibleSuspected => "infeasible_suspected",
        })
    }
}

/// Final iterate and diagnostics. Residuals are relative:
///
/// * primal `|A x + s - b|_inf / (1 + |b|_inf)`
/// * dual `|c + A'z|_inf / (1 + |c|_inf)`
/// * gap `|c'x + b'z| / (1 + |c'x|)`
#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    /// Dual multipliers, in the dual cone.
    pub z: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: Status,
    /// Wall-clock seconds spent in the iteration loop.
    pub solve_time: f64,
    pub factorizations: usize,
}

impl SolverResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn max_residual(&self) -> f64 {
        self.primal_residual.max(self.dual_residual).max(self.gap)
    }
}
