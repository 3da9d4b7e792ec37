//! Cone blocks, Euclidean projections, and the real embedding of complex
//! Hermitian matrices.
//!
//! PSD blocks are stored as `svec`: the lower triangle, column by column,
//! with off-diagonal entries scaled by `sqrt(2)` so that the vector inner
//! product equals the Frobenius inner product of the matrices.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `{0}^d`: equality rows.
    Zero(usize),
    NonNeg(usize),
    /// `{(t, x) : |x| <= t}` of total dimension `d`.
    SecondOrder(usize),
    /// Symmetric PSD matrices of the given side, `svec` layout.
    Psd(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::NonNeg(d) | Cone::SecondOrder(d) => d,
            Cone::Psd(n) => n * (n + 1) / 2,
        }
    }

    fn side(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::NonNeg(d) | Cone::SecondOrder(d) => d,
            Cone::Psd(n) => n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Cone::Zero(_) => "zero",
            Cone::NonNeg(_) => "nonneg",
            Cone::SecondOrder(_) => "soc",
            Cone::Psd(_) => "psd",
        }
    }

    /// Projects `v` onto the cone in place.
    pub fn project(&self, v: &mut [f64]) -> Result<()> {
        debug_assert_eq!(v.len(), self.dim());
        match *self {
            Cone::Zero(_) => v.fill(0.0),
            Cone::NonNeg(_) => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            Cone::SecondOrder(_) => project_soc_in_place(v),
            Cone::Psd(n) => super::eigen::project_psd_svec(v, n)?,
        }
        Ok(())
    }

    /// Projects onto the dual cone. All blocks but `Zero` are self-dual.
    pub fn project_dual(&self, v: &mut [f64]) -> Result<()> {
        match self {
            Cone::Zero(_) => Ok(()),
            _ => self.project(v),
        }
    }

    /// Euclidean distance from `v` to the cone.
    pub fn distance(&self, v: &[f64]) -> Result<f64> {
        let mut p = v.to_vec();
        self.project(&mut p)?;
        Ok(dist(v, &p))
    }

    /// Membership up to `tol` in Euclidean distance.
    pub fn contains(&self, v: &[f64], tol: f64) -> Result<bool> {
        Ok(self.distance(v)? <= tol)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.side() == 0 {
            return Err(Error::Dimension(format!(
                "{} cone of dimension 0",
                self.name()
            )));
        }
        Ok(())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Ordered product of cone blocks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConeSpec {
    pub blocks: Vec<Cone>,
}

impl ConeSpec {
    pub fn new(blocks: Vec<Cone>) -> Self {
        Self { blocks }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Cone::dim).sum()
    }

    /// `(offset, cone)` for every block.
    pub fn offsets(&self) -> impl Iterator<Item = (usize, Cone)> + '_ {
        self.blocks.iter().scan(0, |off, c| {
            let start = *off;
            *off += c.dim();
            Some((start, *c))
        })
    }

    pub fn project(&self, v: &mut [f64]) -> Result<()> {
        for (off, c) in self.offsets() {
            c.project(&mut v[off..off + c.dim()])?;
        }
        Ok(())
    }

    pub fn project_dual(&self, v: &mut [f64]) -> Result<()> {
        for (off, c) in self.offsets() {
            c.project_dual(&mut v[off..off + c.dim()])?;
        }
        Ok(())
    }
}

/// `max(v, 0)` elementwise.
pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

/// Projection onto `{(t, x) : |x| <= t}`, `v = (t; x)`.
pub fn project_soc(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_soc_in_place(&mut out);
    out
}

fn project_soc_in_place(v: &mut [f64]) {
    let Some((t, x)) = v.split_first_mut() else {
        return;
    };
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nx <= *t {
        return;
    }
    if nx <= -*t {
        *t = 0.0;
        x.fill(0.0);
        return;
    }
    let a = 0.5 * (*t + nx);
    *t = a;
    let s = a / nx;
    x.iter_mut().for_each(|xi| *xi *= s);
}

/// Nearest PSD matrix in Frobenius norm: clip negative eigenvalues.
///
/// The input is symmetrized first. Only the smaller of the positive and
/// negative spectral parts is reassembled.
pub fn project_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!(
            "{}x{} matrix is not square",
            n,
            m.ncols()
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let (vals, vecs) = super::eigen::sym_eigen(&sym)?;
    let neg: Vec<usize> = (0..n).filter(|&i| vals[i] < 0.0).collect();
    if neg.is_empty() {
        return Ok(sym);
    }
    if neg.len() == n {
        return Ok(DMatrix::zeros(n, n));
    }
    let pos: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.0).collect();
    let (idx, sign, base) = if neg.len() <= pos.len() {
        (neg, -1.0, Some(sym))
    } else {
        (pos, 1.0, None)
    };
    let k = idx.len();
    let mut u = DMatrix::zeros(n, k);
    let mut us = DMatrix::zeros(n, k);
    for (c, &i) in idx.iter().enumerate() {
        u.set_column(c, &vecs.column(i));
        us.set_column(c, &(vecs.column(i) * vals[i]));
    }
    let mut out = base.unwrap_or_else(|| DMatrix::zeros(n, n));
    out.gemm(sign, &us, &u.transpose(), 1.0);
    Ok((&out + out.transpose()) * 0.5)
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`.
///
/// Eigenvalues of the result are those of `H`, each with doubled
/// multiplicity, so the embedding is PSD exactly when `H` is.
pub fn hermitian_embed(h: &DMatrix<C64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::Dimension(format!(
            "{}x{} matrix is not square",
            n,
            h.ncols()
        )));
    }
    let scale = h.iter().map(|v| v.norm()).fold(1.0, f64::max);
    for i in 0..n {
        for j in 0..=i {
            if (h[(i, j)] - h[(j, i)].conj()).norm() > 1e-10 * scale {
                return Err(Error::Domain(format!(
                    "matrix is not Hermitian at ({i}, {j})"
                )));
            }
        }
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = h[(i, j)];
            out[(i, j)] = v.re;
            out[(i + n, j + n)] = v.re;
            out[(i + n, j)] = v.im;
            out[(i, j + n)] = -v.im;
        }
    }
    Ok(out)
}

/// `svec` position of entry `(i, j)`, `i >= j`, for side `n`.
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < n);
    // the first j columns hold n + (n-1) + ... + (n-j+1) entries
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

/// `svec` of a symmetric matrix (lower triangle is read).
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; n * (n + 1) / 2];
    svec_into(m, &mut out);
    out
}

pub(crate) fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    let mut k = 0;
    for j in 0..n {
        out[k] = m[(j, j)];
        k += 1;
        for i in j + 1..n {
            out[k] = m[(i, j)] * SQRT_2;
            k += 1;
        }
    }
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let x = v[k] / SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
