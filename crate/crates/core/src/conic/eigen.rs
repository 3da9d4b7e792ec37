//! Symmetric eigendecomposition backed by `faer`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues and column eigenvectors of a real symmetric matrix (the
/// lower triangle is read).
pub(crate) fn sym_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let fm = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = fm
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Eigen(n))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    Ok((
        DVector::from_fn(n, |i, _| s[i]),
        DMatrix::from_fn(n, n, |i, j| u[(i, j)]),
    ))
}

/// Projects an `svec`-stored symmetric block onto the PSD cone in place.
pub(crate) fn project_psd_svec(v: &mut [f64], n: usize) -> Result<()> {
    let mut m = Mat::<f64>::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            m[(i, j)] = v[k] * FRAC_1_SQRT_2;
            k += 1;
        }
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Eigen(n))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let neg = (0..n).filter(|&i| s[i] < 0.0).count();
    if neg == 0 {
        return Ok(());
    }
    if neg == n {
        v.fill(0.0);
        return Ok(());
    }
    let pos = (0..n).filter(|&i| s[i] > 0.0).count();
    // Reassemble the smaller spectral part: either X - U_- S_- U_-^T or U_+ S_+ U_+^T.
    let (keep_neg, k_cols) = if neg <= pos {
        (true, neg)
    } else {
        (false, pos)
    };
    let idx: Vec<usize> = (0..n)
        .filter(|&i| if keep_neg { s[i] < 0.0 } else { s[i] > 0.0 })
        .collect();
    debug_assert_eq!(idx.len(), k_cols);
    let uk = Mat::<f64>::from_fn(n, k_cols, |i, c| u[(i, idx[c])]);
    let us = Mat::<f64>::from_fn(n, k_cols, |i, c| u[(i, idx[c])] * s[idx[c]]);
    let part = &us * uk.transpose();
    let mut k = 0;
    for j in 0..n {
        v[k] = if keep_neg {
            v[k] - part[(j, j)]
        } else {
            part[(j, j)]
        };
        k += 1;
        for i in j + 1..n {
            let pij = 0.5 * (part[(i, j)] + part[(j, i)]) * SQRT_2;
            v[k] = if keep_neg { v[k] - pij } else { pij };
            k += 1;
        }
    }
    Ok(())
}
