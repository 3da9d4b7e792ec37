//! Sparse `L D L^T` factorization of symmetric quasi-definite matrices.
//!
//! Up-looking factorization driven by the elimination tree, applied after a
//! static fill-reducing permutation (ascending node degree). Quasi-definite
//! matrices admit this factorization for every symmetric permutation, so no
//! numerical pivoting is needed.

use super::sparse::CscMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    dinv: Vec<f64>,
    work: Vec<f64>,
}

/// Orders nodes by ascending degree in the sparsity graph of `upper`.
fn degree_order(upper: &CscMatrix) -> Vec<usize> {
    let n = upper.ncols;
    let mut deg = vec![0usize; n];
    for (r, c, _) in upper.triplets() {
        if r != c {
            deg[r] += 1;
            deg[c] += 1;
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by_key(|&i| deg[i]);
    perm
}

/// Symmetric permutation `P A P^T` of an upper-triangular CSC matrix,
/// returned upper triangular again. `perm[new] = old`.
fn permute_upper(upper: &CscMatrix, perm: &[usize]) -> Result<CscMatrix> {
    let n = upper.ncols;
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let trip: Vec<(usize, usize, f64)> = upper
        .triplets()
        .map(|(r, c, v)| {
            let (a, b) = (inv[r], inv[c]);
            (a.min(b), a.max(b), v)
        })
        .collect();
    CscMatrix::from_triplets(n, n, &trip)
}

impl LdlFactor {
    /// Factors the symmetric matrix whose upper triangle (with diagonal) is
    /// given in `upper`.
    pub fn new(upper: &CscMatrix) -> Result<Self> {
        let n = upper.ncols;
        if upper.nrows != n {
            return Err(Error::Dimension("LDL input must be square".into()));
        }
        let perm = degree_order(upper);
        let a = permute_upper(upper, &perm)?;

        // elimination tree and column counts
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut mark = vec![NONE; n];
        for j in 0..n {
            mark[j] = j;
            for p in a.colptr[j]..a.colptr[j + 1] {
                let mut i = a.rowval[p];
                if i > j {
                    return Err(Error::Factorization("input is not upper triangular".into()));
                }
                while mark[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    mark[i] = j;
                    i = etree[i];
                }
            }
        }

        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];
        let mut li = vec![0usize; total];
        let mut lx = vec![0.0; total];
        let mut d = vec![0.0; n];
        let mut dinv = vec![0.0; n];

        let mut y_vals = vec![0.0; n];
        let mut y_mark = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_in_col = lp[..n].to_vec();

        for k in 0..n {
            let mut nnz_y = 0;
            for p in a.colptr[k]..a.colptr[k + 1] {
                let b = a.rowval[p];
                if b == k {
                    d[k] = a.nzval[p];
                    continue;
                }
                y_vals[b] = a.nzval[p];
                if !y_mark[b] {
                    y_mark[b] = true;
                    elim[0] = b;
                    let mut ne = 1;
                    let mut nxt = etree[b];
                    while nxt != NONE && nxt < k {
                        if y_mark[nxt] {
                            break;
                        }
                        y_mark[nxt] = true;
                        elim[ne] = nxt;
                        ne += 1;
                        nxt = etree[nxt];
                    }
                    while ne > 0 {
                        ne -= 1;
                        y_idx[nnz_y] = elim[ne];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let tmp = next_in_col[c];
                let yc = y_vals[c];
                for j in lp[c]..tmp {
                    y_vals[li[j]] -= lx[j] * yc;
                }
                li[tmp] = k;
                lx[tmp] = yc * dinv[c];
                d[k] -= yc * lx[tmp];
                next_in_col[c] += 1;
                y_vals[c] = 0.0;
                y_mark[c] = false;
            }
            if d[k] == 0.0 || !d[k].is_finite() {
                return Err(Error::Factorization(format!("zero pivot at position {k}")));
            }
            dinv[k] = 1.0 / d[k];
        }

        Ok(Self {
            n,
            perm,
            lp,
            li,
            lx,
            dinv,
            work: vec![0.0; n],
        })
    }

    pub fn nnz(&self) -> usize {
        self.lx.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve(&mut self, b: &mut [f64]) {
        let x = &mut self.work;
        for (new, &old) in self.perm.iter().enumerate() {
            x[new] = b[old];
        }
        for i in 0..self.n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..self.n {
            x[i] *= self.dinv[i];
        }
        for i in (0..self.n).rev() {
            let mut acc = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = x[new];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(upper: &CscMatrix, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (r, c, v) in upper.triplets() {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
        y
    }

    #[test]
    fn solves_quasi_definite_kkt() {
        // [[2 0 1 1], [0 3 0 2], [1 0 -1 0], [1 2 0 -0.5]]
        let upper = CscMatrix::from_triplets(
            4,
            4,
            &[
                (0, 0, 2.0),
                (1, 1, 3.0),
                (0, 2, 1.0),
                (2, 2, -1.0),
                (0, 3, 1.0),
                (1, 3, 2.0),
                (3, 3, -0.5),
            ],
        )
        .unwrap();
        let mut f = LdlFactor::new(&upper).unwrap();
        let b = [1.0, -2.0, 0.5, 3.0];
        let mut x = b;
        f.solve(&mut x);
        let r = dense_mul(&upper, &x);
        for (ri, bi) in r.iter().zip(b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_lower_entries_and_zero_pivots() {
        let lower =
            CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(LdlFactor::new(&lower).is_err());
        let singular =
            CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(LdlFactor::new(&singular).is_err());
    }
}
