//! Type-II Anderson acceleration of a fixed-point map `w -> f(w)`.

use nalgebra::{DMatrix, DVector};

pub(crate) struct Anderson {
    mem: usize,
    /// Differences of successive map outputs and residuals `g = w - f(w)`.
    df: Vec<Vec<f64>>,
    dg: Vec<Vec<f64>>,
    last: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    pub(crate) fn new(mem: usize) -> Self {
        Self {
            mem,
            df: Vec::new(),
            dg: Vec::new(),
            last: None,
        }
    }

    pub(crate) fn reset(&mut self) {
        self.df.clear();
        self.dg.clear();
        self.last = None;
    }

    /// Records `f = f(w)` with residual `g` and returns the extrapolated
    /// next point, or `None` while the memory is empty or the small least
    /// squares problem is degenerate.
    pub(crate) fn push(&mut self, f: &[f64], g: &[f64]) -> Option<Vec<f64>> {
        if let Some((f0, g0)) = self.last.take() {
            if self.df.len() == self.mem {
                self.df.remove(0);
                self.dg.remove(0);
            }
            self.df
                .push(f.iter().zip(&f0).map(|(a, b)| a - b).collect());
            self.dg
                .push(g.iter().zip(&g0).map(|(a, b)| a - b).collect());
        }
        self.last = Some((f.to_vec(), g.to_vec()));
        let k = self.dg.len();
        if k == 0 {
            return None;
        }
        let mut gram = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        for i in 0..k {
            rhs[i] = dot(&self.dg[i], g);
            for j in 0..=i {
                let v = dot(&self.dg[i], &self.dg[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let reg = 1e-10 * gram.trace().max(f64::MIN_POSITIVE);
        for i in 0..k {
            gram[(i, i)] += reg;
        }
        let gamma = gram.cholesky()?.solve(&rhs);
        if gamma.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut out = f.to_vec();
        for (col, gi) in self.df.iter().zip(gamma.iter()) {
            out.iter_mut().zip(col).for_each(|(o, d)| *o -= gi * d);
        }
        Some(out)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
