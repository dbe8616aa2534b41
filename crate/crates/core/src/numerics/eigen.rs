//! Biorthonormal eigensystems and the principal matrix logarithm.

use std::cmp::Ordering;
use std::f64::consts::PI;

use super::dense::{self, Lu};
use super::{CMatrix, C64};
use crate::error::{Error, Result};

fn cmp_desc(x: C64, y: C64) -> Ordering {
    y.re.partial_cmp(&x.re).unwrap_or(Ordering::Equal).then(y.im.partial_cmp(&x.im).unwrap_or(Ordering::Equal))
}

/// Eigenvectors beyond this condition number are treated as defective.
pub const DEFECTIVE_CONDITION: f64 = 1e12;

/// `M = Σ_j λ_j r_j l_jᵀ` with `l_j · r_k = δ_jk` (plain products).
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<C64>,
    /// Right eigenvectors as columns.
    pub right: CMatrix,
    /// Left eigenvectors as rows.
    pub left: CMatrix,
    /// Condition number of the right eigenvector matrix (1-norm).
    pub condition: f64,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn right_vec(&self, j: usize) -> Vec<C64> {
        dense::col_to_vec(&self.right, j)
    }

    pub fn left_vec(&self, j: usize) -> Vec<C64> {
        (0..self.left.ncols()).map(|k| self.left[(j, k)]).collect()
    }

    /// `Σ_j f(λ_j) r_j l_jᵀ`.
    pub fn map(&self, f: impl Fn(C64) -> C64) -> CMatrix {
        let n = self.dim();
        let fv: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        let scaled = CMatrix::from_fn(n, n, |i, j| self.right[(i, j)] * fv[j]);
        &scaled * &self.left
    }

    /// Reorder by decreasing real part, then decreasing imaginary part.
    pub fn sorted(self) -> Self {
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| cmp_desc(self.values[a], self.values[b]));
        Self {
            values: order.iter().map(|&k| self.values[k]).collect(),
            right: CMatrix::from_fn(n, n, |i, j| self.right[(i, order[j])]),
            left: CMatrix::from_fn(n, n, |i, j| self.left[(order[i], j)]),
            condition: self.condition,
        }
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|l| l)
    }
}

/// Eigen-decomposition with left vectors normalized against the right ones.
/// Eigenvalues are sorted by decreasing real part, then decreasing imaginary part.
pub fn eig_biorthonormal(m: &CMatrix) -> Result<EigenSystem> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
    }
    if !dense::is_finite(m) {
        return Err(Error::NonFinite { t: f64::NAN });
    }
    let evd = m.eigen().map_err(|_| Error::EigenFailure)?;
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<C64> = (0..n).map(|i| s[i]).collect();
    order.sort_by(|&a, &b| cmp_desc(vals[a], vals[b]));
    let values: Vec<C64> = order.iter().map(|&k| vals[k]).collect();
    let mut right = CMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    for j in 0..n {
        let nrm = (0..n).map(|i| right[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            for i in 0..n {
                right[(i, j)] /= nrm;
            }
        }
    }
    let lu = Lu::new(&right)?;
    let condition = if lu.rcond > 0.0 { 1.0 / lu.rcond } else { f64::INFINITY };
    if condition > DEFECTIVE_CONDITION {
        return Err(Error::NearDefective { condition });
    }
    let left = lu.inverse();
    Ok(EigenSystem { values, right, left, condition })
}

/// Eigenvalues only, sorted like [`eig_biorthonormal`].
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    let mut v = m.eigenvalues().map_err(|_| Error::EigenFailure)?;
    v.sort_by(|x, y| cmp_desc(*x, *y));
    Ok(v)
}

/// Floquet generator `B = log(M) / T` on the principal branch, with
/// `Im b_j` folded into (-Ω/2, Ω/2].
pub fn matrix_log_over_period(monodromy: &CMatrix, period: f64) -> Result<(CMatrix, EigenSystem)> {
    let es = eig_biorthonormal(monodromy)?;
    let omega = 2.0 * PI / period;
    let mut logs = Vec::with_capacity(es.dim());
    for &mu in &es.values {
        let modulus = mu.norm();
        if modulus >= 1.0 {
            return Err(Error::NonDecayingMode { modulus });
        }
        if modulus < f64::MIN_POSITIVE {
            return Err(Error::MonodromyUnderflow);
        }
        let mut b = mu.ln() / period;
        if b.im <= -omega / 2.0 * (1.0 - 1e-12) {
            b.im += omega;
        }
        logs.push(b);
    }
    let n = es.dim();
    let scaled = CMatrix::from_fn(n, n, |i, j| es.right[(i, j)] * logs[j]);
    let b = &scaled * &es.left;
    let mut sys = es;
    sys.values = logs;
    Ok((b, sys.sorted()))
}
