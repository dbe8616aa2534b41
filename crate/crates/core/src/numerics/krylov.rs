//! Restarted GMRES for operators given only through their action.

use super::dense::norm2;
use super::C64;
use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-11, restart: 60, max_iter: 400 }
    }
}

#[derive(Debug, Clone)]
pub struct GmresResult {
    pub x: Vec<C64>,
    /// Relative residual `‖b − A x‖ / ‖b‖` as tracked by the Givens recurrence.
    pub residual: f64,
    pub iterations: usize,
    /// Ritz values of the operator from the first Arnoldi cycle.
    pub ritz: Vec<C64>,
}

fn cdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solve `A x = b` with `apply(v, out)` computing `out = A v`.
pub fn gmres(
    apply: &mut dyn FnMut(&[C64], &mut [C64]) -> Result<()>,
    b: &[C64],
    x0: Option<&[C64]>,
    opts: GmresOptions,
) -> Result<GmresResult> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![ZERO; n], |v| v.to_vec());
    if bnorm == 0.0 {
        return Ok(GmresResult { x: vec![ZERO; n], residual: 0.0, iterations: 0, ritz: vec![] });
    }
    let mut iterations = 0;
    let mut ritz = Vec::new();
    let mut w = vec![ZERO; n];
    let mut residual;
    loop {
        apply(&x, &mut w)?;
        let r: Vec<C64> = b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect();
        let beta = norm2(&r);
        residual = beta / bnorm;
        if residual <= opts.tol || iterations >= opts.max_iter {
            break;
        }
        let m = opts.restart.min(opts.max_iter - iterations).max(1);
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut hraw = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![ZERO; m];
        let mut sn = vec![ZERO; m];
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            apply(&v[k], &mut w)?;
            iterations += 1;
            let mut wk = w.clone();
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for (j, vj) in v.iter().enumerate() {
                    let hij = cdot(vj, &wk);
                    h[j][k] += hij;
                    wk.iter_mut().zip(vj).for_each(|(a, b)| *a -= hij * b);
                }
            }
            let hnext = norm2(&wk);
            h[k + 1][k] = C64::new(hnext, 0.0);
            for j in 0..=k + 1 {
                hraw[j][k] = h[j][k];
            }
            for j in 0..k {
                let t = cs[j].conj() * h[j][k] + sn[j].conj() * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let (a, bb) = (h[k][k], h[k + 1][k]);
            let r = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if r == 0.0 {
                cs[k] = C64::new(1.0, 0.0);
                sn[k] = ZERO;
            } else {
                cs[k] = a / r;
                sn[k] = bb / r;
            }
            h[k][k] = C64::new(r, 0.0);
            h[k + 1][k] = ZERO;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            residual = g[k + 1].norm() / bnorm;
            if residual <= opts.tol || hnext <= 1e-14 * bnorm {
                break;
            }
            if k + 1 == m {
                break;
            }
            v.push(wk.iter().map(|z| z / hnext).collect());
        }
        if ritz.is_empty() {
            ritz = hessenberg_eigenvalues(&hraw, k_used);
        }
        let mut y = vec![ZERO; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&v[j]).for_each(|(a, b)| *a += yj * b);
        }
        if iterations >= opts.max_iter && residual > opts.tol {
            apply(&x, &mut w)?;
            residual = norm2(&b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect::<Vec<_>>()) / bnorm;
            if residual > opts.tol {
                return Err(Error::NoConvergence { residual, iterations });
            }
            break;
        }
    }
    if residual > opts.tol {
        return Err(Error::NoConvergence { residual, iterations });
    }
    Ok(GmresResult { x, residual, iterations, ritz })
}

/// Eigenvalues of the leading k×k block of a Hessenberg matrix (rows `h[i][..]`).
fn hessenberg_eigenvalues(h: &[Vec<C64>], k: usize) -> Vec<C64> {
    let m = super::CMatrix::from_fn(k, k, |i, j| h[i][j]);
    super::eigen::eigenvalues(&m).unwrap_or_default()
}
