//! Small dense helpers layered over `faer`.

use faer::linalg::solvers::{DenseSolveCore, PartialPivLu, Solve};
use faer::Mat;

use super::{CMatrix, C64};
use crate::error::{Error, Result};

pub fn zeros(n: usize, m: usize) -> CMatrix {
    Mat::zeros(n, m)
}

pub fn identity(n: usize) -> CMatrix {
    Mat::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

pub fn from_rows(rows: &[Vec<C64>]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn column(v: &[C64]) -> CMatrix {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn col_to_vec(m: &CMatrix, j: usize) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn mat_vec(a: &CMatrix, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), x.len());
    let mut out = vec![C64::new(0.0, 0.0); a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == C64::new(0.0, 0.0) {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += a[(i, j)] * xj;
        }
    }
    out
}

/// Plain bilinear product `Σ a_i b_i` (no conjugation).
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// Induced 1-norm (max column sum).
pub fn norm1(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn max_abs_diff_mat(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut m: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn adjoint(a: &CMatrix) -> CMatrix {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn scale(a: &CMatrix, s: C64) -> CMatrix {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn add(a: &CMatrix, b: &CMatrix) -> CMatrix {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)])
}

pub fn sub(a: &CMatrix, b: &CMatrix) -> CMatrix {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b
}

pub fn is_finite(a: &CMatrix) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

/// LU factorization with a reciprocal condition estimate in the 1-norm.
pub struct Lu {
    lu: PartialPivLu<C64>,
    pub rcond: f64,
    n: usize,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::DimensionMismatch { expected: n, found: a.ncols() });
        }
        let lu = a.partial_piv_lu();
        let inv = lu.inverse();
        let anorm = norm1(a);
        let rcond = if !is_finite(&inv) || anorm == 0.0 {
            0.0
        } else {
            let r = 1.0 / (anorm * norm1(&inv));
            if r.is_finite() {
                r
            } else {
                0.0
            }
        };
        Ok(Self { lu, rcond, n })
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.n);
        let x = self.lu.solve(column(b));
        col_to_vec(&x, 0)
    }

    pub fn solve_mat(&self, b: &CMatrix) -> CMatrix {
        self.lu.solve(b)
    }

    pub fn inverse(&self) -> CMatrix {
        self.lu.inverse()
    }
}

/// Solve `a x = b`, failing when `a` is numerically singular.
pub fn solve(a: &CMatrix, b: &[C64]) -> Result<Vec<C64>> {
    let lu = Lu::new(a)?;
    if lu.rcond < 1e-15 {
        return Err(Error::Singular(format!("rcond {:e}", lu.rcond)));
    }
    Ok(lu.solve_vec(b))
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    let lu = Lu::new(a)?;
    if lu.rcond < 1e-15 {
        return Err(Error::Singular(format!("rcond {:e}", lu.rcond)));
    }
    Ok(lu.inverse())
}
