//! Compressed sparse rows and a banded LU for the large generators.

use super::{CMatrix, C64};
use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<C64>,
}

impl SparseMatrix {
    /// Build from triplets; duplicates are summed, explicit zeros kept.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut sorted: Vec<(usize, usize, C64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<C64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Index of entry (i, j) in `values`, if stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        row.binary_search(&j).ok().map(|p| p + self.indptr[i])
    }

    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        self.mul_vec_values_into(&self.values, x, y);
    }

    /// Product with an alternative value array sharing this pattern.
    pub fn mul_vec_values_into(&self, values: &[C64], x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let mut acc = ZERO;
            for p in self.indptr[i]..self.indptr[i + 1] {
                acc += values[p] * x[self.indices[p]];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        self.to_dense_values(&self.values)
    }

    pub fn to_dense_values(&self, values: &[C64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[p])] += values[p];
            }
        }
        m
    }

    /// Lower and upper bandwidths of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[p];
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }
}

/// LU with partial pivoting of a square banded matrix (LAPACK `gbtf2` layout).
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<C64>,
    piv: Vec<usize>,
    pub min_pivot_ratio: f64,
}

impl BandedLu {
    pub fn from_sparse(a: &SparseMatrix, values: &[C64]) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::DimensionMismatch { expected: a.nrows, found: a.ncols });
        }
        let (kl, ku) = a.bandwidths();
        let n = a.nrows;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![ZERO; ldab * n];
        for i in 0..n {
            for p in a.indptr[i]..a.indptr[i + 1] {
                let j = a.indices[p];
                ab[j * ldab + kl + ku + i - j] += values[p];
            }
        }
        let mut lu = Self { n, kl, ku, ldab, ab, piv: vec![0; n], min_pivot_ratio: 0.0 };
        lu.factor()?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    fn factor(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = ku + kl;
        let scale = self.ab.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if scale == 0.0 {
            return Err(Error::Singular("zero banded matrix".into()));
        }
        let mut min_piv = f64::INFINITY;
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.ab[self.at(j, j)].norm();
            for i in j + 1..=last {
                let v = self.ab[self.at(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.piv[j] = p;
            min_piv = min_piv.min(best / scale);
            if best == 0.0 {
                return Err(Error::Singular(format!("zero pivot in column {j}")));
            }
            let jmax = (j + kv).min(n - 1);
            if p != j {
                for c in j..=jmax {
                    let (a, b) = (self.at(j, c), self.at(p, c));
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.at(j, j)];
            let inv = C64::new(1.0, 0.0) / pivot;
            for i in j + 1..=last {
                let idx = self.at(i, j);
                self.ab[idx] *= inv;
            }
            for c in j + 1..=jmax {
                let u = self.ab[self.at(j, c)];
                if u == ZERO {
                    continue;
                }
                for i in j + 1..=last {
                    let l = self.ab[self.at(i, j)];
                    let idx = self.at(i, c);
                    self.ab[idx] -= l * u;
                }
            }
        }
        self.min_pivot_ratio = min_piv;
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = ku + kl;
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != ZERO {
                for i in j + 1..=(j + kl).min(n - 1) {
                    b[i] -= self.ab[self.at(i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[self.at(j, j)];
            let bj = b[j];
            if bj != ZERO {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= self.ab[self.at(i, j)] * bj;
                }
            }
        }
    }
}
