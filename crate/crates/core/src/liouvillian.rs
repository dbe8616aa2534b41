//! Lindblad generators with the ground-state population eliminated through
//! the trace condition, giving `dρ⃗/dt = A(t) ρ⃗ + C(t)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::dense::{self, Lu};
use crate::numerics::eigen;
use crate::numerics::sparse::{BandedLu, SparseMatrix};
use crate::numerics::{CMatrix, C64, I};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Systems up to this dimension use dense factorizations.
pub const DENSE_LIMIT: usize = 256;

pub type TimeFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

/// Scalar prefactor of one generator term.
#[derive(Clone)]
pub enum Modulation {
    Constant(C64),
    Periodic(TimeFn),
}

impl Modulation {
    pub fn constant(v: f64) -> Self {
        Modulation::Constant(C64::new(v, 0.0))
    }

    pub fn periodic(f: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        Modulation::Periodic(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> C64 {
        match self {
            Modulation::Constant(v) => *v,
            Modulation::Periodic(f) => f(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Modulation::Constant(_))
    }
}

impl fmt::Debug for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulation::Constant(v) => write!(f, "Constant({v})"),
            Modulation::Periodic(_) => write!(f, "Periodic(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Ordering and weights of the reduced density vector: component k is
/// `weight_k · ρ_{i_k j_k}`; every element except ρ₀₀ appears exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    levels: usize,
    components: Vec<Component>,
    lookup: Vec<Option<usize>>,
}

impl Basis {
    pub fn new(levels: usize, components: Vec<Component>) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidBasis("at least two levels are required".into()));
        }
        if components.len() != levels * levels - 1 {
            return Err(Error::InvalidBasis(format!(
                "{} components for {} levels (expected {})",
                components.len(),
                levels,
                levels * levels - 1
            )));
        }
        let mut lookup = vec![None; levels * levels];
        for (k, c) in components.iter().enumerate() {
            if c.i >= levels || c.j >= levels {
                return Err(Error::InvalidBasis(format!("element ({}, {}) out of range", c.i, c.j)));
            }
            if c.i == 0 && c.j == 0 {
                return Err(Error::InvalidBasis("ρ00 is eliminated and cannot be a component".into()));
            }
            if !(c.weight.is_finite() && c.weight != 0.0) {
                return Err(Error::InvalidBasis(format!("weight of ({}, {}) must be finite and nonzero", c.i, c.j)));
            }
            let p = c.i + c.j * levels;
            if lookup[p].is_some() {
                return Err(Error::InvalidBasis(format!("element ({}, {}) listed twice", c.i, c.j)));
            }
            lookup[p] = Some(k);
        }
        Ok(Self { levels, components, lookup })
    }

    /// Unit-weight basis in column-stacked order of (i, j), skipping (0, 0).
    pub fn column_stacked(levels: usize) -> Self {
        let comps = (0..levels * levels)
            .skip(1)
            .map(|p| Component { i: p % levels, j: p / levels, weight: 1.0 })
            .collect();
        Self::new(levels, comps).expect("column-stacked basis is valid")
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        self.lookup[i + j * self.levels]
    }

    /// Coefficients `e_k` with `Σ_{i>0} ρ_ii = Σ_k e_k s_k`.
    pub fn trace_weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| if c.i == c.j { 1.0 / c.weight } else { 0.0 }).collect()
    }
}

/// Reduced density vector tagged with its basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector {
    pub values: Vec<C64>,
    pub basis: Arc<Basis>,
}

impl DensityVector {
    pub fn new(values: Vec<C64>, basis: Arc<Basis>) -> Result<Self> {
        if values.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: values.len() });
        }
        Ok(Self { values, basis })
    }

    /// ρ_ij recovered from the components (ρ₀₀ from the trace).
    pub fn element(&self, i: usize, j: usize) -> C64 {
        if i == 0 && j == 0 {
            let tr: C64 = self.basis.trace_weights().iter().zip(&self.values).map(|(e, s)| s * *e).sum();
            return ONE - tr;
        }
        let k = self.basis.index_of(i, j).expect("complete basis");
        self.values[k] / self.basis.components()[k].weight
    }

    pub fn devectorize(&self) -> CMatrix {
        let n = self.basis.levels();
        CMatrix::from_fn(n, n, |i, j| self.element(i, j))
    }
}

/// Reduced vector of a full density matrix.
pub fn vectorize(rho: &CMatrix, basis: Arc<Basis>) -> Result<DensityVector> {
    let n = basis.levels();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho.nrows() });
    }
    let values = basis.components().iter().map(|c| rho[(c.i, c.j)] * c.weight).collect();
    DensityVector::new(values, basis)
}

pub fn devectorize(v: &DensityVector) -> CMatrix {
    v.devectorize()
}

/// Largest entry of `ρ − ρ†`.
pub fn hermiticity_error(rho: &CMatrix) -> f64 {
    dense::max_abs_diff_mat(rho, &dense::adjoint(rho))
}

/// Lindblad problem `dρ/dt = -i[H(t), ρ] + γ(t) D[O] ρ`, with
/// `H(t) = Σ_k m_k(t) H_k` in the frame of the effective Hamiltonian.
#[derive(Debug, Clone)]
pub struct LindbladSpec {
    pub period: f64,
    pub hamiltonian: Vec<(Modulation, CMatrix)>,
    pub jump: CMatrix,
    pub rate: Modulation,
    pub basis: Arc<Basis>,
}

impl LindbladSpec {
    pub fn levels(&self) -> usize {
        self.basis.levels()
    }

    pub fn hamiltonian_at(&self, t: f64) -> CMatrix {
        let n = self.levels();
        let mut h = dense::zeros(n, n);
        for (m, hk) in &self.hamiltonian {
            h = dense::add(&h, &dense::scale(hk, m.at(t)));
        }
        h
    }

    fn validate(&self) -> Result<()> {
        let n = self.levels();
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::InvalidArgument(format!("period must be positive, got {}", self.period)));
        }
        for (_, hk) in &self.hamiltonian {
            if hk.nrows() != n || hk.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: hk.nrows() });
            }
        }
        if self.jump.nrows() != n || self.jump.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.jump.nrows() });
        }
        let samples = 64;
        for s in 0..samples {
            let t = self.period * s as f64 / samples as f64;
            let h = self.hamiltonian_at(t);
            let scale = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).fold(1.0f64, |m, (i, j)| m.max(h[(i, j)].norm()));
            let dev = hermiticity_error(&h);
            if !dev.is_finite() || dev > 1e-12 * scale {
                return Err(Error::NonHermitian { t, deviation: dev });
            }
            let g = self.rate.at(t);
            if !(g.re.is_finite() && g.re >= -1e-14 * g.re.abs().max(1.0) && g.im.abs() <= 1e-12 * g.re.abs().max(1.0)) {
                return Err(Error::InvalidRate { t, rate: g.re });
            }
        }
        Ok(())
    }

    /// Column-stacked superoperator triplets (index `i + j N`) of each term;
    /// the last entry is the dissipator.
    fn superoperator_terms(&self) -> Vec<(Modulation, Vec<(usize, usize, C64)>)> {
        let n = self.levels();
        let mut out = Vec::new();
        for (m, h) in &self.hamiltonian {
            let mut tr = Vec::new();
            for a in 0..n {
                for b in 0..n {
                    let v = h[(a, b)];
                    if v == ZERO {
                        continue;
                    }
                    for j in 0..n {
                        // -i H ρ
                        tr.push((a + j * n, b + j * n, -I * v));
                        // +i ρ H : row (j, b) picks ρ_{j a} H_{a b}
                        tr.push((j + b * n, j + a * n, I * v));
                    }
                }
            }
            out.push((m.clone(), tr));
        }
        let o = &self.jump;
        let q = dense::matmul(&dense::adjoint(o), o);
        let mut tr = Vec::new();
        for i in 0..n {
            for k in 0..n {
                let oik = o[(i, k)];
                if oik == ZERO {
                    continue;
                }
                for j in 0..n {
                    for l in 0..n {
                        let ojl = o[(j, l)];
                        if ojl != ZERO {
                            tr.push((i + j * n, k + l * n, oik * ojl.conj()));
                        }
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let v = q[(a, b)];
                if v == ZERO {
                    continue;
                }
                for j in 0..n {
                    tr.push((a + j * n, b + j * n, -0.5 * v));
                    tr.push((j + b * n, j + a * n, -0.5 * v));
                }
            }
        }
        out.push((self.rate.clone(), tr));
        out
    }

    /// Full N²×N² Liouvillian at time t (column stacking).
    pub fn full_liouvillian(&self, t: f64) -> SparseMatrix {
        let n2 = self.levels() * self.levels();
        let mut all = Vec::new();
        for (m, tr) in self.superoperator_terms() {
            let c = m.at(t);
            all.extend(tr.into_iter().map(|(i, j, v)| (i, j, v * c)));
        }
        SparseMatrix::from_triplets(n2, n2, &all)
    }
}

#[derive(Debug, Clone)]
struct Term {
    modulation: Modulation,
    b: Vec<C64>,
    c: Vec<C64>,
}

/// `A(t) = B(t) − C(t) eᵀ` and `C(t)`, both linear combinations of constant
/// sparse terms with scalar time-dependent prefactors.
#[derive(Debug, Clone)]
pub struct PeriodicGenerator {
    period: f64,
    basis: Arc<Basis>,
    pattern: SparseMatrix,
    terms: Vec<Term>,
    trace_weights: Vec<f64>,
    spec: Arc<LindbladSpec>,
}

/// Reduce a Lindblad specification to the generator of the reduced vector.
pub fn build_generator(spec: &LindbladSpec) -> Result<PeriodicGenerator> {
    spec.validate()?;
    let basis = spec.basis.clone();
    let n = basis.levels();
    let d = basis.dim();
    let comps = basis.components();
    let mut reduced = Vec::new();
    let mut all = Vec::new();
    for (m, tr) in spec.superoperator_terms() {
        let mut b = Vec::new();
        let mut c = vec![ZERO; d];
        for (p, q, v) in tr {
            if p == 0 {
                continue;
            }
            let k = basis.index_of(p % n, p / n).expect("complete basis");
            let wk = comps[k].weight;
            if q == 0 {
                c[k] += v * wk;
            } else {
                let mcol = basis.index_of(q % n, q / n).expect("complete basis");
                b.push((k, mcol, v * (wk / comps[mcol].weight)));
            }
        }
        all.extend(b.iter().map(|&(i, j, _)| (i, j, ZERO)));
        reduced.push((m, b, c));
    }
    let pattern = SparseMatrix::from_triplets(d, d, &all);
    let terms = reduced
        .into_iter()
        .map(|(modulation, b, c)| {
            let mut vals = vec![ZERO; pattern.nnz()];
            for (i, j, v) in b {
                vals[pattern.position(i, j).unwrap()] += v;
            }
            Term { modulation, b: vals, c }
        })
        .collect();
    Ok(PeriodicGenerator {
        period: spec.period,
        trace_weights: basis.trace_weights(),
        basis,
        pattern,
        terms,
        spec: Arc::new(spec.clone()),
    })
}

impl PeriodicGenerator {
    pub fn dim(&self) -> usize {
        self.pattern.nrows
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn spec(&self) -> &LindbladSpec {
        &self.spec
    }

    pub fn trace_weights(&self) -> &[f64] {
        &self.trace_weights
    }

    pub fn is_static(&self) -> bool {
        self.terms.iter().all(|t| t.modulation.is_constant())
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn coefficients(&self, t: f64) -> Vec<C64> {
        self.terms.iter().map(|term| term.modulation.at(t)).collect()
    }

    /// Period averages of the term prefactors (trapezoidal rule on `samples` points).
    pub fn average_coefficients(&self, samples: usize) -> Vec<C64> {
        let mut acc = vec![ZERO; self.terms.len()];
        for k in 0..samples {
            let t = self.period * k as f64 / samples as f64;
            for (a, c) in acc.iter_mut().zip(self.coefficients(t)) {
                *a += c;
            }
        }
        acc.iter().map(|a| a / samples as f64).collect()
    }

    pub fn b_values(&self, coefs: &[C64]) -> Vec<C64> {
        let mut vals = vec![ZERO; self.pattern.nnz()];
        for (term, &c) in self.terms.iter().zip(coefs) {
            if c == ZERO {
                continue;
            }
            vals.iter_mut().zip(&term.b).for_each(|(v, b)| *v += b * c);
        }
        vals
    }

    pub fn c_with(&self, coefs: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim()];
        for (term, &c) in self.terms.iter().zip(coefs) {
            out.iter_mut().zip(&term.c).for_each(|(o, v)| *o += v * c);
        }
        out
    }

    pub fn c_at(&self, t: f64) -> Vec<C64> {
        self.c_with(&self.coefficients(t))
    }

    /// Operator snapshot for fixed prefactors.
    pub fn operator(&self, coefs: &[C64]) -> GeneratorOperator<'_> {
        GeneratorOperator { gen: self, b: self.b_values(coefs), c: self.c_with(coefs) }
    }

    pub fn operator_at(&self, t: f64) -> GeneratorOperator<'_> {
        self.operator(&self.coefficients(t))
    }

    pub fn a_dense_with(&self, coefs: &[C64]) -> CMatrix {
        self.operator(coefs).dense()
    }

    pub fn a_dense(&self, t: f64) -> CMatrix {
        self.operator_at(t).dense()
    }

    /// `−A(t)⁻¹ C(t)`.
    pub fn instantaneous_steady_state(&self, t: f64) -> Result<Vec<C64>> {
        let op = self.operator_at(t);
        let solver = op.factor()?;
        Ok(solver.solve(&op.c).into_iter().map(|z| -z).collect())
    }

    /// Smallest decay rate `−max Re λ(A(t))`.
    pub fn dissipation_gap(&self, t: f64) -> Result<f64> {
        dissipation_gap(&self.a_dense(t))
    }
}

pub fn dissipation_gap(a: &CMatrix) -> Result<f64> {
    let ev = eigen::eigenvalues(a)?;
    Ok(-ev.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re)))
}

/// `A` and `C` for one set of prefactors.
pub struct GeneratorOperator<'a> {
    gen: &'a PeriodicGenerator,
    pub b: Vec<C64>,
    pub c: Vec<C64>,
}

impl GeneratorOperator<'_> {
    pub fn dim(&self) -> usize {
        self.gen.dim()
    }

    /// `out = A x`.
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        self.gen.pattern.mul_vec_values_into(&self.b, x, out);
        let tr: C64 = self.gen.trace_weights.iter().zip(x).map(|(e, v)| v * *e).sum();
        if tr != ZERO {
            out.iter_mut().zip(&self.c).for_each(|(o, c)| *o -= c * tr);
        }
    }

    /// `out = A x + C`.
    pub fn apply_affine(&self, x: &[C64], out: &mut [C64]) {
        self.apply(x, out);
        out.iter_mut().zip(&self.c).for_each(|(o, c)| *o += c);
    }

    pub fn dense(&self) -> CMatrix {
        let mut a = self.gen.pattern.to_dense_values(&self.b);
        for (m, &e) in self.gen.trace_weights.iter().enumerate() {
            if e != 0.0 {
                for k in 0..self.dim() {
                    a[(k, m)] -= self.c[k] * e;
                }
            }
        }
        a
    }

    pub fn factor(&self) -> Result<StaticSolver> {
        StaticSolver::new(self)
    }
}

/// Reusable `A(t)`, `C(t)` buffers. Constant terms are summed once; only the
/// nonzero entries of modulated terms are updated per call.
pub struct OperatorCache<'a> {
    gen: &'a PeriodicGenerator,
    base_b: Vec<C64>,
    base_c: Vec<C64>,
    modulated: Vec<(usize, Vec<(usize, C64)>, Vec<(usize, C64)>)>,
    op: GeneratorOperator<'a>,
}

impl<'a> OperatorCache<'a> {
    pub fn new(gen: &'a PeriodicGenerator) -> Self {
        let coefs: Vec<C64> = gen.terms.iter().map(|t| match t.modulation {
            Modulation::Constant(v) => v,
            Modulation::Periodic(_) => ZERO,
        }).collect();
        let nonzero = |v: &[C64]| v.iter().enumerate().filter(|(_, x)| **x != ZERO).map(|(i, x)| (i, *x)).collect::<Vec<_>>();
        let modulated = gen.terms.iter().enumerate().filter(|(_, t)| !t.modulation.is_constant())
            .map(|(k, t)| (k, nonzero(&t.b), nonzero(&t.c))).collect();
        let base_b = gen.b_values(&coefs);
        let base_c = gen.c_with(&coefs);
        let op = GeneratorOperator { gen, b: base_b.clone(), c: base_c.clone() };
        OperatorCache { gen, base_b, base_c, modulated, op }
    }

    pub fn at(&mut self, t: f64) -> &GeneratorOperator<'a> {
        if !self.modulated.is_empty() {
            self.op.b.copy_from_slice(&self.base_b);
            self.op.c.copy_from_slice(&self.base_c);
            for (k, b, c) in &self.modulated {
                let m = self.gen.terms[*k].modulation.at(t);
                b.iter().for_each(|&(p, v)| self.op.b[p] += v * m);
                c.iter().for_each(|&(p, v)| self.op.c[p] += v * m);
            }
        }
        &self.op
    }
}

enum SolverKind {
    Dense(Lu),
    Banded { lu: BandedLu, u: Vec<C64>, denom: C64, e: Vec<f64> },
}

/// Factorization of a frozen `A` for repeated solves.
pub struct StaticSolver {
    kind: SolverKind,
    /// Reciprocal condition estimate (exact 1-norm for dense, pivot-based otherwise).
    pub rcond: f64,
}

impl StaticSolver {
    pub fn new(op: &GeneratorOperator<'_>) -> Result<Self> {
        let d = op.dim();
        if d > DENSE_LIMIT {
            if let Ok(lu) = BandedLu::from_sparse(&op.gen.pattern, &op.b) {
                // Sherman–Morrison for the rank-one trace term
                let mut u = op.c.clone();
                lu.solve_in_place(&mut u);
                let e = op.gen.trace_weights.clone();
                let eu: C64 = e.iter().zip(&u).map(|(a, b)| b * *a).sum();
                let denom = ONE - eu;
                let rcond = lu.min_pivot_ratio * denom.norm().min(1.0);
                if denom.norm() > 1e-12 && u.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                    return Ok(Self { kind: SolverKind::Banded { lu, u, denom, e }, rcond });
                }
            }
        }
        let lu = Lu::new(&op.dense())?;
        let rcond = lu.rcond;
        Ok(Self { kind: SolverKind::Dense(lu), rcond })
    }

    pub fn solve(&self, y: &[C64]) -> Vec<C64> {
        match &self.kind {
            SolverKind::Dense(lu) => lu.solve_vec(y),
            SolverKind::Banded { lu, u, denom, e } => {
                let mut z = y.to_vec();
                lu.solve_in_place(&mut z);
                let ez: C64 = e.iter().zip(&z).map(|(a, b)| b * *a).sum();
                let f = ez / denom;
                z.iter_mut().zip(u).for_each(|(zi, ui)| *zi += ui * f);
                z
            }
        }
    }
}
