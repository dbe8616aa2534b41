use faer::Side;

use crate::error::{Error, Result};
use crate::floquet::QuasiStationaryState;
use crate::models::KerrModel;
use crate::numerics::{dense, CMatrix, C64};

/// Eigenvalues in `[−CLIP, 0)` are treated as zero.
pub const CLIP: f64 = 1e-10;
/// More negative eigenvalues indicate a truncation or integration failure.
pub const NEGATIVE_LIMIT: f64 = -1e-6;

#[derive(Debug, Clone)]
pub struct KerrObservables {
    pub times: Vec<f64>,
    pub detuning: Vec<f64>,
    /// `⟨b†b⟩(τ_c)`.
    pub occupation: Vec<f64>,
    /// `−tr ρ ln ρ`.
    pub entropy: Vec<f64>,
    /// Population of the two highest Fock states.
    pub top_population: Vec<f64>,
    pub min_eigenvalue: f64,
    /// Signed area enclosed by `(δ(τ_c), ⟨b†b⟩(τ_c))` over one period.
    pub loop_area: f64,
}

impl KerrObservables {
    pub fn peak_occupation(&self) -> f64 {
        self.occupation.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn occupation(rho: &CMatrix) -> f64 {
    (0..rho.nrows()).map(|n| n as f64 * rho[(n, n)].re).sum()
}

/// Von Neumann entropy and the smallest eigenvalue of a density matrix.
pub fn entropy(rho: &CMatrix) -> Result<(f64, f64)> {
    let h = dense::scale(&dense::add(rho, &dense::adjoint(rho)), C64::new(0.5, 0.0));
    let ev = h.self_adjoint_eigenvalues(Side::Lower).map_err(|_| Error::EigenFailure)?;
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min < NEGATIVE_LIMIT {
        return Err(Error::NegativeEigenvalue { value: min });
    }
    let s = ev.iter().filter(|&&p| p > CLIP).map(|&p| -p * p.ln()).sum();
    Ok((s, min))
}

/// Shoelace area of a closed polygon; counter-clockwise is positive.
pub fn loop_area(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut a = 0.0;
    for k in 0..n {
        let l = (k + 1) % n;
        a += x[k] * y[l] - x[l] * y[k];
    }
    0.5 * a
}

pub fn kerr_observables(model: &KerrModel, state: &QuasiStationaryState) -> Result<KerrObservables> {
    let n = model.levels();
    if state.basis.levels() != n {
        return Err(Error::DimensionMismatch { expected: n, found: state.basis.levels() });
    }
    let mut out = KerrObservables {
        times: state.times.clone(),
        detuning: state.times.iter().map(|&t| model.detuning.eval(t)).collect(),
        occupation: Vec::with_capacity(state.times.len()),
        entropy: Vec::with_capacity(state.times.len()),
        top_population: Vec::with_capacity(state.times.len()),
        min_eigenvalue: f64::INFINITY,
        loop_area: 0.0,
    };
    for k in 0..state.times.len() {
        let rho = state.density(k).devectorize();
        let (s, min) = entropy(&rho)?;
        out.occupation.push(occupation(&rho));
        out.entropy.push(s);
        out.top_population.push((n.saturating_sub(2)..n).map(|i| rho[(i, i)].re).sum());
        out.min_eigenvalue = out.min_eigenvalue.min(min);
    }
    let m = state.grid_points();
    out.loop_area = loop_area(&out.detuning[..m], &out.occupation[..m]);
    Ok(out)
}

/// Outcome of the Fock-space truncation search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationChoice {
    pub n_max: usize,
    /// Detuning at which the static occupation peaks.
    pub probe_detuning: f64,
    pub top_population: f64,
    /// Relative occupation change from `n_max` to `n_max + step`.
    pub occupation_change: f64,
}

fn static_density(model: &KerrModel, delta: f64) -> Result<CMatrix> {
    let m = model.with_detuning(delta);
    let gen = m.generator()?;
    let x = gen.instantaneous_steady_state(0.0)?;
    Ok(crate::liouvillian::DensityVector::new(x, gen.basis().clone())?.devectorize())
}

fn top_two(rho: &CMatrix) -> f64 {
    let n = rho.nrows();
    (n.saturating_sub(2)..n).map(|i| rho[(i, i)].re).sum()
}

/// Find the static occupation peak over the detuning range of `model`, then
/// raise `n_max` by `step` from `start` until the two highest Fock levels
/// hold less than `tol` there.
pub fn select_truncation(model: &KerrModel, start: usize, step: usize, limit: usize, tol: f64) -> Result<TruncationChoice> {
    let (lo, hi) = (model.detuning.min(), model.detuning.max());
    let scan = if hi > lo { 61 } else { 1 };
    let trial = model.with_truncation(start);
    let mut probe = (lo, f64::NEG_INFINITY);
    for k in 0..scan {
        let delta = if scan == 1 { lo } else { lo + (hi - lo) * k as f64 / (scan - 1) as f64 };
        let n = occupation(&static_density(&trial, delta)?);
        if n > probe.1 {
            probe = (delta, n);
        }
    }
    let mut n_max = start;
    loop {
        let rho = static_density(&model.with_truncation(n_max), probe.0)?;
        let top = top_two(&rho);
        if top < tol {
            let next = occupation(&static_density(&model.with_truncation(n_max + step), probe.0)?);
            let here = occupation(&rho);
            let change = (next - here).abs() / here.abs().max(f64::MIN_POSITIVE);
            return Ok(TruncationChoice { n_max, probe_detuning: probe.0, top_population: top, occupation_change: change });
        }
        if n_max + step > limit {
            return Err(Error::Truncation { population: top, n_max });
        }
        n_max += step;
    }
}
