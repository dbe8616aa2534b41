use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::floquet::{FloquetDecomposition, QuasiStationaryState};
use crate::models::QubitModel;
use crate::numerics::dense;
use crate::numerics::fourier;
use crate::numerics::C64;

use super::correlations::g_initial;
use super::scattering::{elastic_spectrum, reflection_transmission, ElasticLine};
use super::Channel;

/// One Lorentzian of the fluorescence spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianTerm {
    pub m: i64,
    pub j: usize,
    /// `mΩ + Im b_j`, relative to the probe frequency.
    pub position: f64,
    /// `−Re b_j`.
    pub half_width: f64,
    /// `(V₊^(−m)·χ_r^j)(χ_l^j·V₀^(m))`.
    pub weight: C64,
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub channel: Channel,
    pub omega0: f64,
    pub elastic: Vec<ElasticLine>,
    pub inelastic: Vec<LorentzianTerm>,
}

impl SpectrumResult {
    /// Inelastic spectral density at `ω − ω₀ = x`.
    pub fn density(&self, x: f64) -> f64 {
        self.complex_density(x).re
    }

    /// Sum over both delay half-lines before taking the real part; its
    /// imaginary part measures how well the conjugate pairs cancel.
    pub fn complex_density(&self, x: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for t in &self.inelastic {
            let z = t.weight / C64::new(t.half_width, x - t.position);
            acc += z + z.conj();
        }
        acc / (2.0 * PI)
    }

    /// `∫ S_inel dω`.
    pub fn inelastic_flux(&self) -> f64 {
        self.inelastic.iter().map(|t| t.weight.re).sum()
    }

    /// Positions of the resonances whose weight exceeds `rel` of the largest.
    pub fn resonances(&self, rel: f64) -> Vec<f64> {
        let wmax = self.inelastic.iter().fold(0.0f64, |m, t| m.max(t.weight.norm()));
        self.inelastic.iter().filter(|t| t.weight.norm() > rel * wmax).map(|t| t.position).collect()
    }
}

/// Floquet-resolved fluorescence spectrum of the qubit. The decomposition
/// must be sampled on the same grid as the state.
pub fn inelastic_spectrum(
    model: &QubitModel,
    state: &QuasiStationaryState,
    floq: &FloquetDecomposition,
    m_max: usize,
    channel: Channel,
) -> Result<SpectrumResult> {
    if floq.times.len() != state.times.len() {
        return Err(Error::DimensionMismatch { expected: state.times.len(), found: floq.times.len() });
    }
    let chan = model.channel();
    let m_max = m_max.min((state.grid_points() - 2) / 2);
    let mut v_plus = Vec::with_capacity(state.times.len());
    let mut v_zero = Vec::with_capacity(state.times.len());
    for ((&t, s), p) in state.times.iter().zip(&state.samples).zip(&floq.p) {
        let c = chan.coupling.at(t);
        v_plus.push((0..p.ncols()).map(|k| c.conj() * p[(0, k)]).collect::<Vec<_>>());
        let x = dense::solve(p, &g_initial(s))?;
        v_zero.push(x.into_iter().map(|z| c * z).collect::<Vec<_>>());
    }
    let vp = fourier::fourier_coefficients(&state.times, &v_plus, state.period, m_max)?;
    let v0 = fourier::fourier_coefficients(&state.times, &v_zero, state.period, m_max)?;
    let ex = &floq.exponents;
    let w = floq.omega();
    let mut inelastic = Vec::new();
    for m in -(m_max as i64)..=m_max as i64 {
        for j in 0..ex.dim() {
            let r = dense::dot(vp.coeff(-m), &ex.right_vec(j));
            let l = dense::dot(&ex.left_vec(j), v0.coeff(m));
            inelastic.push(LorentzianTerm {
                m,
                j,
                position: m as f64 * w + ex.values[j].im,
                half_width: -ex.values[j].re,
                weight: r * l,
            });
        }
    }
    Ok(SpectrumResult { channel, omega0: model.omega0, elastic: Vec::new(), inelastic })
}

/// Elastic lines and Lorentzian terms together.
pub fn power_spectrum(
    model: &QubitModel,
    state: &QuasiStationaryState,
    floq: &FloquetDecomposition,
    m_max: usize,
    channel: Channel,
) -> Result<SpectrumResult> {
    let mut spec = inelastic_spectrum(model, state, floq, m_max, channel)?;
    if model.flux > 0.0 {
        spec.elastic = elastic_spectrum(&reflection_transmission(&model.channel(), state, m_max)?, channel);
    }
    Ok(spec)
}
