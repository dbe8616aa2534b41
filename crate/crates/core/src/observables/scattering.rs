use crate::error::{Error, Result};
use crate::floquet::QuasiStationaryState;
use crate::models::ScatteringChannel;
use crate::numerics::fourier;
use crate::numerics::C64;

use super::Channel;

/// Reflection and transmission amplitudes over one period.
#[derive(Debug, Clone)]
pub struct AmplitudeTrace {
    pub period: f64,
    pub flux: f64,
    /// `t_k = kT/M`, `k = 0..=M`.
    pub times: Vec<f64>,
    pub reflection: Vec<C64>,
    pub transmission: Vec<C64>,
    pub m_max: usize,
    /// `R^(m)` at index `m + m_max`.
    pub reflection_coeffs: Vec<C64>,
    pub transmission_coeffs: Vec<C64>,
}

impl AmplitudeTrace {
    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    pub fn coeff(&self, channel: Channel, m: i64) -> C64 {
        let k = (m + self.m_max as i64) as usize;
        match channel {
            Channel::L => self.reflection_coeffs[k],
            Channel::R => self.transmission_coeffs[k],
        }
    }
}

/// `R(τ_c) = −i √(π/f) g(τ_c) ⟨σ₋⟩` and `T = 1 + R`. The harmonic cutoff is
/// lowered to what the grid resolves.
pub fn reflection_transmission(channel: &ScatteringChannel, state: &QuasiStationaryState, m_max: usize) -> Result<AmplitudeTrace> {
    if !(channel.flux > 0.0) {
        return Err(Error::InvalidArgument("amplitudes need a positive input flux".into()));
    }
    let reflection: Vec<C64> = state.times.iter().zip(&state.samples).map(|(&t, s)| channel.reflection(t, s)).collect();
    let transmission: Vec<C64> = reflection.iter().map(|r| r + 1.0).collect();
    let m_max = m_max.min((state.grid_points() - 2) / 2);
    let reflection_coeffs = fourier::scalar_fourier(&state.times, &reflection, state.period, m_max)?;
    let transmission_coeffs = fourier::scalar_fourier(&state.times, &transmission, state.period, m_max)?;
    Ok(AmplitudeTrace {
        period: state.period,
        flux: channel.flux,
        times: state.times.clone(),
        reflection,
        transmission,
        m_max,
        reflection_coeffs,
        transmission_coeffs,
    })
}

/// Equal-time output fluxes `f_α(τ_c) = g¹_α(0, τ_c)`.
#[derive(Debug, Clone)]
pub struct OutputFluxes {
    pub times: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// `f|R|²` and `f|T|²`.
    pub left_elastic: Vec<f64>,
    pub right_elastic: Vec<f64>,
    /// `π|g|² (P_e − |⟨σ₋⟩|²)`, shared by both ports.
    pub inelastic: Vec<f64>,
    pub mean_left: f64,
    pub mean_right: f64,
    /// `|f̄_L + f̄_R − f| / f` (absolute when f = 0).
    pub residual: f64,
}

pub fn flux_at(channel: &ScatteringChannel, t: f64, s: &[C64]) -> (f64, f64, f64) {
    let c = channel.coupling.at(t);
    let sm = channel.lowering_mean(s);
    let rate = c.norm_sqr();
    let left_el = rate * sm.norm_sqr();
    let amp = C64::new(channel.flux.sqrt(), 0.0) - C64::new(0.0, 1.0) * c * sm;
    let right_el = amp.norm_sqr();
    let inel = rate * (channel.excited_population(s) - sm.norm_sqr());
    (left_el, right_el, inel)
}

pub fn output_fluxes(channel: &ScatteringChannel, state: &QuasiStationaryState) -> OutputFluxes {
    let n = state.times.len();
    let mut out = OutputFluxes {
        times: state.times.clone(),
        left: Vec::with_capacity(n),
        right: Vec::with_capacity(n),
        left_elastic: Vec::with_capacity(n),
        right_elastic: Vec::with_capacity(n),
        inelastic: Vec::with_capacity(n),
        mean_left: 0.0,
        mean_right: 0.0,
        residual: 0.0,
    };
    for (&t, s) in state.times.iter().zip(&state.samples) {
        let (l, r, i) = flux_at(channel, t, s);
        out.left_elastic.push(l);
        out.right_elastic.push(r);
        out.inelastic.push(i);
        out.left.push(l + i);
        out.right.push(r + i);
    }
    let m = (n - 1) as f64;
    out.mean_left = out.left[..n - 1].iter().sum::<f64>() / m;
    out.mean_right = out.right[..n - 1].iter().sum::<f64>() / m;
    let excess = (out.mean_left + out.mean_right - channel.flux).abs();
    out.residual = if channel.flux > 0.0 { excess / channel.flux } else { excess };
    out
}

/// Delta line of the coherent spectrum at `ω₀ + mΩ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticLine {
    pub m: i64,
    /// Offset `mΩ` from the probe frequency.
    pub offset: f64,
    pub weight: f64,
}

pub fn elastic_spectrum(trace: &AmplitudeTrace, channel: Channel) -> Vec<ElasticLine> {
    let w = trace.omega();
    let m = trace.m_max as i64;
    (-m..=m)
        .map(|k| ElasticLine { m: k, offset: k as f64 * w, weight: trace.flux * trace.coeff(channel, k).norm_sqr() })
        .collect()
}
