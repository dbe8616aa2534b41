//! Periodic sample utilities with the convention `X(τ) = Σ_m X⁽ᵐ⁾ e^{-imΩτ}`.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use super::C64;
use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Uniform sample times `t_k = k T / M` for `k = 0..=M` (endpoint included).
pub fn period_grid(period: f64, points: usize) -> Vec<f64> {
    (0..=points).map(|k| period * k as f64 / points as f64).collect()
}

/// Harmonic index stored at FFT bin `k`.
fn harmonic(k: usize, m: usize) -> i64 {
    if 2 * k < m {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

/// Drop a duplicated endpoint and check uniform spacing.
fn one_period<'a, T>(times: &[f64], samples: &'a [T], period: f64) -> Result<&'a [T]> {
    if times.len() != samples.len() || times.len() < 2 {
        return Err(Error::DimensionMismatch { expected: times.len(), found: samples.len() });
    }
    let span = times[times.len() - 1] - times[0];
    let (samples, times) = if (span - period).abs() <= 1e-9 * period {
        (&samples[..samples.len() - 1], &times[..times.len() - 1])
    } else {
        (samples, times)
    };
    let m = samples.len();
    let dt = period / m as f64;
    for (k, &t) in times.iter().enumerate() {
        if (t - times[0] - k as f64 * dt).abs() > 1e-9 * period {
            return Err(Error::NonUniformGrid);
        }
    }
    Ok(samples)
}

/// Coefficients of a vector-valued periodic function.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    pub period: f64,
    pub m_max: usize,
    /// `coeffs[m + m_max]` is the vector coefficient of harmonic m.
    pub coeffs: Vec<Vec<C64>>,
}

impl FourierSeries {
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn coeff(&self, m: i64) -> &[C64] {
        &self.coeffs[(m + self.m_max as i64) as usize]
    }

    pub fn dim(&self) -> usize {
        self.coeffs.first().map_or(0, |c| c.len())
    }

    pub fn eval(&self, t: f64) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim()];
        let w = self.omega();
        for m in -(self.m_max as i64)..=self.m_max as i64 {
            let ph = C64::from_polar(1.0, -(m as f64) * w * t);
            for (o, c) in out.iter_mut().zip(self.coeff(m)) {
                *o += c * ph;
            }
        }
        out
    }
}

/// Raw coefficient bins `X⁽ᵐ⁾` (bin k holds harmonic `harmonic(k)`), per component.
fn coefficient_bins(samples: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let m = samples.len();
    let d = samples[0].len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(m);
    let mut buf = vec![ZERO; m];
    let mut out = vec![vec![ZERO; d]; m];
    let inv = 1.0 / m as f64;
    for c in 0..d {
        for (k, s) in samples.iter().enumerate() {
            buf[k] = s[c];
        }
        fft.process(&mut buf);
        for k in 0..m {
            out[k][c] = buf[k] * inv;
        }
    }
    out
}

/// Samples `Σ_m X⁽ᵐ⁾ e^{-2πimk/M}` from coefficient bins.
fn samples_from_bins(bins: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let m = bins.len();
    let d = bins[0].len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut buf = vec![ZERO; m];
    let mut out = vec![vec![ZERO; d]; m];
    for c in 0..d {
        for k in 0..m {
            buf[k] = bins[k][c];
        }
        fft.process(&mut buf);
        for k in 0..m {
            out[k][c] = buf[k];
        }
    }
    out
}

/// Evaluate the harmonics `|m| ≤ m_max` of one period of uniform samples on a
/// uniform grid of `n` points.
pub fn resample(samples: &[Vec<C64>], m_max: usize, n: usize) -> Result<Vec<Vec<C64>>> {
    let m = samples.len();
    if m < 2 * m_max + 2 || n < 2 * m_max + 2 {
        return Err(Error::TooFewSamples { samples: m.min(n), m_max });
    }
    let bins = coefficient_bins(samples);
    let mut wide = vec![vec![ZERO; bins[0].len()]; n];
    for h in -(m_max as i64)..=m_max as i64 {
        wide[h.rem_euclid(n as i64) as usize].clone_from(&bins[h.rem_euclid(m as i64) as usize]);
    }
    Ok(samples_from_bins(&wide))
}

/// Harmonics `|m| ≤ m_max` of samples spanning one period. A trailing sample at
/// `t_0 + T` is recognized and ignored.
pub fn fourier_coefficients(times: &[f64], samples: &[Vec<C64>], period: f64, m_max: usize) -> Result<FourierSeries> {
    let s = one_period(times, samples, period)?;
    let m = s.len();
    if m < 2 * m_max + 2 {
        return Err(Error::TooFewSamples { samples: m, m_max });
    }
    let bins = coefficient_bins(s);
    let t0 = times[0];
    let w = 2.0 * PI / period;
    let coeffs = (-(m_max as i64)..=m_max as i64)
        .map(|h| {
            let k = h.rem_euclid(m as i64) as usize;
            // shift the origin from t0 to 0
            let ph = C64::from_polar(1.0, h as f64 * w * t0);
            bins[k].iter().map(|c| c * ph).collect()
        })
        .collect();
    Ok(FourierSeries { period, m_max, coeffs })
}

pub fn scalar_fourier(times: &[f64], samples: &[C64], period: f64, m_max: usize) -> Result<Vec<C64>> {
    let v: Vec<Vec<C64>> = samples.iter().map(|&z| vec![z]).collect();
    let fs = fourier_coefficients(times, &v, period, m_max)?;
    Ok(fs.coeffs.into_iter().map(|c| c[0]).collect())
}

/// Period average of uniformly spaced samples (endpoint excluded).
pub fn period_average(samples: &[Vec<C64>]) -> Vec<C64> {
    let m = samples.len() as f64;
    let mut out = vec![ZERO; samples[0].len()];
    for s in samples {
        for (o, v) in out.iter_mut().zip(s) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= m);
    out
}

/// Spectral derivative of periodic samples (one period, endpoint excluded).
pub fn periodic_derivative(samples: &[Vec<C64>], period: f64) -> Vec<Vec<C64>> {
    let m = samples.len();
    let w = 2.0 * PI / period;
    let mut bins = coefficient_bins(samples);
    for (k, b) in bins.iter_mut().enumerate() {
        let h = harmonic(k, m);
        let f = if m % 2 == 0 && 2 * k == m { ZERO } else { C64::new(0.0, -(h as f64) * w) };
        b.iter_mut().for_each(|z| *z *= f);
    }
    samples_from_bins(&bins)
}

/// Zero-mean periodic antiderivative of the oscillating part of the samples.
/// Returns the antiderivative samples and the discarded mean.
pub fn periodic_antiderivative(samples: &[Vec<C64>], period: f64) -> (Vec<Vec<C64>>, Vec<C64>) {
    let m = samples.len();
    let w = 2.0 * PI / period;
    let mut bins = coefficient_bins(samples);
    let mean = bins[0].clone();
    for (k, b) in bins.iter_mut().enumerate() {
        let h = harmonic(k, m);
        let f = if h == 0 || (m % 2 == 0 && 2 * k == m) { ZERO } else { C64::new(0.0, 1.0 / (h as f64 * w)) };
        b.iter_mut().for_each(|z| *z *= f);
    }
    (samples_from_bins(&bins), mean)
}

/// Trigonometric interpolation of one-period samples at arbitrary `t`.
pub fn trig_interpolate(samples: &[Vec<C64>], period: f64, t: f64) -> Vec<C64> {
    let m = samples.len();
    let bins = coefficient_bins(samples);
    let w = 2.0 * PI / period;
    let mut out = vec![ZERO; samples[0].len()];
    for (k, b) in bins.iter().enumerate() {
        let h = harmonic(k, m);
        let weight = if m % 2 == 0 && 2 * k == m { 0.5 } else { 1.0 };
        let ph = C64::from_polar(weight, -(h as f64) * w * t);
        // split Nyquist bin symmetrically so real data stays real
        let ph = if weight == 0.5 { ph + C64::from_polar(0.5, h as f64 * w * t) } else { ph };
        for (o, c) in out.iter_mut().zip(b) {
            *o += c * ph;
        }
    }
    out
}
