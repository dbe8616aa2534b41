use std::thread;

use crate::error::{Error, Result};
use crate::floquet::QuasiStationaryState;
use crate::liouvillian::PeriodicGenerator;
use crate::models::{QubitModel, ScatteringChannel};
use crate::numerics::fourier::FourierSeries;
use crate::numerics::ode::{Dopri5, OdeOptions, OutputMode};
use crate::numerics::C64;

use super::scattering::flux_at;
use super::Channel;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Fluxes below this (relative to `1 + f`) leave g² undefined.
pub const FLUX_FLOOR: f64 = 1e-12;

/// Two-time correlation on a `(τ_c, τ)` grid, indexed `[c][k]`.
#[derive(Debug, Clone)]
pub struct CorrelationResult {
    pub channel: Channel,
    pub tau: Vec<f64>,
    pub tau_c: Vec<f64>,
    /// Regression vector `G(τ, τ_c)`.
    pub g: Vec<Vec<Vec<C64>>>,
    /// `J(τ, τ_c)` (second order only).
    pub j: Option<Vec<Vec<Vec<C64>>>>,
    /// g¹: elastic part; g²: unused.
    pub elastic: Option<Vec<Vec<C64>>>,
    /// g¹ (complex) or g² (real up to round-off).
    pub values: Vec<Vec<C64>>,
    pub defined: Vec<Vec<bool>>,
}

impl CorrelationResult {
    pub fn max_imag(&self) -> f64 {
        self.values.iter().flatten().zip(self.defined.iter().flatten()).filter(|(_, &d)| d).fold(0.0, |m, (v, _)| m.max(v.im.abs()))
    }
}

/// `G⁽⁰⁾ = (s₃/2 − |s₂|², −s₂², −s₃ s₂)`.
pub fn g_initial(s: &[C64]) -> [C64; 3] {
    [s[2] * 0.5 - s[1].norm_sqr(), -s[1] * s[1], -s[2] * s[1]]
}

/// `J⁽⁰⁾ = −s₃ s / 2`.
pub fn j_initial(s: &[C64]) -> [C64; 3] {
    let h = -s[2] * 0.5;
    [h * s[0], h * s[1], h * s[2]]
}

/// `ν(t) = (0, 0, γ(t)/4) − C*(t)`.
pub fn nu(model: &QubitModel, gen: &PeriodicGenerator, t: f64) -> [C64; 3] {
    let c = gen.c_at(t);
    [-c[0].conj(), -c[1].conj(), C64::new(model.rate(t) / 4.0, 0.0) - c[2].conj()]
}

fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let workers = thread::available_parallelism().map_or(1, |w| w.get()).min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let chunks: Vec<Result<Vec<T>>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                scope.spawn(move || (w..n).step_by(workers).map(f).collect::<Result<Vec<T>>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("correlation worker panicked")).collect()
    });
    let mut parts: Vec<std::vec::IntoIter<T>> = Vec::with_capacity(workers);
    for c in chunks {
        parts.push(c?.into_iter());
    }
    Ok((0..n).map(|i| parts[i % workers].next().unwrap()).collect())
}

/// Integrate `dX/dτ = A(τ_c + τ) X` column-wise for `X = [x₀…]` and return
/// the stacked state at every requested delay (delays sorted ascending, ≥ 0).
fn regress(gen: &PeriodicGenerator, tau_c: f64, x0: Vec<C64>, delays: &[f64], ode: OdeOptions) -> Result<Vec<Vec<C64>>> {
    let d = gen.dim();
    let blocks = x0.len() / d;
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| -> Result<()> {
        let op = gen.operator_at(tau_c + t);
        for b in 0..blocks {
            op.apply(&y[b * d..(b + 1) * d], &mut dy[b * d..(b + 1) * d]);
        }
        Ok(())
    };
    let positive: Vec<f64> = delays.iter().copied().filter(|&t| t > 0.0).collect();
    let mut out: Vec<Vec<C64>> = delays.iter().take_while(|&&t| t <= 0.0).map(|_| x0.clone()).collect();
    if !positive.is_empty() {
        let mut solver = Dopri5::new(x0.len(), rhs, ode);
        out.extend(solver.integrate(0.0, &x0, &positive, OutputMode::Land)?.states);
    }
    Ok(out)
}

fn sorted_delays(tau: &[f64]) -> Vec<f64> {
    let mut d: Vec<f64> = tau.iter().map(|t| t.abs()).collect();
    d.sort_by(f64::total_cmp);
    d.dedup();
    d
}

fn check_grid(tau: &[f64], tau_c: &[f64]) -> Result<()> {
    if tau.iter().chain(tau_c).any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("correlation grid must be finite".into()));
    }
    Ok(())
}

fn series(state: &QuasiStationaryState) -> Result<FourierSeries> {
    state.fourier((state.grid_points() - 2) / 2)
}

/// First-order correlation `g¹_α(τ, τ_c)` without the `e^{iω₀τ}` carrier.
/// Negative delays use `G₁(−|τ|) = G₁(|τ|)*`.
pub fn g1_correlation(
    model: &QubitModel,
    state: &QuasiStationaryState,
    tau: &[f64],
    tau_c: &[f64],
    channel: Channel,
    ode: OdeOptions,
) -> Result<CorrelationResult> {
    check_grid(tau, tau_c)?;
    let gen = model.generator()?;
    let chan = model.channel();
    let s_of = series(state)?;
    let delays = sorted_delays(tau);
    let rows = par_map(tau_c.len(), |c| {
        let tc = tau_c[c];
        let s0 = s_of.eval(tc);
        let reg = regress(&gen, tc, g_initial(&s0).to_vec(), &delays, ode)?;
        let mut g = Vec::with_capacity(tau.len());
        let mut el = Vec::with_capacity(tau.len());
        let mut val = Vec::with_capacity(tau.len());
        for &t in tau {
            let k = delays.partition_point(|&x| x < t.abs());
            let gv = if t < 0.0 { reg[k].iter().map(|z| z.conj()).collect() } else { reg[k].clone() };
            let e = elastic_g1(&chan, channel, tc, &s0, tc + t, &s_of.eval(tc + t));
            let inel = chan.coupling.at(tc + t).conj() * chan.coupling.at(tc) * gv[0];
            el.push(e);
            val.push(e + inel);
            g.push(gv);
        }
        Ok((g, el, val))
    })?;
    let mut out = CorrelationResult {
        channel,
        tau: tau.to_vec(),
        tau_c: tau_c.to_vec(),
        g: Vec::new(),
        j: None,
        elastic: Some(Vec::new()),
        values: Vec::new(),
        defined: vec![vec![true; tau.len()]; tau_c.len()],
    };
    for (g, e, v) in rows {
        out.g.push(g);
        out.elastic.as_mut().unwrap().push(e);
        out.values.push(v);
    }
    Ok(out)
}

fn elastic_g1(chan: &ScatteringChannel, channel: Channel, t0: f64, s0: &[C64], t1: f64, s1: &[C64]) -> C64 {
    let f = chan.flux;
    if f == 0.0 {
        return ZERO;
    }
    let (a0, a1) = (chan.reflection(t0, s0), chan.reflection(t1, s1));
    match channel {
        Channel::L => a1.conj() * a0 * f,
        Channel::R => (a1 + 1.0).conj() * (a0 + 1.0) * f,
    }
}

/// Second-order coherence `g²_αα(τ, τ_c)`. Negative delays are evaluated
/// as `g²(|τ|, τ_c − |τ|)`.
pub fn g2_correlation(
    model: &QubitModel,
    state: &QuasiStationaryState,
    tau: &[f64],
    tau_c: &[f64],
    channel: Channel,
    ode: OdeOptions,
) -> Result<CorrelationResult> {
    check_grid(tau, tau_c)?;
    let gen = model.generator()?;
    let chan = model.channel();
    let s_of = series(state)?;
    let floor = FLUX_FLOOR * (1.0 + chan.flux);
    let flux = |t: f64, s: &[C64]| {
        let (l, r, i) = flux_at(&chan, t, s);
        match channel {
            Channel::L => l + i,
            Channel::R => r + i,
        }
    };
    let nonneg: Vec<f64> = {
        let mut d: Vec<f64> = tau.iter().copied().filter(|&t| t >= 0.0).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    };
    let assemble = |t0: f64, s0: &[C64], t1: f64, gj: &[C64]| -> (C64, bool) {
        let s1 = s_of.eval(t1);
        let (f0, f1) = (flux(t0, s0), flux(t1, &s1));
        if !(f0 > floor && f1 > floor) {
            return (C64::new(f64::NAN, 0.0), false);
        }
        let (n0, n1) = (nu(model, &gen, t0), nu(model, &gen, t1));
        let (g, j) = (&gj[..3], &gj[3..]);
        let excess = match channel {
            Channel::L => n0[2] * n1[2] * j[2] * 2.0,
            Channel::R => {
                let dj: C64 = (0..3).map(|k| n1[k] * j[k]).sum();
                let dg: C64 = (0..3).map(|k| n1[k] * g[k]).sum();
                let x = n0[1] * dg;
                n0[2] * dj * 2.0 + x + x.conj()
            }
        };
        (excess / (f0 * f1) + 1.0, true)
    };
    let rows = par_map(tau_c.len(), |c| {
        let tc = tau_c[c];
        let s0 = s_of.eval(tc);
        let mut x0 = g_initial(&s0).to_vec();
        x0.extend(j_initial(&s0));
        let reg = regress(&gen, tc, x0, &nonneg, ode)?;
        let mut g = Vec::with_capacity(tau.len());
        let mut j = Vec::with_capacity(tau.len());
        let mut val = Vec::with_capacity(tau.len());
        let mut def = Vec::with_capacity(tau.len());
        for &t in tau {
            let (start, gj) = if t >= 0.0 {
                (tc, reg[nonneg.partition_point(|&x| x < t)].clone())
            } else {
                let start = tc + t;
                let s = s_of.eval(start);
                let mut y0 = g_initial(&s).to_vec();
                y0.extend(j_initial(&s));
                (start, regress(&gen, start, y0, &[-t], ode)?.pop().unwrap())
            };
            let (v, ok) = assemble(start, &s_of.eval(start), start + t.abs(), &gj);
            g.push(gj[..3].to_vec());
            j.push(gj[3..].to_vec());
            val.push(v);
            def.push(ok);
        }
        Ok((g, j, val, def))
    })?;
    let mut out = CorrelationResult {
        channel,
        tau: tau.to_vec(),
        tau_c: tau_c.to_vec(),
        g: Vec::new(),
        j: Some(Vec::new()),
        elastic: None,
        values: Vec::new(),
        defined: Vec::new(),
    };
    for (g, j, v, d) in rows {
        out.g.push(g);
        out.j.as_mut().unwrap().push(j);
        out.values.push(v);
        out.defined.push(d);
    }
    Ok(out)
}
