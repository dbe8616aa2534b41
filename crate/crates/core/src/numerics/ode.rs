//! Dormand–Prince 5(4) with the Hairer continuous extension.

use super::{CMatrix, C64};
use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const BETA: f64 = 0.04;
const SAFE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, initial_step: None, max_step: None, max_steps: 200_000_000 }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Sum of the max-norm local error estimates of all accepted steps.
    pub error_estimate: f64,
}

/// How requested output times are reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputMode {
    /// Steps are truncated so that every output time is a step endpoint.
    #[default]
    Land,
    /// Steps run freely; outputs come from the continuous extension.
    Interpolate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub stats: OdeStats,
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    r: [Vec<C64>; 5],
}

impl DenseStep {
    pub fn eval(&self, t: f64, out: &mut [C64]) {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.r;
        for i in 0..out.len() {
            out[i] = r1[i] + (r2[i] + (r3[i] + (r4[i] + r5[i] * th1) * th) * th1) * th;
        }
    }
}

pub struct Dopri5<F> {
    rhs: F,
    opts: OdeOptions,
    dim: usize,
    k: [Vec<C64>; 7],
    ytmp: Vec<C64>,
    ynew: Vec<C64>,
    h: Option<f64>,
    facold: f64,
    pub stats: OdeStats,
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    pub fn new(dim: usize, rhs: F, opts: OdeOptions) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        Self {
            rhs,
            opts,
            dim,
            k: std::array::from_fn(|_| z.clone()),
            ytmp: z.clone(),
            ynew: z,
            h: opts.initial_step,
            facold: 1e-4,
            stats: OdeStats::default(),
        }
    }

    pub fn reset_stats(&mut self) {
        self.stats = OdeStats::default();
    }

    fn eval(&mut self, t: f64, stage: usize, use_tmp: bool) -> Result<()> {
        self.stats.rhs_evals += 1;
        let (y, out) = if use_tmp { (&self.ytmp, &mut self.k[stage]) } else { (&self.ynew, &mut self.k[stage]) };
        (self.rhs)(t, y, out)
    }

    fn scaled_norm(&self, y: &[C64], v: &[C64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            let sc = self.opts.atol + self.opts.rtol * y[i].norm();
            s += (v[i].norm() / sc).powi(2);
        }
        (s / self.dim.max(1) as f64).sqrt()
    }

    fn initial_step(&mut self, t: f64, y: &[C64], span: f64) -> Result<f64> {
        // k[0] holds f(t, y)
        let d0 = self.scaled_norm(y, y);
        let d1 = self.scaled_norm(y, &self.k[0].clone());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span.abs());
        for i in 0..self.dim {
            self.ytmp[i] = y[i] + self.k[0][i] * h0;
        }
        self.eval(t + h0, 1, true)?;
        let diff: Vec<C64> = (0..self.dim).map(|i| self.k[1][i] - self.k[0][i]).collect();
        let d2 = self.scaled_norm(y, &diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        Ok((100.0 * h0).min(h1).min(span.abs()))
    }

    /// Attempt one step of size `h` from (t, y); `k[0]` must hold f(t, y).
    /// Returns the scaled error norm; the candidate is left in `ynew`, `k[6]`.
    fn try_step(&mut self, t: f64, y: &[C64], h: f64) -> Result<f64> {
        let n = self.dim;
        macro_rules! stage {
            ($dst:expr, $c:expr, [$($idx:expr => $a:expr),*]) => {{
                for i in 0..n {
                    let mut acc = y[i];
                    $( acc += self.k[$idx][i] * (h * $a); )*
                    self.ytmp[i] = acc;
                }
                self.eval(t + $c * h, $dst, true)?;
            }};
        }
        stage!(1, C2, [0 => A21]);
        stage!(2, C3, [0 => A31, 1 => A32]);
        stage!(3, C4, [0 => A41, 1 => A42, 2 => A43]);
        stage!(4, C5, [0 => A51, 1 => A52, 2 => A53, 3 => A54]);
        stage!(5, 1.0, [0 => A61, 1 => A62, 2 => A63, 3 => A64, 4 => A65]);
        for i in 0..n {
            self.ynew[i] = y[i]
                + (self.k[0][i] * A71
                    + self.k[2][i] * A73
                    + self.k[3][i] * A74
                    + self.k[4][i] * A75
                    + self.k[5][i] * A76)
                    * h;
        }
        self.eval(t + h, 6, false)?;
        let mut s = 0.0;
        let mut finite = true;
        for i in 0..n {
            let e = (self.k[0][i] * E1
                + self.k[2][i] * E3
                + self.k[3][i] * E4
                + self.k[4][i] * E5
                + self.k[5][i] * E6
                + self.k[6][i] * E7)
                * h;
            self.ytmp[i] = e;
            let sc = self.opts.atol + self.opts.rtol * y[i].norm().max(self.ynew[i].norm());
            s += (e.norm() / sc).powi(2);
            finite &= self.ynew[i].re.is_finite() && self.ynew[i].im.is_finite();
        }
        let err = (s / n.max(1) as f64).sqrt();
        Ok(if finite && err.is_finite() { err } else { f64::INFINITY })
    }

    fn dense_from_accepted(&self, t: f64, y: &[C64], h: f64) -> DenseStep {
        let n = self.dim;
        let mut r: [Vec<C64>; 5] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); n]);
        for i in 0..n {
            let ydiff = self.ynew[i] - y[i];
            let bspl = self.k[0][i] * h - ydiff;
            r[0][i] = y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - self.k[6][i] * h - bspl;
            r[4][i] = (self.k[0][i] * D1
                + self.k[2][i] * D3
                + self.k[3][i] * D4
                + self.k[4][i] * D5
                + self.k[5][i] * D6
                + self.k[6][i] * D7)
                * h;
        }
        DenseStep { t0: t, h, r }
    }

    /// Integrate from (t0, y) to exactly t1, invoking `on_step` with each accepted
    /// step's continuous extension when provided.
    fn run(
        &mut self,
        t0: f64,
        y: &mut [C64],
        t1: f64,
        mut on_step: Option<&mut dyn FnMut(&DenseStep)>,
    ) -> Result<()> {
        assert_eq!(y.len(), self.dim);
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        let mut t = t0;
        self.ytmp.copy_from_slice(y);
        self.stats.rhs_evals += 1;
        (self.rhs)(t, y, &mut self.k[0])?;
        let mut h = match self.h {
            Some(h) => h.abs(),
            None => self.initial_step(t, y, span)?,
        };
        if let Some(hm) = self.opts.max_step {
            h = h.min(hm);
        }
        let eps = 8.0 * f64::EPSILON * t0.abs().max(t1.abs()).max(span.abs());
        loop {
            let remaining = (t1 - t) * dir;
            if remaining <= eps {
                break;
            }
            let last = h >= remaining * (1.0 - 1e-12);
            let hs = if last { remaining } else { h };
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(Error::MaxSteps(self.opts.max_steps));
            }
            let err = self.try_step(t, y, hs * dir)?;
            if err <= 1.0 {
                self.stats.accepted += 1;
                let local = self.ytmp.iter().fold(0.0f64, |m, z| m.max(z.norm()));
                self.stats.error_estimate += local;
                if let Some(cb) = on_step.as_deref_mut() {
                    let d = self.dense_from_accepted(t, y, hs * dir);
                    cb(&d);
                }
                let fac11 = err.powf(0.2 - BETA * 0.75);
                let mut fac = fac11 / self.facold.powf(BETA);
                fac = (fac / SAFE).clamp(0.1, 5.0);
                self.facold = err.max(1e-4);
                let hnew = hs / fac;
                t = if last { t1 } else { t + hs * dir };
                y.copy_from_slice(&self.ynew);
                self.k.swap(0, 6);
                // Keep the controller's step, not the truncated one.
                h = if last { h.max(hnew) } else { hnew };
                if let Some(hm) = self.opts.max_step {
                    h = h.min(hm);
                }
            } else {
                self.stats.rejected += 1;
                let fac11 = if err.is_finite() { err.powf(0.2 - BETA * 0.75) } else { 10.0 };
                h = hs / (fac11 / SAFE).clamp(1.0, 10.0);
                if h < 4.0 * f64::EPSILON * t.abs().max(1e-300) || h < 1e-300 {
                    if err.is_finite() {
                        return Err(Error::StepSizeUnderflow { t, h });
                    }
                    return Err(Error::NonFinite { t });
                }
            }
        }
        self.h = Some(h);
        Ok(())
    }

    /// Advance `y` from `t0` to exactly `t1`.
    pub fn advance(&mut self, t0: f64, y: &mut [C64], t1: f64) -> Result<()> {
        self.run(t0, y, t1, None)
    }

    /// Advance while feeding each step's continuous extension to `on_step`.
    pub fn advance_dense(&mut self, t0: f64, y: &mut [C64], t1: f64, on_step: &mut dyn FnMut(&DenseStep)) -> Result<()> {
        self.run(t0, y, t1, Some(on_step))
    }

    /// Solution at each of the (monotone) `outputs`, starting from (t0, y0).
    pub fn integrate(&mut self, t0: f64, y0: &[C64], outputs: &[f64], mode: OutputMode) -> Result<Trajectory> {
        let mut y = y0.to_vec();
        let mut states = Vec::with_capacity(outputs.len());
        match mode {
            OutputMode::Land => {
                let mut t = t0;
                for &to in outputs {
                    self.advance(t, &mut y, to)?;
                    t = to;
                    states.push(y.clone());
                }
            }
            OutputMode::Interpolate => {
                let mut next = 0;
                while next < outputs.len() && outputs[next] == t0 {
                    states.push(y.clone());
                    next += 1;
                }
                if let Some(&tend) = outputs.last() {
                    let mut buf = vec![C64::new(0.0, 0.0); self.dim];
                    let mut cb = |d: &DenseStep| {
                        let hi = d.t0 + d.h;
                        while next < outputs.len() && (outputs[next] - hi) * d.h.signum() <= 0.0 {
                            d.eval(outputs[next], &mut buf);
                            states.push(buf.clone());
                            next += 1;
                        }
                    };
                    self.run(t0, &mut y, tend, Some(&mut cb))?;
                    while states.len() < outputs.len() {
                        states.push(y.clone());
                    }
                }
            }
        }
        Ok(Trajectory { times: outputs.to_vec(), states, stats: self.stats })
    }
}

/// Trajectory of a matrix-valued linear ODE `dY/dt = G(t) Y + H(t)`.
#[derive(Debug, Clone)]
pub struct MatrixTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub stats: OdeStats,
}

/// Integrate `dY/dt = G(t) Y (+ h(t) 1ᵀ)` for dense generators. `y0` may have any
/// number of columns; the inhomogeneity is added to every column.
pub fn integrate_linear_ode(
    generator: &dyn Fn(f64) -> CMatrix,
    inhomogeneity: Option<&dyn Fn(f64) -> Vec<C64>>,
    y0: &CMatrix,
    t0: f64,
    outputs: &[f64],
    opts: OdeOptions,
) -> Result<MatrixTrajectory> {
    let (d, k) = (y0.nrows(), y0.ncols());
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| -> Result<()> {
        let g = generator(t);
        if g.nrows() != d || g.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: g.nrows() });
        }
        let h = inhomogeneity.map(|f| f(t));
        for c in 0..k {
            let yc = &y[c * d..(c + 1) * d];
            let out = &mut dy[c * d..(c + 1) * d];
            for i in 0..d {
                let mut acc = h.as_ref().map_or(C64::new(0.0, 0.0), |h| h[i]);
                for j in 0..d {
                    acc += g[(i, j)] * yc[j];
                }
                out[i] = acc;
            }
        }
        Ok(())
    };
    let mut flat = vec![C64::new(0.0, 0.0); d * k];
    for c in 0..k {
        for i in 0..d {
            flat[c * d + i] = y0[(i, c)];
        }
    }
    let mut solver = Dopri5::new(d * k, rhs, opts);
    let traj = solver.integrate(t0, &flat, outputs, OutputMode::Land)?;
    let states = traj.states.iter().map(|v| CMatrix::from_fn(d, k, |i, c| v[c * d + i])).collect();
    Ok(MatrixTrajectory { times: traj.times, states, stats: traj.stats })
}
