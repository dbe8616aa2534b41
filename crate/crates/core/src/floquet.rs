//! Quasi-stationary solutions from a single period of integration.
//!
//! With the fundamental matrix `O(t)` and the particular solution `c(t)`
//! (`c(0) = 0`), the periodic attractor is
//! `ρ(τ) = O(τ) (1 − O(T))⁻¹ c(T) + c(τ)`. Small systems form `O` densely;
//! large ones solve the periodicity condition with GMRES, one period of
//! homogeneous propagation per matrix-vector product.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expansions::SINGULAR_RCOND;
use crate::liouvillian::{Basis, DensityVector, OperatorCache, PeriodicGenerator, DENSE_LIMIT};
use crate::numerics::dense::{self, Lu};
use crate::numerics::eigen::{self, EigenSystem};
use crate::numerics::fourier::{self, period_grid, FourierSeries};
use crate::numerics::krylov::{gmres, GmresOptions};
use crate::numerics::ode::{Dopri5, OdeOptions, OdeStats, OutputMode};
use crate::numerics::{CMatrix, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy)]
pub struct FloquetOptions {
    /// Samples per period (the endpoint is stored in addition).
    pub grid_points: usize,
    pub ode: OdeOptions,
    /// Double the grid until trigonometric interpolation of the coarse
    /// samples reproduces the fine ones within `refine_tol`.
    pub refine_grid: bool,
    pub refine_tol: f64,
    pub max_grid_points: usize,
    /// Largest dimension handled with a dense fundamental matrix.
    pub dense_limit: usize,
    pub gmres: GmresOptions,
    /// Matrix-free route: stop once `‖ρ(T) − ρ(0)‖_∞` falls below this.
    pub periodicity_tol: f64,
    pub max_sweeps: usize,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        Self {
            grid_points: 512,
            ode: OdeOptions::default(),
            refine_grid: true,
            refine_tol: 1e-8,
            max_grid_points: 8192,
            dense_limit: 64,
            gmres: GmresOptions::default(),
            periodicity_tol: 1e-9,
            max_sweeps: 60,
        }
    }
}

/// `O(t)` on a uniform grid over one period.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    pub period: f64,
    pub times: Vec<f64>,
    pub samples: Vec<CMatrix>,
    /// Particular solution `c(t)` with `c(0) = 0` on the same grid.
    pub particular: Vec<Vec<C64>>,
    pub stats: OdeStats,
}

impl FundamentalSolution {
    pub fn monodromy(&self) -> &CMatrix {
        self.samples.last().expect("non-empty grid")
    }

    /// Slowest decay rate `−ln max|μ| / T` over the monodromy eigenvalues.
    pub fn slowest_rate(&self) -> Result<f64> {
        let ev = eigen::eigenvalues(self.monodromy())?;
        let rho = ev.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        Ok(-rho.ln() / self.period)
    }
}

fn rhs_for<'a>(gen: &'a PeriodicGenerator, columns: usize, inhomogeneous: bool) -> impl FnMut(f64, &[C64], &mut [C64]) -> Result<()> + 'a {
    let d = gen.dim();
    let mut cache = OperatorCache::new(gen);
    move |t, y, dy| {
        let op = cache.at(t);
        for c in 0..columns {
            op.apply(&y[c * d..(c + 1) * d], &mut dy[c * d..(c + 1) * d]);
        }
        if inhomogeneous {
            let last = &mut dy[(columns - 1) * d..];
            last.iter_mut().zip(&op.c).for_each(|(o, v)| *o += v);
        }
        Ok(())
    }
}

/// Integrate `dO/dt = A O`, `O(0) = 1`, together with `dc/dt = A c + C`, `c(0) = 0`.
pub fn fundamental_solution(gen: &PeriodicGenerator, grid_points: usize, ode: OdeOptions) -> Result<FundamentalSolution> {
    let d = gen.dim();
    let period = gen.period();
    let times = period_grid(period, grid_points);
    // columns 0..d hold O, the last holds c
    let mut y0 = vec![ZERO; d * (d + 1)];
    for i in 0..d {
        y0[i * d + i] = C64::new(1.0, 0.0);
    }
    let mut solver = Dopri5::new(d * (d + 1), rhs_for(gen, d + 1, true), ode);
    let traj = solver.integrate(0.0, &y0, &times[1..], OutputMode::Land)?;
    let mut samples = vec![dense::identity(d)];
    let mut particular = vec![vec![ZERO; d]];
    for s in &traj.states {
        samples.push(CMatrix::from_fn(d, d, |i, j| s[j * d + i]));
        particular.push(s[d * d..].to_vec());
    }
    Ok(FundamentalSolution { period, times, samples, particular, stats: traj.stats })
}

/// Floquet form `O(t) = P(t) e^{Bt}` of a fundamental solution.
#[derive(Debug, Clone)]
pub struct FloquetDecomposition {
    pub period: f64,
    pub b: CMatrix,
    /// Eigen-decomposition of B (exponents `b_j`, vectors `χ_r^j`, `χ_l^j`).
    pub exponents: EigenSystem,
    pub times: Vec<f64>,
    pub p: Vec<CMatrix>,
    /// `max_j exp(−Re b_j T)`: growth of `e^{−Bt}` over one period.
    pub p_growth: f64,
}

impl FloquetDecomposition {
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }
}

pub fn floquet_decompose(fund: &FundamentalSolution) -> Result<FloquetDecomposition> {
    let (b, exponents) = eigen::matrix_log_over_period(fund.monodromy(), fund.period)?;
    let p = fund
        .times
        .iter()
        .zip(&fund.samples)
        .map(|(&t, o)| o * &exponents.map(|bj| (-bj * t).exp()))
        .collect();
    let p_growth = exponents.values.iter().fold(1.0f64, |m, bj| m.max((-bj.re * fund.period).exp()));
    Ok(FloquetDecomposition { period: fund.period, b, exponents, times: fund.times.clone(), p, p_growth })
}

/// Decomposition of a time-independent generator: `B = A`, `P ≡ 1`.
pub fn static_decomposition(gen: &PeriodicGenerator, grid_points: usize) -> Result<FloquetDecomposition> {
    let b = gen.a_dense(0.0);
    let exponents = eigen::eig_biorthonormal(&b)?.sorted();
    let times = period_grid(gen.period(), grid_points);
    let p = vec![dense::identity(gen.dim()); times.len()];
    Ok(FloquetDecomposition { period: gen.period(), b, exponents, times, p, p_growth: 1.0 })
}

/// Floquet decomposition sampled on `grid_points` intervals per period.
pub fn decompose_on_grid(gen: &PeriodicGenerator, grid_points: usize, ode: OdeOptions) -> Result<FloquetDecomposition> {
    if gen.is_static() {
        static_decomposition(gen, grid_points)
    } else {
        floquet_decompose(&fundamental_solution(gen, grid_points, ode)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Time-independent generator: `−A⁻¹C`.
    Static,
    /// Dense fundamental matrix.
    Dense,
    /// GMRES on the periodicity condition.
    MatrixFree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsDiagnostics {
    pub method: SolveMethod,
    /// Condition number of `1 − O(T)` (dense route) or of `A` (static route).
    pub condition: f64,
    /// `‖ρ(T) − ρ(0)‖_∞` of the returned samples.
    pub periodicity_error: f64,
    pub grid_points: usize,
    /// Largest change between successive grid refinements.
    pub refinement_change: Option<f64>,
    pub gmres_iterations: usize,
    pub gmres_residual: f64,
    /// Slowest Floquet decay rate (dense: exact; matrix-free: Ritz estimate).
    pub slowest_rate: Option<f64>,
    pub rhs_evals: usize,
}

/// Periodic attractor sampled on `t_k = kT/M`, `k = 0..=M`.
#[derive(Debug, Clone)]
pub struct QuasiStationaryState {
    pub period: f64,
    pub times: Vec<f64>,
    pub samples: Vec<Vec<C64>>,
    pub basis: Arc<Basis>,
    pub diagnostics: QsDiagnostics,
}

impl QuasiStationaryState {
    pub fn grid_points(&self) -> usize {
        self.times.len() - 1
    }

    /// Samples over one period without the duplicated endpoint.
    pub fn period_samples(&self) -> &[Vec<C64>] {
        &self.samples[..self.samples.len() - 1]
    }

    pub fn density(&self, k: usize) -> DensityVector {
        DensityVector { values: self.samples[k].clone(), basis: self.basis.clone() }
    }

    pub fn average(&self) -> Vec<C64> {
        fourier::period_average(self.period_samples())
    }

    pub fn fourier(&self, m_max: usize) -> Result<FourierSeries> {
        fourier::fourier_coefficients(&self.times, &self.samples, self.period, m_max)
    }

    /// Trigonometric interpolation between grid points.
    pub fn at(&self, t: f64) -> Vec<C64> {
        fourier::trig_interpolate(self.period_samples(), self.period, t.rem_euclid(self.period))
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }
}

/// Assemble `ρ(τ) = O(τ) (1 − O(T))⁻¹ c(T) + c(τ)` from a dense fundamental solution.
pub fn quasi_stationary(fund: &FundamentalSolution, basis: Arc<Basis>) -> Result<QuasiStationaryState> {
    let d = fund.monodromy().nrows();
    let m = dense::sub(&dense::identity(d), fund.monodromy());
    let lu = Lu::new(&m)?;
    if lu.rcond < 1e-14 {
        return Err(Error::Singular(format!("1 − O(T) has rcond {:e}", lu.rcond)));
    }
    let x0 = lu.solve_vec(fund.particular.last().unwrap());
    let samples: Vec<Vec<C64>> = fund
        .samples
        .iter()
        .zip(&fund.particular)
        .map(|(o, c)| dense::mat_vec(o, &x0).iter().zip(c).map(|(a, b)| a + b).collect())
        .collect();
    let periodicity_error = dense::max_abs_diff(&samples[0], samples.last().unwrap());
    Ok(QuasiStationaryState {
        period: fund.period,
        times: fund.times.clone(),
        samples,
        basis,
        diagnostics: QsDiagnostics {
            method: SolveMethod::Dense,
            condition: 1.0 / lu.rcond,
            periodicity_error,
            grid_points: fund.times.len() - 1,
            refinement_change: None,
            gmres_iterations: 0,
            gmres_residual: 0.0,
            slowest_rate: fund.slowest_rate().ok(),
            rhs_evals: fund.stats.rhs_evals,
        },
    })
}

/// Propagate a single vector over `[0, T]`, optionally with the inhomogeneity,
/// returning the samples on `outputs` (which must end at T).
pub fn propagate(
    gen: &PeriodicGenerator,
    x0: &[C64],
    inhomogeneous: bool,
    outputs: &[f64],
    ode: OdeOptions,
) -> Result<(Vec<Vec<C64>>, OdeStats)> {
    let mut solver = Dopri5::new(gen.dim(), rhs_for(gen, 1, inhomogeneous), ode);
    let traj = solver.integrate(0.0, x0, outputs, OutputMode::Land)?;
    Ok((traj.states, traj.stats))
}

fn static_state(gen: &PeriodicGenerator, grid_points: usize) -> Result<QuasiStationaryState> {
    let op = gen.operator_at(0.0);
    let solver = op.factor()?;
    let x: Vec<C64> = if solver.rcond >= SINGULAR_RCOND {
        solver.solve(&op.c).into_iter().map(|z| -z).collect()
    } else if gen.dim() <= DENSE_LIMIT {
        ground_state_limit(&op.dense(), &op.c)?
    } else {
        return Err(Error::Singular(format!("static generator has rcond {:e}", solver.rcond)));
    };
    let times = period_grid(gen.period(), grid_points);
    Ok(QuasiStationaryState {
        period: gen.period(),
        samples: vec![x; times.len()],
        times,
        basis: gen.basis().clone(),
        diagnostics: QsDiagnostics {
            method: SolveMethod::Static,
            condition: 1.0 / solver.rcond,
            periodicity_error: 0.0,
            grid_points,
            refinement_change: None,
            gmres_iterations: 0,
            gmres_residual: 0.0,
            slowest_rate: None,
            rhs_evals: 0,
        },
    })
}

/// Long-time limit from the ground state (`x = 0`) when `A` has conserved
/// modes: `−A^# C`, provided C does not feed the null space.
fn ground_state_limit(a: &CMatrix, c: &[C64]) -> Result<Vec<C64>> {
    let es = eigen::eig_biorthonormal(a)?;
    let scale = dense::norm1(a).max(f64::MIN_POSITIVE);
    let mut x = vec![ZERO; a.nrows()];
    for j in 0..es.dim() {
        let w = dense::dot(&es.left_vec(j), c);
        if es.values[j].norm() < 1e-9 * scale {
            if w.norm() > 1e-9 * dense::norm_inf(c).max(1.0) {
                return Err(Error::Singular("inhomogeneity drives a conserved mode".into()));
            }
            continue;
        }
        let coef = -w / es.values[j];
        for (xi, r) in x.iter_mut().zip(es.right_vec(j)) {
            *xi += coef * r;
        }
    }
    Ok(x)
}

/// One period of the affine flow from `x0`, sampled on `times` (which start at 0)
/// through the integrator's continuous extension.
fn sweep(gen: &PeriodicGenerator, x0: &[C64], times: &[f64], ode: OdeOptions) -> Result<(Vec<Vec<C64>>, OdeStats)> {
    let mut solver = Dopri5::new(gen.dim(), rhs_for(gen, 1, true), ode);
    let traj = solver.integrate(0.0, x0, &times[1..], OutputMode::Interpolate)?;
    let mut samples = Vec::with_capacity(times.len());
    samples.push(x0.to_vec());
    samples.extend(traj.states);
    Ok((samples, traj.stats))
}

/// Periodic orbit by repeated one-period sweeps from the instantaneous steady
/// state. When successive corrections shrink by less than `SLOW_CONTRACTION`,
/// the correction is instead solved from `(1 − O(T)) δ = ρ(T) − ρ(0)` by GMRES.
fn matrix_free_orbit(gen: &PeriodicGenerator, opts: &FloquetOptions, times: &[f64]) -> Result<(Vec<Vec<C64>>, QsDiagnostics)> {
    const SLOW_CONTRACTION: f64 = 0.2;
    let d = gen.dim();
    let period = gen.period();
    let mut x = gen.instantaneous_steady_state(0.0).unwrap_or_else(|_| vec![ZERO; d]);
    if x.iter().any(|z| !z.is_finite()) {
        x = vec![ZERO; d];
    }
    let mut diag = QsDiagnostics {
        method: SolveMethod::MatrixFree,
        condition: f64::NAN,
        periodicity_error: f64::INFINITY,
        grid_points: times.len() - 1,
        refinement_change: None,
        gmres_iterations: 0,
        gmres_residual: 0.0,
        slowest_rate: None,
        rhs_evals: 0,
    };
    let mut prev = f64::INFINITY;
    let mut fresh_gmres = false;
    for _ in 0..opts.max_sweeps {
        let (samples, stats) = sweep(gen, &x, times, opts.ode)?;
        diag.rhs_evals += stats.rhs_evals;
        let end = samples.last().unwrap();
        let dx = dense::max_abs_diff(end, &x);
        if !fresh_gmres && prev.is_finite() && dx > 0.0 && dx < prev {
            diag.slowest_rate = Some(-(dx / prev).ln() / period);
        }
        if dx <= opts.periodicity_tol {
            diag.periodicity_error = dx;
            return Ok((samples, diag));
        }
        let slow = prev.is_finite() && dx > SLOW_CONTRACTION * prev && dx > 10.0 * opts.periodicity_tol;
        prev = dx;
        let r: Vec<C64> = end.iter().zip(&x).map(|(a, b)| a - b).collect();
        x = end.clone();
        fresh_gmres = false;
        if slow {
            let mut evals = 0;
            let mut apply = |v: &[C64], out: &mut [C64]| -> Result<()> {
                let (s, st) = propagate(gen, v, false, &[period], opts.ode)?;
                evals += st.rhs_evals;
                for i in 0..d {
                    out[i] = v[i] - s[0][i];
                }
                Ok(())
            };
            let rnorm = dense::norm2(&r);
            let tol = (0.1 * opts.periodicity_tol / rnorm).max(10.0 * opts.ode.rtol).max(opts.gmres.tol);
            let res = gmres(&mut apply, &r, None, GmresOptions { tol, ..opts.gmres })?;
            diag.rhs_evals += evals;
            diag.gmres_iterations += res.iterations;
            diag.gmres_residual = res.residual;
            let radius = res.ritz.iter().fold(0.0f64, |m, th| m.max((C64::new(1.0, 0.0) - th).norm()));
            if radius > 0.0 && radius < 1.0 {
                diag.slowest_rate = Some(-radius.ln() / period);
            }
            // the sweep ended at x + r, i.e. ρ(T) from the old start; δ corrects that start
            for i in 0..d {
                x[i] += res.x[i] - r[i];
            }
            prev = f64::INFINITY;
            fresh_gmres = true;
        }
    }
    Err(Error::NoConvergence { residual: prev, iterations: opts.max_sweeps })
}

fn max_interp_change(coarse: &[Vec<C64>], fine: &[Vec<C64>]) -> f64 {
    // fine has twice the samples; compare on the odd points
    let m = coarse.len();
    let Ok(series) = fourier::resample(coarse, (m - 2) / 2, 2 * m) else { return f64::INFINITY };
    (1..2 * m).step_by(2).fold(0.0, |w, k| w.max(dense::max_abs_diff(&series[k], &fine[k])))
}

fn subsample(samples: &[Vec<C64>], stride: usize) -> Vec<Vec<C64>> {
    samples.iter().step_by(stride).cloned().collect()
}

/// Quasi-stationary state with automatic choice of route and grid.
pub fn solve_quasi_stationary(gen: &PeriodicGenerator, opts: &FloquetOptions) -> Result<QuasiStationaryState> {
    if opts.grid_points < 4 {
        return Err(Error::InvalidArgument("at least 4 grid points are required".into()));
    }
    if gen.is_static() {
        return static_state(gen, opts.grid_points);
    }
    let period = gen.period();
    let basis = gen.basis().clone();

    if gen.dim() > opts.dense_limit {
        // one sweep on the finest grid; coarser grids are its subsamples
        let mut finest = opts.grid_points;
        if opts.refine_grid {
            while finest * 2 <= opts.max_grid_points {
                finest *= 2;
            }
        }
        let fine_times = period_grid(period, finest);
        let (fine, mut diag) = matrix_free_orbit(gen, opts, &fine_times)?;
        let mut m = opts.grid_points;
        let mut change = None;
        if opts.refine_grid {
            let mut c = f64::INFINITY;
            while m < finest {
                let coarse = subsample(&fine, finest / m);
                let finer = subsample(&fine, finest / (2 * m));
                c = max_interp_change(&coarse[..m], &finer);
                m *= 2;
                if c < opts.refine_tol {
                    break;
                }
            }
            change = Some(c);
        }
        diag.grid_points = m;
        diag.refinement_change = change;
        return Ok(QuasiStationaryState {
            period,
            times: period_grid(period, m),
            samples: subsample(&fine, finest / m),
            basis,
            diagnostics: diag,
        });
    }

    let solve_on = |m: usize| -> Result<QuasiStationaryState> {
        let fund = fundamental_solution(gen, m, opts.ode)?;
        quasi_stationary(&fund, basis.clone())
    };
    let mut m = opts.grid_points;
    let mut state = solve_on(m)?;
    if opts.refine_grid {
        let mut change = f64::INFINITY;
        while m * 2 <= opts.max_grid_points {
            let finer = solve_on(m * 2)?;
            change = max_interp_change(state.period_samples(), &finer.samples);
            state = finer;
            m *= 2;
            if change < opts.refine_tol {
                break;
            }
        }
        state.diagnostics.refinement_change = Some(change);
    }
    Ok(state)
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub times: Vec<f64>,
    /// Samples over the final period.
    pub samples: Vec<Vec<C64>>,
    pub periods: usize,
    /// `‖ρ(nT) − ρ((n−1)T)‖_∞`.
    pub residual: f64,
}

impl OracleResult {
    pub fn converged(&self, tol: f64) -> bool {
        self.residual < tol
    }
}

/// Number of periods needed to decay `e^{-40}` at the slowest Floquet rate.
pub fn oracle_periods(slowest_rate: f64, period: f64) -> usize {
    let n = (40.0 / (slowest_rate * period)).ceil();
    if n.is_finite() && n >= 0.0 {
        (n as usize + 5).min(1_000_000)
    } else {
        1_000_000
    }
}

/// Long-time integration from the ground state over many periods.
pub fn brute_force_oracle(
    gen: &PeriodicGenerator,
    grid_points: usize,
    slowest_rate: f64,
    ode: OdeOptions,
) -> Result<OracleResult> {
    let d = gen.dim();
    let period = gen.period();
    let periods = oracle_periods(slowest_rate, period);
    let mut solver = Dopri5::new(d, rhs_for(gen, 1, true), ode);
    let mut y = vec![ZERO; d];
    for n in 0..periods - 1 {
        solver.advance(n as f64 * period, &mut y, (n + 1) as f64 * period)?;
    }
    let t0 = (periods - 1) as f64 * period;
    let local = period_grid(period, grid_points);
    let outputs: Vec<f64> = local[1..].iter().map(|t| t0 + t).collect();
    let start = y.clone();
    let traj = solver.integrate(t0, &start, &outputs, OutputMode::Land)?;
    let mut samples = vec![start.clone()];
    samples.extend(traj.states);
    let residual = dense::max_abs_diff(samples.last().unwrap(), &start);
    Ok(OracleResult { times: local, samples, periods, residual })
}
