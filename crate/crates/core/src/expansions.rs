//! Approximations to the quasi-stationary state: adiabatic following of the
//! instantaneous steady state, the high-frequency hierarchy around the
//! period-averaged generator, and the qubit's weak-probe limit.

use crate::error::{Error, Result};
use crate::liouvillian::{dissipation_gap, PeriodicGenerator, StaticSolver, DENSE_LIMIT};
use crate::models::QubitModel;
use crate::numerics::fourier::{self, period_grid};
use crate::numerics::ode::{Dopri5, OdeOptions, OutputMode};
use crate::numerics::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Points whose generator has a smaller reciprocal condition are treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AdiabaticExpansion {
    /// `t_k = kT/M`, `k = 0..=M`.
    pub times: Vec<f64>,
    /// Instantaneous steady state `−A⁻¹C`.
    pub order0: Vec<Vec<C64>>,
    /// First correction added: `ρ_inst + A⁻¹ dρ_inst/dt`.
    pub order1: Vec<Vec<C64>>,
    /// Points where `A(t)` was numerically singular; their values are interpolated.
    pub singular: Vec<bool>,
    /// `γ_min(A(t))`, when computed.
    pub gamma_min: Option<Vec<f64>>,
}

impl AdiabaticExpansion {
    /// Where the expansion is expected to hold: `γ_min(t) > Ω`.
    pub fn validity(&self, omega: f64) -> Option<Vec<bool>> {
        self.gamma_min.as_ref().map(|g| g.iter().map(|&x| x > omega).collect())
    }
}

/// Linear interpolation over flagged points, treating the grid as periodic.
fn fill_flagged(values: &mut [Vec<C64>], flagged: &[bool]) -> Result<()> {
    let m = values.len();
    if flagged.iter().all(|&f| f) {
        return Err(Error::Singular("generator is singular on the whole grid".into()));
    }
    for k in 0..m {
        if !flagged[k] {
            continue;
        }
        let mut lo = 1;
        while flagged[(k + m - lo) % m] {
            lo += 1;
        }
        let mut hi = 1;
        while flagged[(k + hi) % m] {
            hi += 1;
        }
        let (a, b) = (values[(k + m - lo) % m].clone(), values[(k + hi) % m].clone());
        let w = lo as f64 / (lo + hi) as f64;
        values[k] = a.iter().zip(&b).map(|(x, y)| x * (1.0 - w) + y * w).collect();
    }
    Ok(())
}

/// Adiabatic approximation on `grid_points` samples per period. The validity
/// mask needs dense eigenvalues and is only computed when requested.
pub fn adiabatic_expansion(gen: &PeriodicGenerator, grid_points: usize, with_gamma_min: bool) -> Result<AdiabaticExpansion> {
    let period = gen.period();
    let times = period_grid(period, grid_points);
    let keep_solvers = gen.dim() <= DENSE_LIMIT;
    let mut solvers: Vec<Option<StaticSolver>> = Vec::with_capacity(grid_points);
    let mut order0 = Vec::with_capacity(grid_points);
    let mut singular = Vec::with_capacity(grid_points);
    let mut gamma_min = with_gamma_min.then(Vec::new);
    for &t in &times[..grid_points] {
        let op = gen.operator_at(t);
        let solver = op.factor()?;
        let flag = !(solver.rcond >= SINGULAR_RCOND);
        let x: Vec<C64> = if flag { vec![ZERO; gen.dim()] } else { solver.solve(&op.c).into_iter().map(|z| -z).collect() };
        singular.push(flag);
        order0.push(x);
        if let Some(g) = gamma_min.as_mut() {
            g.push(dissipation_gap(&op.dense())?);
        }
        solvers.push(if keep_solvers { Some(solver) } else { None });
    }
    fill_flagged(&mut order0, &singular)?;
    let deriv = fourier::periodic_derivative(&order0, period);
    let mut order1 = Vec::with_capacity(grid_points);
    for (k, &t) in times[..grid_points].iter().enumerate() {
        if singular[k] {
            order1.push(vec![ZERO; gen.dim()]);
            continue;
        }
        let corr = match &solvers[k] {
            Some(s) => s.solve(&deriv[k]),
            None => gen.operator_at(t).factor()?.solve(&deriv[k]),
        };
        order1.push(order0[k].iter().zip(&corr).map(|(a, b)| a + b).collect());
    }
    fill_flagged(&mut order1, &singular)?;
    order0.push(order0[0].clone());
    order1.push(order1[0].clone());
    if let Some(g) = gamma_min.as_mut() {
        g.push(g[0]);
    }
    singular.push(singular[0]);
    Ok(AdiabaticExpansion { times, order0, order1, singular, gamma_min })
}

#[derive(Debug, Clone)]
pub struct HighFrequencyExpansion {
    pub times: Vec<f64>,
    /// Time-independent terms `ρ̄⁽ⁿ⁾`.
    pub mean_terms: Vec<Vec<C64>>,
    /// Zero-mean oscillating terms `ρ̃⁽ⁿ⁾` on the grid (`ρ̃⁽⁰⁾ = 0`).
    pub oscillating_terms: Vec<Vec<Vec<C64>>>,
    /// `Σ_n (ρ̄⁽ⁿ⁾ + ρ̃⁽ⁿ⁾)` up to the requested order.
    pub total: Vec<Vec<C64>>,
}

fn mean(v: &[Vec<C64>]) -> Vec<C64> {
    fourier::period_average(v)
}

/// Hierarchy in powers of 1/Ω built around the period-averaged generator.
pub fn high_frequency_expansion(gen: &PeriodicGenerator, order: usize, grid_points: usize) -> Result<HighFrequencyExpansion> {
    let period = gen.period();
    let d = gen.dim();
    let times = period_grid(period, grid_points);
    let coefs: Vec<Vec<C64>> = times[..grid_points].iter().map(|&t| gen.coefficients(t)).collect();
    let avg = mean(&coefs);
    let osc: Vec<Vec<C64>> = coefs.iter().map(|c| c.iter().zip(&avg).map(|(a, b)| a - b).collect()).collect();
    let abar = gen.operator(&avg);
    let solver = abar.factor()?;
    if solver.rcond < SINGULAR_RCOND {
        return Err(Error::Singular(format!("averaged generator has rcond {:e}", solver.rcond)));
    }
    let tilde_ops: Vec<_> = osc.iter().map(|c| gen.operator(c)).collect();
    let apply_tilde = |k: usize, x: &[C64]| -> Vec<C64> {
        let mut out = vec![ZERO; d];
        tilde_ops[k].apply(x, &mut out);
        out
    };
    let neg_solve = |y: &[C64]| -> Vec<C64> { solver.solve(y).into_iter().map(|z| -z).collect() };

    let mut mean_terms = vec![neg_solve(&abar.c)];
    let mut oscillating_terms = vec![vec![vec![ZERO; d]; grid_points]];
    for n in 1..=order {
        let prev_mean = &mean_terms[n - 1];
        let prev_osc = &oscillating_terms[n - 1];
        let at_prev: Vec<Vec<C64>> = (0..grid_points).map(|k| apply_tilde(k, &prev_osc[k])).collect();
        let at_prev_mean = mean(&at_prev);
        let rhs: Vec<Vec<C64>> = (0..grid_points)
            .map(|k| {
                let mut v = apply_tilde(k, prev_mean);
                if n == 1 {
                    v.iter_mut().zip(&tilde_ops[k].c).for_each(|(a, b)| *a += b);
                } else {
                    let mut abar_x = vec![ZERO; d];
                    abar.apply(&prev_osc[k], &mut abar_x);
                    for i in 0..d {
                        v[i] += abar_x[i] + at_prev[k][i] - at_prev_mean[i];
                    }
                }
                v
            })
            .collect();
        let (rho_osc, _) = fourier::periodic_antiderivative(&rhs, period);
        let forcing: Vec<Vec<C64>> = (0..grid_points).map(|k| apply_tilde(k, &rho_osc[k])).collect();
        mean_terms.push(neg_solve(&mean(&forcing)));
        oscillating_terms.push(rho_osc);
    }
    let mut total: Vec<Vec<C64>> = (0..grid_points)
        .map(|k| {
            let mut v = vec![ZERO; d];
            for n in 0..=order {
                for i in 0..d {
                    v[i] += mean_terms[n][i] + oscillating_terms[n][k][i];
                }
            }
            v
        })
        .collect();
    total.push(total[0].clone());
    for o in oscillating_terms.iter_mut() {
        o.push(o[0].clone());
    }
    Ok(HighFrequencyExpansion { times, mean_terms, oscillating_terms, total })
}

/// Weak-probe qubit coherence `s₂(t)`: the periodic solution of
/// `ds₂/dt = −(γ(t)/2 − iδ(t)) s₂ − i √(πf) g(t)`.
pub fn weak_power_reflection(model: &QubitModel, grid_points: usize, ode: OdeOptions) -> Result<(Vec<f64>, Vec<C64>)> {
    let period = model.period();
    let times = period_grid(period, grid_points);
    let m = *model;
    let drive = (m.flux).sqrt();
    // y[0]: particular solution from 0, y[1]: homogeneous solution from 1
    let rhs = move |t: f64, y: &[C64], dy: &mut [C64]| -> Result<()> {
        let kappa = C64::new(m.rate(t) / 2.0, -m.detuning.eval(t));
        dy[0] = -kappa * y[0] - C64::new(0.0, drive * m.sqrt_pi_g(t));
        dy[1] = -kappa * y[1];
        Ok(())
    };
    let mut solver = Dopri5::new(2, rhs, ode);
    let traj = solver.integrate(0.0, &[ZERO, C64::new(1.0, 0.0)], &times[1..], OutputMode::Land)?;
    let last = traj.states.last().unwrap();
    let denom = C64::new(1.0, 0.0) - last[1];
    if denom.norm() < 1e-14 {
        return Err(Error::Singular("weak-probe propagator has a unit multiplier".into()));
    }
    let y0 = last[0] / denom;
    let mut s2 = vec![y0];
    s2.extend(traj.states.iter().map(|s| s[0] + s[1] * y0));
    Ok((times, s2))
}
