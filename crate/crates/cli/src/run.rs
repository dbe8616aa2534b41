//! One solve: build the model, find the quasi-stationary state, evaluate
//! every requested observable and write the CSVs followed by the manifest.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use floquet_core::expansions::{adiabatic_expansion, high_frequency_expansion, weak_power_reflection};
use floquet_core::floquet::{brute_force_oracle, decompose_on_grid, solve_quasi_stationary, FloquetOptions, QuasiStationaryState, SolveMethod};
use floquet_core::liouvillian::{DensityVector, PeriodicGenerator};
use floquet_core::models::{KerrModel, Model, ScatteringChannel};
use floquet_core::numerics::fourier::period_grid;
use floquet_core::numerics::ode::OdeOptions;
use floquet_core::numerics::{dense, C64};
use floquet_core::observables::kerr::{self, select_truncation, TruncationChoice};
use floquet_core::observables::{g1_correlation, g2_correlation, kerr_observables, output_fluxes, power_spectrum, reflection_transmission};
use floquet_core::Error as CoreError;
use toml::{Table, Value};

use crate::config::{ConfigErrors, DelayGrid, ExperimentConfig, ModelConfig, OutputSpec, Truncation};
use crate::table::{Cell, CsvTable};

pub const MANIFEST: &str = "manifest.toml";
pub const SUMMARY: &str = "summary.csv";

/// Kerr truncation search: first level, step, ceiling and top-level population bound.
pub const TRUNCATION_SEARCH: (usize, usize, usize, f64) = (24, 8, 56, 1e-8);
/// Larger generators skip the dense γ_min column of the adiabatic output.
pub const GAMMA_MIN_LIMIT: usize = 256;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigErrors),
    Solver { stage: String, source: CoreError },
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            _ => 2,
        }
    }

    fn solver(stage: &str) -> impl FnOnce(CoreError) -> RunError + '_ {
        move |source| RunError::Solver { stage: stage.to_string(), source }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "invalid configuration:\n{e}"),
            RunError::Solver { stage, source } => write!(f, "{stage}: {source}"),
            RunError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigErrors> for RunError {
    fn from(e: ConfigErrors) -> Self {
        RunError::Config(e)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Force the brute-force comparison on.
    pub oracle: bool,
}

/// Everything a run produced, before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tables: Vec<CsvTable>,
    pub summary: CsvTable,
    pub diagnostics: Table,
    pub timings: Table,
}

struct Collector {
    tables: Vec<CsvTable>,
    summary: Vec<(String, Cell)>,
    diagnostics: Table,
    timings: Table,
}

impl Collector {
    fn scalar(&mut self, name: &str, v: impl Into<Cell>) {
        self.summary.push((name.to_string(), v.into()));
    }

    fn diag(&mut self, name: &str, v: impl Into<Value>) {
        self.diagnostics.insert(name.to_string(), v.into());
    }

    fn diag_f(&mut self, name: &str, v: f64) {
        self.diagnostics.insert(name.to_string(), Value::Float(v));
    }
}

fn ode_options(cfg: &ExperimentConfig) -> OdeOptions {
    OdeOptions::with_tolerances(cfg.solver.rtol, cfg.solver.atol)
}

fn floquet_options(cfg: &ExperimentConfig) -> FloquetOptions {
    let s = &cfg.solver;
    FloquetOptions {
        grid_points: s.grid_points,
        ode: ode_options(cfg),
        refine_grid: s.refine,
        refine_tol: s.refine_tol,
        max_grid_points: s.max_grid_points,
        ..FloquetOptions::default()
    }
}

fn resolve_truncation(cfg: &ExperimentConfig) -> Result<(usize, Option<TruncationChoice>), RunError> {
    match (&cfg.model, cfg.solver.n_max) {
        (ModelConfig::Kerr { .. }, Truncation::Fixed(n)) => Ok((n, None)),
        (ModelConfig::Kerr { .. }, Truncation::Auto) => {
            let (start, step, limit, tol) = TRUNCATION_SEARCH;
            let Model::Kerr(m) = cfg.model(start) else { unreachable!() };
            let choice = select_truncation(&m, start, step, limit, tol).map_err(RunError::solver("truncation search"))?;
            Ok((choice.n_max, Some(choice)))
        }
        _ => Ok((0, None)),
    }
}

/// Largest population of the two highest Fock levels over the period.
fn top_population(state: &QuasiStationaryState) -> f64 {
    (0..state.grid_points()).fold(0.0, |m, k| {
        let rho = state.density(k).devectorize();
        let n = rho.nrows();
        m.max(rho[(n - 1, n - 1)].re + rho[(n - 2, n - 2)].re)
    })
}

fn phase(t: f64, period: f64) -> Cell {
    Cell::Float(t / period)
}

/// Scalar observable used to compare approximations with the exact state.
fn probe_value(model: &Model, chan: Option<&ScatteringChannel>, basis: &DensityVector, t: f64) -> Result<f64, CoreError> {
    match (model, chan) {
        (Model::Kerr(_), _) => Ok(kerr::occupation(&basis.devectorize())),
        (_, Some(c)) if c.flux > 0.0 => Ok(c.reflection(t, &basis.values).norm_sqr()),
        (_, Some(c)) => Ok(c.excited_population(&basis.values)),
        (_, None) => Err(CoreError::Unsupported("no probe observable".into())),
    }
}

fn probe_name(model: &Model) -> &'static str {
    match model {
        Model::Kerr(_) => "occupation",
        _ if model.channel().is_some_and(|c| c.flux > 0.0) => "abs_R2",
        _ => "excited_population",
    }
}

fn values_on(
    model: &Model,
    state: &QuasiStationaryState,
    samples: &[Vec<C64>],
    times: &[f64],
) -> Result<Vec<f64>, CoreError> {
    let chan = model.channel();
    times
        .iter()
        .zip(samples)
        .map(|(&t, x)| probe_value(model, chan.as_ref(), &DensityVector::new(x.clone(), state.basis.clone())?, t))
        .collect()
}

fn rel_sup(exact: &[f64], approx: &[f64]) -> f64 {
    let scale = exact.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    exact.iter().zip(approx).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

fn delay_axes(g: &DelayGrid, period: f64) -> (Vec<f64>, Vec<f64>) {
    let tau = crate::config::linspace(0.0, g.tau_max, g.tau_points);
    let tau_c = period_grid(period, g.tau_c_points)[..g.tau_c_points].to_vec();
    (tau, tau_c)
}

/// Solve and evaluate without touching the filesystem.
pub fn compute(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunOutput, RunError> {
    let start = Instant::now();
    let mut out = Collector { tables: Vec::new(), summary: Vec::new(), diagnostics: Table::new(), timings: Table::new() };

    let (mut n_max, choice) = resolve_truncation(cfg)?;
    let mut model = cfg.model(n_max);
    let mut gen = model.generator().map_err(RunError::solver("generator"))?;
    let t0 = Instant::now();
    let mut state = solve_quasi_stationary(&gen, &floquet_options(cfg)).map_err(RunError::solver("quasi-stationary solve"))?;
    // the static search cannot see branches that only the modulated orbit visits
    let mut top = None;
    if choice.is_some() && !gen.is_static() {
        let (_, step, limit, tol) = TRUNCATION_SEARCH;
        loop {
            let p = top_population(&state);
            top = Some(p);
            if p < tol || n_max + step > limit {
                break;
            }
            n_max += step;
            model = cfg.model(n_max);
            gen = model.generator().map_err(RunError::solver("generator"))?;
            state = solve_quasi_stationary(&gen, &floquet_options(cfg)).map_err(RunError::solver("quasi-stationary solve"))?;
        }
    }
    out.timings.insert("solve".into(), Value::Float(t0.elapsed().as_secs_f64()));
    out.scalar("model", model.name());
    out.diag("model", model.name());
    out.diag("dimension", gen.dim() as i64);
    if let Model::Kerr(_) = model {
        out.scalar("n_max", n_max);
        out.diag("n_max", n_max as i64);
        if let Some(c) = choice {
            out.diag_f("truncation_probe_detuning", c.probe_detuning);
            out.diag_f("truncation_top_population", c.top_population);
            out.diag_f("truncation_occupation_change", c.occupation_change);
            out.scalar("truncation_occupation_change", c.occupation_change);
        }
        if let Some(p) = top {
            let converged = p < TRUNCATION_SEARCH.3;
            out.diag_f("orbit_top_population", p);
            out.diag("truncation_converged", converged);
            out.scalar("truncation_converged", converged);
            if !converged {
                eprintln!("warning: n_max = {n_max} leaves {p:.3e} in the top two Fock levels along the orbit");
            }
        }
    }

    let d = &state.diagnostics;
    let method = match d.method {
        SolveMethod::Static => "static",
        SolveMethod::Dense => "dense",
        SolveMethod::MatrixFree => "matrix_free",
    };
    out.diag("method", method);
    out.diag("grid_points", d.grid_points as i64);
    out.diag_f("condition", d.condition);
    out.diag_f("periodicity_error", d.periodicity_error);
    if let Some(c) = d.refinement_change {
        out.diag_f("refinement_change", c);
    }
    if d.method == SolveMethod::MatrixFree {
        out.diag("gmres_iterations", d.gmres_iterations as i64);
        out.diag_f("gmres_residual", d.gmres_residual);
    }
    if let Some(r) = d.slowest_rate {
        out.diag_f("slowest_rate", r);
    }
    out.diag("rhs_evals", d.rhs_evals as i64);
    out.scalar("method", method);
    out.scalar("grid_points", d.grid_points);
    out.scalar("periodicity_error", d.periodicity_error);

    if cfg.solver.oracle || opts.oracle {
        let t0 = Instant::now();
        if d.method == SolveMethod::Static {
            out.diag("oracle", "not applicable to a static generator");
        } else {
            let rate = d.slowest_rate.ok_or_else(|| RunError::Solver {
                stage: "oracle".into(),
                source: CoreError::Unsupported("slowest Floquet rate unavailable".into()),
            })?;
            let o = brute_force_oracle(&gen, state.grid_points(), rate, ode_options(cfg)).map_err(RunError::solver("oracle"))?;
            let dev = o.samples.iter().zip(&state.samples).fold(0.0f64, |m, (a, b)| m.max(dense::max_abs_diff(a, b)));
            out.diag("oracle_periods", o.periods as i64);
            out.diag_f("oracle_residual", o.residual);
            out.diag_f("oracle_deviation", dev);
            out.scalar("oracle_residual", o.residual);
            out.scalar("oracle_deviation", dev);
        }
        out.timings.insert("oracle".into(), Value::Float(t0.elapsed().as_secs_f64()));
    }

    for spec in &cfg.outputs {
        let t0 = Instant::now();
        evaluate(cfg, spec, &model, &gen, &state, &mut out).map_err(|e| match e {
            RunError::Solver { stage, source } => RunError::Solver { stage: format!("output `{}`: {stage}", spec.kind()), source },
            other => other,
        })?;
        out.timings.insert(spec.kind().into(), Value::Float(t0.elapsed().as_secs_f64()));
    }
    out.timings.insert("total".into(), Value::Float(start.elapsed().as_secs_f64()));

    let cols: Vec<&str> = out.summary.iter().map(|(k, _)| k.as_str()).collect();
    let mut summary = CsvTable::new(SUMMARY, &cols);
    summary.push(out.summary.iter().map(|(_, v)| v.clone()).collect());
    Ok(RunOutput { tables: out.tables, summary, diagnostics: out.diagnostics, timings: out.timings })
}

fn evaluate(
    cfg: &ExperimentConfig,
    spec: &OutputSpec,
    model: &Model,
    gen: &PeriodicGenerator,
    state: &QuasiStationaryState,
    out: &mut Collector,
) -> Result<(), RunError> {
    let period = state.period;
    let ode = ode_options(cfg);
    let static_run = gen.is_static();
    match spec {
        OutputSpec::Reflection => {
            let chan = model.channel().expect("validated");
            let trace = reflection_transmission(&chan, state, cfg.solver.m_max).map_err(RunError::solver("amplitudes"))?;
            let mut t = CsvTable::new("reflection.csv", &["tau_c_over_T", "re_R", "im_R", "abs_R2", "re_T", "im_T", "abs_T2"]);
            for (k, &tc) in trace.times.iter().enumerate() {
                let (r, tr) = (trace.reflection[k], trace.transmission[k]);
                t.push(vec![phase(tc, period), r.re.into(), r.im.into(), r.norm_sqr().into(), tr.re.into(), tr.im.into(), tr.norm_sqr().into()]);
            }
            let mut h = CsvTable::new("reflection_harmonics.csv", &["m", "re_R_m", "im_R_m", "re_T_m", "im_T_m"]);
            let mm = trace.m_max as i64;
            for m in -mm..=mm {
                let (r, tr) = (trace.coeff(floquet_core::observables::Channel::L, m), trace.coeff(floquet_core::observables::Channel::R, m));
                h.push(vec![m.into(), r.re.into(), r.im.into(), tr.re.into(), tr.im.into()]);
            }
            let m = trace.reflection.len() - 1;
            out.scalar("mean_abs_R2", trace.reflection[..m].iter().map(|r| r.norm_sqr()).sum::<f64>() / m as f64);
            out.scalar("mean_abs_T2", trace.transmission[..m].iter().map(|r| r.norm_sqr()).sum::<f64>() / m as f64);
            out.tables.push(t);
            out.tables.push(h);
        }
        OutputSpec::Fluxes => {
            let chan = model.channel().expect("validated");
            let fl = output_fluxes(&chan, state);
            let mut t = CsvTable::new("fluxes.csv", &["tau_c_over_T", "f_L", "f_R", "f_L_elastic", "f_R_elastic", "f_inelastic"]);
            for k in 0..fl.times.len() {
                t.push(vec![
                    phase(fl.times[k], period),
                    fl.left[k].into(),
                    fl.right[k].into(),
                    fl.left_elastic[k].into(),
                    fl.right_elastic[k].into(),
                    fl.inelastic[k].into(),
                ]);
            }
            out.scalar("mean_f_L", fl.mean_left);
            out.scalar("mean_f_R", fl.mean_right);
            out.scalar("power_residual", fl.residual);
            out.diag_f("power_residual", fl.residual);
            out.tables.push(t);
        }
        OutputSpec::Spectrum { channel, window, samples } => {
            let Model::Qubit(q) = model else { unreachable!("validated") };
            let floq = decompose_on_grid(gen, state.grid_points(), ode).map_err(RunError::solver("Floquet decomposition"))?;
            let m_max = if static_run { 0 } else { cfg.solver.m_max };
            let sp = power_spectrum(q, state, &floq, m_max, *channel).map_err(RunError::solver("spectrum"))?;
            let xs = crate::config::linspace(window.0, window.1, *samples);
            let mut t = CsvTable::new("spectrum.csv", &["omega_minus_omega0_over_gamma", "S_inel"]);
            let mut worst_imag = 0.0f64;
            for &x in &xs {
                let z = sp.complex_density(x);
                worst_imag = worst_imag.max(z.im.abs());
                t.push(vec![x.into(), z.re.into()]);
            }
            let mut e = CsvTable::new("spectrum_elastic.csv", &["m", "omega_minus_omega0_over_gamma", "weight"]);
            for l in &sp.elastic {
                e.push(vec![l.m.into(), l.offset.into(), l.weight.into()]);
            }
            let mut r = CsvTable::new("spectrum_terms.csv", &["m", "j", "position_over_gamma", "half_width_over_gamma", "re_weight", "im_weight"]);
            for l in &sp.inelastic {
                r.push(vec![l.m.into(), l.j.into(), l.position.into(), l.half_width.into(), l.weight.re.into(), l.weight.im.into()]);
            }
            out.scalar("inelastic_flux", sp.inelastic_flux());
            out.scalar("spectrum_max_imag", worst_imag);
            out.scalar("spectrum_central_density", sp.density(0.0));
            out.diag_f("spectrum_max_imag", worst_imag);
            out.tables.extend([t, e, r]);
        }
        OutputSpec::G1 { channel, grid } => {
            let Model::Qubit(q) = model else { unreachable!("validated") };
            let (tau, tau_c) = delay_axes(grid, period);
            let res = g1_correlation(q, state, &tau, &tau_c, *channel, ode).map_err(RunError::solver("g1"))?;
            let el = res.elastic.as_ref().expect("g1 elastic part");
            let mut t = CsvTable::new("g1.csv", &["tau_over_T", "tau_c_over_T", "re_g1", "im_g1", "re_g1_elastic", "im_g1_elastic"]);
            for (c, &tc) in tau_c.iter().enumerate() {
                for (k, &tk) in tau.iter().enumerate() {
                    let v = res.values[c][k];
                    t.push(vec![phase(tk, period), phase(tc, period), v.re.into(), v.im.into(), el[c][k].re.into(), el[c][k].im.into()]);
                }
            }
            out.tables.push(t);
        }
        OutputSpec::G2 { channel, grid } => {
            let Model::Qubit(q) = model else { unreachable!("validated") };
            let (tau, tau_c) = delay_axes(grid, period);
            let res = g2_correlation(q, state, &tau, &tau_c, *channel, ode).map_err(RunError::solver("g2"))?;
            let mut t = CsvTable::new("g2.csv", &["tau_over_T", "tau_c_over_T", "g2", "defined"]);
            let (mut lo, mut hi, mut undefined) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
            for (c, &tc) in tau_c.iter().enumerate() {
                for (k, &tk) in tau.iter().enumerate() {
                    let ok = res.defined[c][k];
                    let v = res.values[c][k].re;
                    if ok {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    } else {
                        undefined += 1;
                    }
                    t.push(vec![phase(tk, period), phase(tc, period), v.into(), ok.into()]);
                }
            }
            out.scalar("g2_min", lo);
            out.scalar("g2_max", hi);
            out.scalar("g2_undefined", undefined);
            out.diag_f("g2_max_imag", res.max_imag());
            out.tables.push(t);
        }
        OutputSpec::Adiabatic => {
            let with_gap = gen.dim() <= GAMMA_MIN_LIMIT;
            let ad = adiabatic_expansion(gen, state.grid_points(), with_gap).map_err(RunError::solver("adiabatic expansion"))?;
            let name = probe_name(model);
            let exact = values_on(model, state, &state.samples, &state.times).map_err(RunError::solver("adiabatic expansion"))?;
            let o0 = values_on(model, state, &ad.order0, &ad.times).map_err(RunError::solver("adiabatic expansion"))?;
            let o1 = values_on(model, state, &ad.order1, &ad.times).map_err(RunError::solver("adiabatic expansion"))?;
            let cols = [
                "tau_c_over_T".to_string(),
                format!("{name}_exact"),
                format!("{name}_order0"),
                format!("{name}_order1"),
                "gamma_min".to_string(),
                "singular".to_string(),
            ];
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            let mut t = CsvTable::new("adiabatic.csv", &cols);
            for k in 0..ad.times.len() {
                let gap = ad.gamma_min.as_ref().map_or(f64::NAN, |g| g[k]);
                t.push(vec![phase(ad.times[k], period), exact[k].into(), o0[k].into(), o1[k].into(), gap.into(), ad.singular[k].into()]);
            }
            out.scalar("adiabatic_order0_deviation", rel_sup(&exact, &o0));
            out.scalar("adiabatic_order1_deviation", rel_sup(&exact, &o1));
            out.tables.push(t);
        }
        OutputSpec::HighFrequency { order } => {
            let hf = high_frequency_expansion(gen, *order, state.grid_points()).map_err(RunError::solver("high-frequency expansion"))?;
            let name = probe_name(model);
            let exact = values_on(model, state, &state.samples, &state.times).map_err(RunError::solver("high-frequency expansion"))?;
            let approx = values_on(model, state, &hf.total, &hf.times).map_err(RunError::solver("high-frequency expansion"))?;
            let cols = ["tau_c_over_T".to_string(), format!("{name}_exact"), format!("{name}_order{order}")];
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            let mut t = CsvTable::new("high_frequency.csv", &cols);
            for k in 0..hf.times.len() {
                t.push(vec![phase(hf.times[k], period), exact[k].into(), approx[k].into()]);
            }
            out.scalar("high_frequency_deviation", rel_sup(&exact, &approx));
            out.tables.push(t);
        }
        OutputSpec::WeakPower => {
            let Model::Qubit(q) = model else { unreachable!("validated") };
            let (times, s2) = weak_power_reflection(q, state.grid_points(), ode).map_err(RunError::solver("weak-power formula"))?;
            let mut t = CsvTable::new("weak_power.csv", &["tau_c_over_T", "re_s2_exact", "im_s2_exact", "re_s2_weak", "im_s2_weak"]);
            let mut worst = 0.0f64;
            let scale = state.samples.iter().fold(0.0f64, |m, s| m.max(s[1].norm())).max(f64::MIN_POSITIVE);
            for k in 0..times.len() {
                let e = state.samples[k][1];
                worst = worst.max((e - s2[k]).norm());
                t.push(vec![phase(times[k], period), e.re.into(), e.im.into(), s2[k].re.into(), s2[k].im.into()]);
            }
            out.scalar("weak_power_deviation", worst / scale);
            out.tables.push(t);
        }
        OutputSpec::GammaMin { points } => {
            let n = if static_run { 1 } else { *points };
            let mut t = CsvTable::new("gamma_min.csv", &["tau_c_over_T", "gamma_min"]);
            let mut lo = f64::INFINITY;
            for &tc in &period_grid(period, n)[..n] {
                let g = gen.dissipation_gap(tc).map_err(RunError::solver("gamma_min"))?;
                lo = lo.min(g);
                t.push(vec![phase(tc, period), g.into()]);
            }
            out.scalar("gamma_min", lo);
            out.tables.push(t);
        }
        OutputSpec::Occupation => {
            let Model::Kerr(k) = model else { unreachable!("validated") };
            let obs = kerr_observables(k, state).map_err(RunError::solver("kerr observables"))?;
            let mut t = CsvTable::new("occupation.csv", &["tau_c_over_T", "detuning_over_gamma", "occupation", "entropy", "top_population"]);
            for i in 0..obs.times.len() {
                t.push(vec![
                    phase(obs.times[i], period),
                    obs.detuning[i].into(),
                    obs.occupation[i].into(),
                    obs.entropy[i].into(),
                    obs.top_population[i].into(),
                ]);
            }
            out.scalar("peak_occupation", obs.peak_occupation());
            out.scalar("mean_occupation", obs.occupation[..obs.occupation.len() - 1].iter().sum::<f64>() / (obs.occupation.len() - 1) as f64);
            out.scalar("max_entropy", obs.entropy.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            out.scalar("min_eigenvalue", obs.min_eigenvalue);
            out.diag_f("min_eigenvalue", obs.min_eigenvalue);
            out.tables.push(t);
        }
        OutputSpec::Hysteresis => {
            let Model::Kerr(k) = model else { unreachable!("validated") };
            let area = hysteresis(k, state).map_err(RunError::solver("hysteresis"))?;
            out.scalar("loop_area", area.0);
            let mut t = CsvTable::new("hysteresis.csv", &["detuning_over_gamma", "occupation"]);
            for (x, y) in area.1 {
                t.push(vec![x.into(), y.into()]);
            }
            out.tables.push(t);
        }
        OutputSpec::State => {
            let mut cols = vec!["tau_c_over_T".to_string()];
            for c in state.basis.components() {
                cols.push(format!("re_rho_{}_{}", c.i, c.j));
                cols.push(format!("im_rho_{}_{}", c.i, c.j));
            }
            let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
            let mut t = CsvTable::new("state.csv", &cols);
            for (tc, x) in state.times.iter().zip(&state.samples) {
                let mut row = vec![phase(*tc, period)];
                for z in x {
                    row.push(z.re.into());
                    row.push(z.im.into());
                }
                t.push(row);
            }
            out.tables.push(t);
        }
    }
    Ok(())
}

fn hysteresis(model: &KerrModel, state: &QuasiStationaryState) -> Result<(f64, Vec<(f64, f64)>), CoreError> {
    let m = state.grid_points();
    let mut curve = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let rho = state.density(k).devectorize();
        curve.push((model.detuning.eval(state.times[k]), kerr::occupation(&rho)));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = curve[..m].iter().copied().unzip();
    Ok((kerr::loop_area(&x, &y), curve))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

pub fn manifest_table(cfg: &ExperimentConfig, output: &RunOutput, files: &[(String, Vec<String>, usize)]) -> Table {
    let mut m = Table::new();
    m.insert("config".into(), Value::Table(cfg.to_table()));
    m.insert("diagnostics".into(), Value::Table(output.diagnostics.clone()));
    m.insert("timings".into(), Value::Table(output.timings.clone()));
    m.insert("files".into(), Value::Array(files_value(files)));
    m
}

pub fn files_value(files: &[(String, Vec<String>, usize)]) -> Vec<Value> {
    let mut list: Vec<Value> = files
        .iter()
        .map(|(name, cols, rows)| {
            let mut f = Table::new();
            f.insert("name".into(), Value::String(name.clone()));
            f.insert("columns".into(), Value::Array(cols.iter().map(|c| Value::String(c.clone())).collect()));
            f.insert("rows".into(), Value::Integer(*rows as i64));
            Value::Table(f)
        })
        .collect();
    let mut me = Table::new();
    me.insert("name".into(), Value::String(MANIFEST.into()));
    me.insert("columns".into(), Value::Array(Vec::new()));
    me.insert("rows".into(), Value::Integer(0));
    list.push(Value::Table(me));
    list
}

/// Write every table and then the manifest; on failure remove what was written.
pub fn write_run(cfg: &ExperimentConfig, output: &RunOutput, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        let mut files = Vec::new();
        for t in output.tables.iter().chain(std::iter::once(&output.summary)) {
            let path = dir.join(&t.name);
            written.push(path.clone());
            t.write(dir).map_err(io_err(&path))?;
            files.push((t.name.clone(), t.columns.clone(), t.rows.len()));
        }
        let text = toml::to_string(&manifest_table(cfg, output, &files)).expect("manifest serializes");
        let path = dir.join(MANIFEST);
        fs::write(&path, text).map_err(io_err(&path))
    })();
    if result.is_err() {
        for p in &written {
            let _ = fs::remove_file(p);
        }
    }
    result
}

pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path, opts: RunOptions) -> Result<RunOutput, RunError> {
    let _ = fs::remove_file(dir.join(MANIFEST));
    let output = compute(cfg, opts)?;
    write_run(cfg, &output, dir)?;
    Ok(output)
}

