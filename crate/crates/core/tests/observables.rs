use floquet_core::floquet::{decompose_on_grid, solve_quasi_stationary, FloquetOptions, QuasiStationaryState};
use floquet_core::liouvillian::LindbladSpec;
use floquet_core::models::{KerrModel, QubitModel, Waveform};
use floquet_core::numerics::{dense, CMatrix, C64};
use floquet_core::observables::kerr::{entropy, kerr_observables, loop_area, occupation, select_truncation};
use floquet_core::observables::{g1_correlation, g2_correlation, inelastic_spectrum, output_fluxes, reflection_transmission, Channel};
use proptest::prelude::*;

fn solve(m: &QubitModel) -> QuasiStationaryState {
    solve_quasi_stationary(&m.generator().unwrap(), &FloquetOptions::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn transmission_is_one_plus_reflection_and_power_is_conserved(omega in 0.3f64..5.0, flux in 0.01f64..10.0, on_off in any::<bool>()) {
        let m = if on_off { QubitModel::on_off(1.0, omega, flux) } else { QubitModel::sign_change(1.0, omega, flux) };
        let state = solve(&m);
        let tr = reflection_transmission(&m.channel(), &state, 8).unwrap();
        for (r, t) in tr.reflection.iter().zip(&tr.transmission) {
            prop_assert!((t - (r + 1.0)).norm() < 1e-14);
        }
        prop_assert!(output_fluxes(&m.channel(), &state).residual < 1e-8);
    }
}

#[test]
fn reflection_vanishes_where_the_coupling_does() {
    for flux in [0.01, 1.0, 10.0] {
        let m = QubitModel::sign_change(1.0, 0.5, flux);
        let state = solve(&m);
        let n = state.grid_points();
        let tr = reflection_transmission(&m.channel(), &state, 8).unwrap();
        for k in [n / 4, 3 * n / 4] {
            assert!(tr.reflection[k].norm() < 1e-8);
            assert!((tr.transmission[k] - 1.0).norm() < 1e-8);
        }
    }
}

#[test]
fn sign_change_halves_the_period_of_reflected_power() {
    let m = QubitModel::sign_change(1.0, 0.7, 2.0);
    let state = solve(&m);
    let n = state.grid_points();
    let tr = reflection_transmission(&m.channel(), &state, 8).unwrap();
    for k in 0..n / 2 {
        assert!((tr.reflection[k].norm_sqr() - tr.reflection[k + n / 2].norm_sqr()).abs() < 1e-9);
    }
    for m in [1, 3, 5] {
        assert!(tr.coeff(Channel::L, m).norm() < 1e-9);
    }
}

#[test]
fn zero_delay_first_order_coherence_is_the_output_flux() {
    let m = QubitModel::on_off(1.0, 1.3, 3.0);
    let state = solve(&m);
    let fl = output_fluxes(&m.channel(), &state);
    let idx: Vec<usize> = (0..state.grid_points()).step_by(state.grid_points() / 8).collect();
    let tau_c: Vec<f64> = idx.iter().map(|&k| state.times[k]).collect();
    for (ch, flux) in [(Channel::L, &fl.left), (Channel::R, &fl.right)] {
        let g1 = g1_correlation(&m, &state, &[0.0], &tau_c, ch, Default::default()).unwrap();
        for (c, &k) in idx.iter().enumerate() {
            assert!((g1.values[c][0] - flux[k]).norm() < 1e-9 * (1.0 + flux[k]), "{ch} at {k}");
        }
    }
}

/// `tr(O†O ρ)` for a column-stacked full density vector.
fn emitted(o: &CMatrix, rho: &[C64], n: usize) -> f64 {
    let q = dense::matmul(&dense::adjoint(o), o);
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += q[(i, j)] * rho[j + i * n];
        }
    }
    acc.re
}

/// Fixed-step RK4 on the full column-stacked Liouvillian.
fn evolve(spec: &LindbladSpec, rho: &mut Vec<C64>, t0: f64, t1: f64) {
    let steps = ((t1 - t0) / 1e-3).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let f = |t: f64, x: &[C64]| {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        spec.full_liouvillian(t).mul_vec_into(x, &mut y);
        y
    };
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let k1 = f(t, rho);
        let x2: Vec<C64> = rho.iter().zip(&k1).map(|(x, k)| x + k * (h / 2.0)).collect();
        let k2 = f(t + h / 2.0, &x2);
        let x3: Vec<C64> = rho.iter().zip(&k2).map(|(x, k)| x + k * (h / 2.0)).collect();
        let k3 = f(t + h / 2.0, &x3);
        let x4: Vec<C64> = rho.iter().zip(&k3).map(|(x, k)| x + k * h).collect();
        let k4 = f(t + h, &x4);
        for i in 0..rho.len() {
            rho[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
    }
}

/// g²_LL from the quantum regression theorem on the full density matrix:
/// the conditional state `O ρ O†` evolves with the same Liouvillian.
fn g2_oracle(m: &QubitModel, state: &QuasiStationaryState, tc: f64, tau: f64) -> f64 {
    let spec = m.spec().unwrap();
    let n = spec.levels();
    let rho = floquet_core::liouvillian::DensityVector::new(state.at(tc), state.basis.clone()).unwrap().devectorize();
    let o = &spec.jump;
    let cond = dense::matmul(&dense::matmul(o, &rho), &dense::adjoint(o));
    let stack = |r: &CMatrix| (0..n * n).map(|p| r[(p % n, p / n)]).collect::<Vec<_>>();
    let (mut a, mut b) = (stack(&rho), stack(&cond));
    let p0 = emitted(o, &a, n);
    evolve(&spec, &mut a, tc, tc + tau);
    evolve(&spec, &mut b, tc, tc + tau);
    emitted(o, &b, n) / (p0 * emitted(o, &a, n))
}

#[test]
fn second_order_coherence_matches_regression_on_the_full_density_matrix() {
    let cases = [QubitModel::constant(1.0, 5.0), QubitModel::on_off(1.0, 2.0, 3.0)];
    for m in cases {
        let state = solve(&m);
        let tc = 0.3 * m.period();
        let tau = [0.0, 0.4, 1.3];
        let g2 = g2_correlation(&m, &state, &tau, &[tc], Channel::L, Default::default()).unwrap();
        for (k, &t) in tau.iter().enumerate() {
            let want = g2_oracle(&m, &state, tc, t);
            assert!((g2.values[0][k].re - want).abs() < 1e-6, "τ = {t}: {} vs {want}", g2.values[0][k].re);
            assert!(g2.values[0][k].im.abs() < 1e-8);
        }
    }
}

#[test]
fn weak_drive_resonance_fluorescence_is_antibunched() {
    let m = QubitModel::constant(1.0, 0.01);
    let state = solve(&m);
    let g2 = g2_correlation(&m, &state, &[0.0, 60.0], &[0.0], Channel::L, Default::default()).unwrap();
    assert!(g2.values[0][0].re < 1e-6);
    assert!((g2.values[0][1].re - 1.0).abs() < 1e-6);
}

#[test]
fn spectrum_integrates_to_the_inelastic_flux_and_is_real() {
    for m in [QubitModel::constant(1.0, 4.0), QubitModel::on_off(1.0, 3.0, 2.0)] {
        let gen = m.generator().unwrap();
        let state = solve(&m);
        let floq = decompose_on_grid(&gen, state.grid_points(), Default::default()).unwrap();
        let m_max = if gen.is_static() { 0 } else { 30 };
        let sp = inelastic_spectrum(&m, &state, &floq, m_max, Channel::L).unwrap();
        let fl = output_fluxes(&m.channel(), &state);
        let n = state.grid_points();
        let mean = fl.inelastic[..n].iter().sum::<f64>() / n as f64;
        assert!((sp.inelastic_flux() - mean).abs() < 1e-6 * mean, "{} vs {mean}", sp.inelastic_flux());
        for x in [-7.0, -1.0, 0.0, 0.5, 3.0] {
            let z = sp.complex_density(x);
            assert!(z.im.abs() < 1e-9 * (1.0 + z.re.abs()));
            assert!(z.re > -1e-9);
        }
    }
}

#[test]
fn linear_cavity_is_a_pure_coherent_state() {
    for (delta, flux) in [(-1.0, 0.5), (0.0, 0.2), (2.0, 1.0)] {
        let m = KerrModel { gamma: 1.0, u: 0.0, detuning: Waveform::constant(delta), flux, n_max: 20, omega: 1.0 };
        let gen = m.generator().unwrap();
        let rho = floquet_core::liouvillian::DensityVector::new(gen.instantaneous_steady_state(0.0).unwrap(), gen.basis().clone())
            .unwrap()
            .devectorize();
        let want = flux / (delta * delta + 0.25);
        assert!((occupation(&rho) - want).abs() < 1e-9 * (1.0 + want));
        assert!(entropy(&rho).unwrap().0 < 1e-6);
    }
}

/// Periodic orbit of `α' = (iδ(t) − γ/2)α − i√(γf)` by long RK4 integration.
fn coherent_orbit(m: &KerrModel, samples: usize) -> Vec<f64> {
    let f = |t: f64, a: C64| C64::new(-0.5 * m.gamma, m.detuning.eval(t)) * a - C64::new(0.0, (m.gamma * m.flux).sqrt());
    let period = m.period();
    let steps = 64 * samples;
    let h = period / steps as f64;
    let mut a = C64::new(0.0, 0.0);
    let mut out = Vec::new();
    for p in 0..40 {
        for s in 0..steps {
            let t = p as f64 * period + s as f64 * h;
            if p == 39 && s % (steps / samples) == 0 {
                out.push(a.norm_sqr());
            }
            let k1 = f(t, a);
            let k2 = f(t + h / 2.0, a + k1 * (h / 2.0));
            let k3 = f(t + h / 2.0, a + k2 * (h / 2.0));
            let k4 = f(t + h, a + k3 * h);
            a += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    out
}

#[test]
fn modulated_linear_cavity_follows_the_classical_orbit() {
    let m = KerrModel { gamma: 1.0, u: 0.0, detuning: Waveform::cosine(-1.0, 0.8, 0.5), flux: 0.5, n_max: 20, omega: 0.5 };
    let opts = FloquetOptions { grid_points: 64, refine_grid: false, ..Default::default() };
    let state = solve_quasi_stationary(&m.generator().unwrap(), &opts).unwrap();
    let obs = kerr_observables(&m, &state).unwrap();
    let want = coherent_orbit(&m, 64);
    for k in 0..64 {
        assert!((obs.occupation[k] - want[k]).abs() < 1e-6, "{k}: {} vs {}", obs.occupation[k], want[k]);
        assert!(obs.entropy[k] < 1e-5);
    }
    assert!(obs.top_population.iter().all(|&p| p < 1e-10));
}

#[test]
fn shoelace_area_is_signed() {
    let n = 400;
    let (x, y): (Vec<f64>, Vec<f64>) = (0..n).map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64).map(|t| (2.0 * t.cos(), t.sin())).unzip();
    let a = loop_area(&x, &y);
    assert!((a - 2.0 * std::f64::consts::PI).abs() < 1e-3);
    let (xr, yr): (Vec<f64>, Vec<f64>) = x.iter().rev().zip(y.iter().rev()).map(|(a, b)| (*a, *b)).unzip();
    assert!((loop_area(&xr, &yr) + a).abs() < 1e-12);
    assert_eq!(loop_area(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]), 0.0);
}

#[test]
fn truncation_search_reaches_the_population_bound() {
    let m = KerrModel { gamma: 1.0, u: -0.5, detuning: Waveform::cosine(-2.0, 2.0, 1.0), flux: 2.0, n_max: 4, omega: 1.0 };
    let c = select_truncation(&m, 4, 4, 40, 1e-8).unwrap();
    assert!(c.top_population < 1e-8);
    assert!(c.occupation_change < 1e-6);
    assert!((-4.0..=0.0).contains(&c.probe_detuning));
    assert!(select_truncation(&m, 4, 4, 6, 1e-8).is_err());
}
