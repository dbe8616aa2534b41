use floquet_core::expansions::{adiabatic_expansion, high_frequency_expansion, weak_power_reflection};
use floquet_core::floquet::{solve_quasi_stationary, FloquetOptions, QuasiStationaryState};
use floquet_core::liouvillian::PeriodicGenerator;
use floquet_core::models::{LambdaModel, QubitModel, Waveform};
use floquet_core::numerics::{dense, C64};

fn solve(gen: &PeriodicGenerator) -> QuasiStationaryState {
    solve_quasi_stationary(gen, &FloquetOptions::default()).unwrap()
}

fn sup_dev(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max(dense::max_abs_diff(x, y)))
}

fn detuned_qubit(omega: f64) -> QubitModel {
    QubitModel { detuning: Waveform::cosine(0.0, 2.0, omega), omega, ..QubitModel::constant(1.0, 1.5) }
}

#[test]
fn adiabatic_orders_converge_at_their_rates() {
    let err = |omega: f64| {
        let gen = detuned_qubit(omega).generator().unwrap();
        let state = solve(&gen);
        let ad = adiabatic_expansion(&gen, state.grid_points(), false).unwrap();
        assert!(ad.singular.iter().all(|&s| !s));
        (sup_dev(&state.samples, &ad.order0), sup_dev(&state.samples, &ad.order1))
    };
    let (a0, a1) = err(0.02);
    let (b0, b1) = err(0.01);
    assert!(a1 < 0.2 * a0, "{a1} vs {a0}");
    assert!((b0 / a0 - 0.5).abs() < 0.05, "order 0 ratio {}", b0 / a0);
    assert!((b1 / a1 - 0.25).abs() < 0.05, "order 1 ratio {}", b1 / a1);
}

#[test]
fn adiabatic_gap_mask_flags_slow_regions() {
    let m = LambdaModel { gamma: 1.0, drive: Waveform::cosine(10.0, 10.0, 0.1), delta1: 0.0, delta2: 0.0, flux: 0.01, omega: 0.1, omega0: 0.0 };
    let gen = m.generator().unwrap();
    let ad = adiabatic_expansion(&gen, 128, true).unwrap();
    let valid = ad.validity(m.omega).unwrap();
    let gap = ad.gamma_min.as_ref().unwrap();
    // F(t) vanishes at t = T/2, where the dark state decouples
    assert!(!valid[64]);
    assert!(valid[0]);
    assert!(gap[64] < gap[0]);
}

#[test]
fn high_frequency_orders_converge_at_their_rates() {
    let err = |omega: f64| {
        let gen = QubitModel::on_off(1.0, omega, 1.0).generator().unwrap();
        let state = solve(&gen);
        let hf0 = high_frequency_expansion(&gen, 0, state.grid_points()).unwrap();
        let hf1 = high_frequency_expansion(&gen, 1, state.grid_points()).unwrap();
        (sup_dev(&state.samples, &hf0.total), sup_dev(&state.samples, &hf1.total))
    };
    let (a0, a1) = err(40.0);
    let (b0, b1) = err(80.0);
    assert!(a1 < 0.2 * a0, "{a1} vs {a0}");
    assert!((b0 / a0 - 0.5).abs() < 0.1, "order 0 ratio {}", b0 / a0);
    assert!((b1 / a1 - 0.25).abs() < 0.08, "order 1 ratio {}", b1 / a1);
}

#[test]
fn high_frequency_terms_are_mean_free_oscillations() {
    let gen = QubitModel::sign_change(1.0, 30.0, 2.0).generator().unwrap();
    let hf = high_frequency_expansion(&gen, 2, 128).unwrap();
    for term in &hf.oscillating_terms {
        let n = term.len() - 1;
        for c in 0..gen.dim() {
            let mean: C64 = term[..n].iter().map(|v| v[c]).sum::<C64>() / n as f64;
            assert!(mean.norm() < 1e-12);
        }
    }
}

#[test]
fn weak_power_coherence_matches_exact_solution() {
    for m in [QubitModel::sign_change(1.0, 0.1, 1e-5), QubitModel::on_off(1.0, 2.0, 1e-5), detuned_qubit(0.5)] {
        let m = QubitModel { flux: 1e-5, ..m };
        let state = solve(&m.generator().unwrap());
        let (_, s2) = weak_power_reflection(&m, state.grid_points(), Default::default()).unwrap();
        let scale = state.samples.iter().map(|s| s[1].norm()).fold(0.0, f64::max);
        let err = state.samples.iter().zip(&s2).map(|(a, b)| (a[1] - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-4 * scale, "{}", err / scale);
    }
}
