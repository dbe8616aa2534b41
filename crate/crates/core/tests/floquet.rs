use floquet_core::floquet::{
    brute_force_oracle, decompose_on_grid, fundamental_solution, propagate, solve_quasi_stationary, FloquetOptions, SolveMethod,
};
use floquet_core::liouvillian::PeriodicGenerator;
use floquet_core::models::{KerrModel, LambdaModel, QubitModel, Waveform};
use floquet_core::numerics::fourier::period_grid;
use floquet_core::numerics::{dense, C64};
use proptest::prelude::*;

fn static_reference(gen: &PeriodicGenerator) -> Vec<C64> {
    let a = gen.a_dense(0.0);
    dense::solve(&a, &gen.c_at(0.0)).unwrap().into_iter().map(|z| -z).collect()
}

#[test]
fn static_models_reduce_to_linear_solve() {
    let gens = [
        QubitModel::constant(1.0, 3.0).generator().unwrap(),
        LambdaModel { gamma: 1.0, drive: Waveform::constant(2.0), delta1: 0.3, delta2: -0.1, flux: 0.5, omega: 1.0, omega0: 0.0 }
            .generator()
            .unwrap(),
        KerrModel { gamma: 1.0, u: -0.5, detuning: Waveform::constant(-3.0), flux: 2.0, n_max: 10, omega: 1.0 }.generator().unwrap(),
    ];
    for gen in &gens {
        let qs = solve_quasi_stationary(gen, &FloquetOptions::default()).unwrap();
        assert_eq!(qs.diagnostics.method, SolveMethod::Static);
        let want = static_reference(gen);
        for s in &qs.samples {
            assert!(dense::max_abs_diff(s, &want) < 1e-10);
        }
    }
}

#[test]
fn monodromy_determinant_obeys_liouville_formula() {
    let model = QubitModel::sign_change(1.0, 0.7, 2.0);
    let gen = model.generator().unwrap();
    let fund = fundamental_solution(&gen, 256, Default::default()).unwrap();
    let det = fund.monodromy().determinant();
    // tr A = −2γ(t), averaged over the period: −γ₀
    let expected = (-model.gamma0 * model.period()).exp();
    assert!(((det.re - expected) / expected).abs() < 1e-6 && det.im.abs() < 1e-6 * expected);
}

#[test]
fn oracle_agrees_with_one_period_solution() {
    let gen = QubitModel::sign_change(1.0, 1.0, 1.0).generator().unwrap();
    let opts = FloquetOptions { refine_grid: false, grid_points: 64, ..Default::default() };
    let qs = solve_quasi_stationary(&gen, &opts).unwrap();
    let oracle = brute_force_oracle(&gen, 64, qs.diagnostics.slowest_rate.unwrap(), opts.ode).unwrap();
    assert!(oracle.converged(1e-8), "residual {}", oracle.residual);
    for (a, b) in qs.samples.iter().zip(&oracle.samples) {
        assert!(dense::max_abs_diff(a, b) < 1e-7);
    }
}

#[test]
fn matrix_free_route_matches_dense() {
    let model = KerrModel { gamma: 1.0, u: -0.5, detuning: Waveform::cosine(-2.0, 1.5, 0.8), flux: 1.0, n_max: 5, omega: 0.8 };
    let gen = model.generator().unwrap();
    let dense_opts = FloquetOptions { refine_grid: false, grid_points: 64, ..Default::default() };
    let mf_opts = FloquetOptions { dense_limit: 0, ..dense_opts };
    let a = solve_quasi_stationary(&gen, &dense_opts).unwrap();
    let b = solve_quasi_stationary(&gen, &mf_opts).unwrap();
    assert_eq!(a.diagnostics.method, SolveMethod::Dense);
    assert_eq!(b.diagnostics.method, SolveMethod::MatrixFree);
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert!(dense::max_abs_diff(x, y) < 1e-8);
    }
    let rate = a.diagnostics.slowest_rate.unwrap();
    let ritz = b.diagnostics.slowest_rate.unwrap();
    assert!((rate - ritz).abs() < 0.05 * rate, "{rate} vs {ritz}");
}

#[test]
fn floquet_factor_is_periodic_with_principal_exponents() {
    let gen = QubitModel::sign_change(1.0, 3.0, 10.0).generator().unwrap();
    let floq = decompose_on_grid(&gen, 128, Default::default()).unwrap();
    let half = floq.omega() / 2.0;
    for b in &floq.exponents.values {
        assert!(b.re < 0.0 && b.im > -half && b.im <= half);
    }
    assert!(dense::max_abs_diff_mat(&floq.p[0], floq.p.last().unwrap()) < 1e-9);
    let o = floq.p[37].clone() * floq.exponents.map(|b| (b * floq.times[37]).exp());
    let fund = fundamental_solution(&gen, 128, Default::default()).unwrap();
    assert!(dense::max_abs_diff_mat(&o, &fund.samples[37]) < 1e-9);
}

#[test]
fn grid_refinement_reports_change() {
    let gen = QubitModel::sign_change(1.0, 0.1, 1.0).generator().unwrap();
    let qs = solve_quasi_stationary(&gen, &FloquetOptions { grid_points: 64, ..Default::default() }).unwrap();
    assert!(qs.diagnostics.refinement_change.unwrap() < 1e-8);
    assert!(qs.grid_points() > 64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// The returned samples form a physical, periodic trajectory of the ODE.
    #[test]
    fn quasi_stationary_state_is_a_periodic_physical_orbit(
        omega in 0.2f64..10.0, flux in 0.01f64..20.0, offset in 0.0f64..1.0, delta in -2.0f64..2.0,
    ) {
        let model = QubitModel {
            gamma0: 1.0,
            coupling: Waveform::cosine(offset, 1.0, omega),
            detuning: Waveform::constant(delta),
            flux,
            omega,
            omega0: 0.0,
        };
        let gen = model.generator().unwrap();
        let qs = solve_quasi_stationary(&gen, &FloquetOptions { refine_grid: false, grid_points: 32, ..Default::default() }).unwrap();
        prop_assert!(qs.diagnostics.periodicity_error < 1e-8);
        let times = period_grid(qs.period, 32);
        let (traj, _) = propagate(&gen, &qs.samples[0], true, &times[1..], Default::default()).unwrap();
        for (a, b) in traj.iter().zip(&qs.samples[1..]) {
            prop_assert!(dense::max_abs_diff(a, b) < 1e-8);
        }
        for k in 0..qs.times.len() {
            let rho = qs.density(k).devectorize();
            prop_assert!(floquet_core::liouvillian::hermiticity_error(&rho) < 1e-10);
            let tr = rho[(0, 0)] + rho[(1, 1)];
            prop_assert!((tr - 1.0).norm() < 1e-12);
            let det = rho[(0, 0)] * rho[(1, 1)] - rho[(0, 1)] * rho[(1, 0)];
            prop_assert!(det.re > -1e-9);
        }
    }
}
