use std::sync::Arc;

use floquet_core::liouvillian::{build_generator, vectorize, Basis, Component, LindbladSpec, Modulation};
use floquet_core::models::{KerrModel, LambdaModel, QubitModel, Waveform};
use floquet_core::numerics::{dense, CMatrix, C64};
use floquet_core::Error;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn qubit_reference(delta: f64, gamma: f64, kappa: f64) -> (CMatrix, Vec<C64>) {
    let i = c(0.0, 1.0);
    let a = dense::from_rows(&[
        vec![-i * delta - gamma / 2.0, c(0.0, 0.0), -i * kappa],
        vec![c(0.0, 0.0), i * delta - gamma / 2.0, i * kappa],
        vec![-2.0 * i * kappa, 2.0 * i * kappa, c(-gamma, 0.0)],
    ]);
    (a, vec![i * kappa, -i * kappa, c(0.0, 0.0)])
}

fn lambda_reference(gamma: f64, f: f64, d1: f64, d2: f64, big_f: f64) -> (CMatrix, Vec<C64>) {
    let i = c(0.0, 1.0);
    let z = c(0.0, 0.0);
    let k = (gamma * f / 2.0).sqrt();
    let ff = c(big_f, 0.0);
    let g = gamma;
    let a = dense::from_rows(&[
        vec![c(-g, 0.0), z, -i * k, i * k, -i * ff, i * ff, z, z],
        vec![z, z, z, z, i * ff, -i * ff, z, z],
        vec![-2.0 * i * k, -i * k, -i * (c(d1, -g / 2.0)), z, z, z, i * ff, z],
        vec![2.0 * i * k, i * k, z, i * c(d1, g / 2.0), z, z, z, -i * ff],
        vec![-i * ff, i * ff, z, z, -i * c(d2, -g / 2.0), z, z, i * k],
        vec![i * ff, -i * ff, z, z, z, i * c(d2, g / 2.0), -i * k, z],
        vec![z, z, i * ff, z, z, -i * k, -i * (d1 - d2), z],
        vec![z, z, z, -i * ff, i * k, z, z, i * (d1 - d2)],
    ]);
    (a, vec![z, z, i * k, -i * k, z, z, z, z])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn qubit_generator_matches_closed_form(
        gamma0 in 0.1f64..5.0, flux in 0.0f64..50.0, delta in -5.0f64..5.0, w in -1.5f64..1.5, omega in 0.05f64..10.0, t in 0.0f64..1.0,
    ) {
        let model = QubitModel {
            gamma0,
            coupling: Waveform::cosine(w, 1.0, omega),
            detuning: Waveform::constant(delta),
            flux,
            omega,
            omega0: 0.0,
        };
        let gen = model.generator().unwrap();
        let time = t * model.period();
        let wt = model.coupling.eval(time);
        let (a, cv) = qubit_reference(delta, gamma0 * wt * wt, (flux * gamma0 / 2.0).sqrt() * wt);
        prop_assert!(dense::max_abs_diff_mat(&gen.a_dense(time), &a) < 1e-12 * (1.0 + flux + gamma0));
        prop_assert!(dense::max_abs_diff(&gen.c_at(time), &cv) < 1e-12 * (1.0 + flux));
    }

    #[test]
    fn lambda_generator_matches_closed_form(
        gamma in 0.1f64..3.0, flux in 0.0f64..20.0, d1 in -4.0f64..4.0, d2 in -4.0f64..4.0, f0 in 0.0f64..12.0, t in 0.0f64..1.0,
    ) {
        let model = LambdaModel { gamma, drive: Waveform::cosine(f0, f0, 0.3), delta1: d1, delta2: d2, flux, omega: 0.3, omega0: 0.0 };
        let gen = model.generator().unwrap();
        let time = t * model.period();
        let (a, cv) = lambda_reference(gamma, flux, d1, d2, model.drive.eval(time));
        prop_assert!(dense::max_abs_diff_mat(&gen.a_dense(time), &a) < 1e-11 * (1.0 + flux + f0));
        prop_assert!(dense::max_abs_diff(&gen.c_at(time), &cv) < 1e-12 * (1.0 + flux));
    }

    /// The reduced affine map reproduces the full Liouvillian on physical states.
    #[test]
    fn reduction_agrees_with_full_liouvillian(
        re in proptest::collection::vec(-1.0f64..1.0, 16), im in proptest::collection::vec(-1.0f64..1.0, 16),
        delta in -3.0f64..3.0, u in -1.0f64..1.0,
    ) {
        let model = KerrModel { gamma: 1.0, u, detuning: Waveform::constant(delta), flux: 2.0, n_max: 3, omega: 1.0 };
        let spec = model.spec().unwrap();
        let gen = build_generator(&spec).unwrap();
        let m = CMatrix::from_fn(4, 4, |i, j| c(re[i + 4 * j], im[i + 4 * j]));
        let mut rho = dense::matmul(&m, &dense::adjoint(&m));
        let tr: C64 = (0..4).map(|k| rho[(k, k)]).sum();
        rho = dense::scale(&rho, tr.inv());
        let v = vectorize(&rho, gen.basis().clone()).unwrap();
        let mut reduced = vec![c(0.0, 0.0); gen.dim()];
        gen.operator_at(0.0).apply_affine(&v.values, &mut reduced);
        let flat: Vec<C64> = (0..16).map(|p| rho[(p % 4, p / 4)]).collect();
        let mut full = vec![c(0.0, 0.0); 16];
        spec.full_liouvillian(0.0).mul_vec_into(&flat, &mut full);
        let trace: C64 = (0..4).map(|k| full[k * 5]).sum();
        prop_assert!(trace.norm() < 1e-12);
        for (k, comp) in gen.basis().components().iter().enumerate() {
            let want = full[comp.i + 4 * comp.j] * comp.weight;
            prop_assert!((reduced[k] - want).norm() < 1e-11);
        }
    }
}

#[test]
fn round_trip_through_reduced_vector() {
    let basis = Arc::new(QubitModel::basis());
    let rho = dense::from_rows(&[vec![c(0.7, 0.0), c(0.1, 0.2)], vec![c(0.1, -0.2), c(0.3, 0.0)]]);
    let v = vectorize(&rho, basis).unwrap();
    assert!((v.values[2] - c(0.6, 0.0)).norm() < 1e-15);
    assert!(dense::max_abs_diff_mat(&v.devectorize(), &rho) < 1e-15);
}

#[test]
fn basis_validation() {
    let comp = |i, j| Component { i, j, weight: 1.0 };
    assert!(matches!(Basis::new(2, vec![comp(0, 1), comp(1, 0)]), Err(Error::InvalidBasis(_))));
    assert!(matches!(Basis::new(2, vec![comp(0, 1), comp(0, 1), comp(1, 1)]), Err(Error::InvalidBasis(_))));
    assert!(matches!(Basis::new(2, vec![comp(0, 0), comp(0, 1), comp(1, 1)]), Err(Error::InvalidBasis(_))));
    assert!(matches!(Basis::new(2, vec![comp(0, 1), comp(1, 0), Component { i: 1, j: 1, weight: 0.0 }]), Err(Error::InvalidBasis(_))));
    assert!(Basis::new(2, vec![comp(1, 1), comp(1, 0), comp(0, 1)]).is_ok());
    assert_eq!(Basis::column_stacked(4).dim(), 15);
}

fn two_level_spec(h: CMatrix, rate: Modulation) -> LindbladSpec {
    LindbladSpec {
        period: 1.0,
        hamiltonian: vec![(Modulation::constant(1.0), h)],
        jump: dense::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]]),
        rate,
        basis: Arc::new(QubitModel::basis()),
    }
}

#[test]
fn invalid_specifications_are_rejected() {
    let bad_h = dense::from_rows(&[vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.5, 0.0), c(0.0, 0.0)]]);
    assert!(matches!(build_generator(&two_level_spec(bad_h, Modulation::constant(1.0))), Err(Error::NonHermitian { .. })));
    let h = dense::identity(2);
    let neg = Modulation::periodic(|t| c((2.0 * std::f64::consts::PI * t).cos(), 0.0));
    assert!(matches!(build_generator(&two_level_spec(h.clone(), neg)), Err(Error::InvalidRate { .. })));
    assert!(build_generator(&two_level_spec(h, Modulation::constant(0.0))).is_ok());
}

#[test]
fn static_detection_and_gap() {
    let q = QubitModel::constant(1.0, 0.0).generator().unwrap();
    assert!(q.is_static());
    // f = 0: eigenvalues −γ/2 (twice) and −γ
    assert!((q.dissipation_gap(0.0).unwrap() - 0.5).abs() < 1e-12);
    let m = QubitModel::sign_change(1.0, 0.5, 1.0).generator().unwrap();
    assert!(!m.is_static());
    assert!(m.dissipation_gap(m.period() / 4.0).unwrap() < 1e-12);
}

#[test]
fn instantaneous_state_of_linear_cavity() {
    // U = 0: coherent state with α = −√(γf)/(δ + iγ/2) up to the frame sign
    let (gamma, f, delta) = (1.0, 0.3, -1.2);
    let model = KerrModel { gamma, u: 0.0, detuning: Waveform::constant(delta), flux: f, n_max: 14, omega: 1.0 };
    let gen = model.generator().unwrap();
    let x = gen.instantaneous_steady_state(0.0).unwrap();
    let rho = floquet_core::liouvillian::DensityVector::new(x, gen.basis().clone()).unwrap().devectorize();
    let n: f64 = (0..15).map(|k| k as f64 * rho[(k, k)].re).sum();
    let alpha = c(-(gamma * f).sqrt(), 0.0) / c(delta, gamma / 2.0);
    assert!((n - alpha.norm_sqr()).abs() < 1e-10, "{n} vs {}", alpha.norm_sqr());
}
