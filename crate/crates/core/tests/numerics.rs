use std::f64::consts::PI;

use floquet_core::numerics::dense::{self, max_abs_diff};
use floquet_core::numerics::eigen::{eig_biorthonormal, matrix_log_over_period};
use floquet_core::numerics::fourier::{
    fourier_coefficients, period_grid, periodic_antiderivative, periodic_derivative, scalar_fourier, trig_interpolate,
};
use floquet_core::numerics::krylov::{gmres, GmresOptions};
use floquet_core::numerics::ode::{integrate_linear_ode, Dopri5, OdeOptions, OutputMode};
use floquet_core::numerics::sparse::{BandedLu, SparseMatrix};
use floquet_core::numerics::{c, r, CMatrix, C64};
use floquet_core::Error;
use proptest::prelude::*;

fn assert_close(a: C64, b: C64, tol: f64) {
    assert!((a - b).norm() <= tol, "{a} vs {b} (tol {tol:e})");
}

#[test]
fn exponential_decay_reaches_e_inverse() {
    let g = |_t: f64| CMatrix::from_fn(1, 1, |_, _| r(-1.0));
    let y0 = CMatrix::from_fn(1, 1, |_, _| r(1.0));
    let traj = integrate_linear_ode(&g, None, &y0, 0.0, &[1.0], OdeOptions::default()).unwrap();
    assert_close(traj.states[0][(0, 0)], r((-1.0f64).exp()), 1e-9);
}

#[test]
fn oscillator_with_inhomogeneity() {
    // y' = -i w y + 1, y(0) = 0  ->  y = (1 - e^{-iwt}) / (i w)
    let w = 3.0;
    let g = move |_t: f64| CMatrix::from_fn(1, 1, |_, _| c(0.0, -w));
    let h = |_t: f64| vec![r(1.0)];
    let y0 = CMatrix::zeros(1, 1);
    let ts: Vec<f64> = (1..=20).map(|k| k as f64 * 0.37).collect();
    let traj = integrate_linear_ode(&g, Some(&h), &y0, 0.0, &ts, OdeOptions::default()).unwrap();
    for (t, y) in ts.iter().zip(&traj.states) {
        let exact = (r(1.0) - c(0.0, -w * t).exp()) / c(0.0, w);
        assert_close(y[(0, 0)], exact, 1e-9);
    }
}

#[test]
fn continuous_extension_matches_landing() {
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        dy[0] = c(-0.3, -2.0) * y[0] + r(t.cos());
        dy[1] = c(0.0, 1.0) * y[0] - r(0.5) * y[1];
        Ok(())
    };
    let outputs: Vec<f64> = (1..=50).map(|k| 0.1 * k as f64).collect();
    let y0 = [r(1.0), r(0.0)];
    let land = Dopri5::new(2, rhs, OdeOptions::default()).integrate(0.0, &y0, &outputs, OutputMode::Land).unwrap();
    let interp = Dopri5::new(2, rhs, OdeOptions::default()).integrate(0.0, &y0, &outputs, OutputMode::Interpolate).unwrap();
    for (a, b) in land.states.iter().zip(&interp.states) {
        assert!(max_abs_diff(a, b) < 1e-8, "{}", max_abs_diff(a, b));
    }
    assert!(interp.stats.accepted < land.stats.accepted);
}

#[test]
fn nonfinite_rhs_is_reported() {
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        dy[0] = if t > 0.5 { r(f64::NAN) } else { -y[0] };
        Ok(())
    };
    let err = Dopri5::new(1, rhs, OdeOptions::default()).integrate(0.0, &[r(1.0)], &[1.0], OutputMode::Land).unwrap_err();
    assert!(matches!(err, Error::NonFinite { .. } | Error::StepSizeUnderflow { .. }), "{err:?}");
}

fn generator_from(seed: &[f64]) -> CMatrix {
    // dissipative 3x3: random skew-Hermitian plus a negative shift
    let n = 3;
    let mut m = CMatrix::from_fn(n, n, |i, j| c(seed[i * n + j], seed[9 + i * n + j]));
    let adj = dense::adjoint(&m);
    m = dense::scale(&dense::sub(&m, &adj), r(0.5));
    for i in 0..n {
        m[(i, i)] -= r(0.2 + seed[18 + i].abs());
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn halving_tolerance_stays_within_reported_error(seed in proptest::collection::vec(-1.0f64..1.0, 21)) {
        let g0 = generator_from(&seed);
        let g = move |t: f64| {
            let mut m = g0.clone();
            m[(0, 1)] += c(0.5 * t.sin(), 0.0);
            m
        };
        let y0 = dense::identity(3);
        let loose = OdeOptions::with_tolerances(1e-6, 1e-8);
        let tight = OdeOptions::with_tolerances(0.5e-6, 0.5e-8);
        let a = integrate_linear_ode(&g, None, &y0, 0.0, &[2.0], loose).unwrap();
        let b = integrate_linear_ode(&g, None, &y0, 0.0, &[2.0], tight).unwrap();
        let diff = dense::max_abs_diff_mat(&a.states[0], &b.states[0]);
        prop_assert!(diff <= a.stats.error_estimate, "diff {diff:e} vs estimate {:e}", a.stats.error_estimate);
    }

    #[test]
    fn biorthonormal_reconstruction(seed in proptest::collection::vec(-1.0f64..1.0, 21)) {
        let m = generator_from(&seed);
        let es = eig_biorthonormal(&m).unwrap();
        let rec = es.reconstruct();
        prop_assert!(dense::max_abs_diff_mat(&rec, &m) < 1e-10);
        let prod = &es.left * &es.right;
        prop_assert!(dense::max_abs_diff_mat(&prod, &dense::identity(3)) < 1e-10);
        for w in es.values.windows(2) {
            prop_assert!(w[0].re >= w[1].re);
        }
    }

    #[test]
    fn fourier_round_trip(coefs in proptest::collection::vec(-1.0f64..1.0, 10), t in 0.0f64..10.0) {
        let period = 2.7;
        let w = 2.0 * PI / period;
        let f = |t: f64| -> C64 {
            (0..5).map(|m| c(coefs[2 * m], coefs[2 * m + 1]) * c(0.0, -((m as f64) - 2.0) * w * t).exp()).sum()
        };
        let times = period_grid(period, 64);
        let samples: Vec<Vec<C64>> = times.iter().map(|&t| vec![f(t)]).collect();
        let fs = fourier_coefficients(&times, &samples, period, 4).unwrap();
        prop_assert!((fs.eval(t)[0] - f(t)).norm() < 1e-12);
        let interp = trig_interpolate(&samples[..64], period, t);
        prop_assert!((interp[0] - f(t)).norm() < 1e-12);
    }
}

#[test]
fn eigen_examples() {
    let m = CMatrix::from_fn(2, 2, |i, j| if i == j { [r(1.0), c(0.0, 2.0)][i] } else { r(0.0) });
    let es = eig_biorthonormal(&m).unwrap();
    assert_close(es.values[0], r(1.0), 1e-14);
    assert_close(es.values[1], c(0.0, 2.0), 1e-14);

    let swap = CMatrix::from_fn(2, 2, |i, j| if i != j { r(1.0) } else { r(0.0) });
    let es = eig_biorthonormal(&swap).unwrap();
    assert_close(es.values[0], r(1.0), 1e-14);
    assert_close(es.values[1], r(-1.0), 1e-14);
    let s = 0.5f64.sqrt();
    let r0 = es.right_vec(0);
    assert_close(r0[0].norm().into(), r(s), 1e-14);
    assert_close(r0[1] / r0[0], r(1.0), 1e-14);
}

#[test]
fn defective_matrix_is_rejected() {
    let jordan = CMatrix::from_fn(2, 2, |i, j| if j >= i { r(1.0) } else { r(0.0) });
    assert!(matches!(eig_biorthonormal(&jordan), Err(Error::NearDefective { .. })));
}

#[test]
fn principal_logarithm() {
    let t = 2.0;
    let omega = 2.0 * PI / t;
    let m = CMatrix::from_fn(2, 2, |i, j| if i == j { [r(0.5), c(-1.0 * t, 0.3 * t).exp()][i] } else { r(0.0) });
    let (b, es) = matrix_log_over_period(&m, t).unwrap();
    assert_close(b[(0, 0)], r(0.5f64.ln() / t), 1e-13);
    assert_close(b[(1, 1)], c(-1.0, 0.3), 1e-13);
    assert!(es.values.iter().all(|v| v.im > -omega / 2.0 && v.im <= omega / 2.0));

    // exactly on the branch cut: accepted as +Ω/2
    let mu = C64::from_polar((-t).exp(), PI);
    let (b, _) = matrix_log_over_period(&CMatrix::from_fn(1, 1, |_, _| mu), t).unwrap();
    assert_close(b[(0, 0)], c(-1.0, omega / 2.0), 1e-12);

    let unstable = CMatrix::from_fn(1, 1, |_, _| r(1.0));
    assert!(matches!(matrix_log_over_period(&unstable, t), Err(Error::NonDecayingMode { .. })));
}

#[test]
fn fourier_examples() {
    let period = 3.0;
    let w = 2.0 * PI / period;
    let times = period_grid(period, 32);
    let constant: Vec<C64> = times.iter().map(|_| r(2.5)).collect();
    let f = scalar_fourier(&times, &constant, period, 3).unwrap();
    for (k, v) in f.iter().enumerate() {
        let expect = if k == 3 { r(2.5) } else { r(0.0) };
        assert_close(*v, expect, 1e-14);
    }
    let cosine: Vec<C64> = times.iter().map(|&t| r((w * t).cos())).collect();
    let f = scalar_fourier(&times, &cosine, period, 3).unwrap();
    assert_close(f[2], r(0.5), 1e-14);
    assert_close(f[4], r(0.5), 1e-14);
    assert_close(f[3], r(0.0), 1e-14);

    assert!(matches!(scalar_fourier(&times, &cosine, period, 16), Err(Error::TooFewSamples { .. })));
    let mut bad = times.clone();
    bad[5] += 0.01;
    assert!(matches!(scalar_fourier(&bad, &cosine, period, 3), Err(Error::NonUniformGrid)));
}

#[test]
fn spectral_calculus() {
    let period = 2.0;
    let w = 2.0 * PI / period;
    let times = &period_grid(period, 64)[..64];
    let s: Vec<Vec<C64>> = times.iter().map(|&t| vec![r((w * t).sin() + 0.3 * (3.0 * w * t).cos())]).collect();
    let d = periodic_derivative(&s, period);
    for (t, v) in times.iter().zip(&d) {
        let exact = w * (w * t).cos() - 0.9 * w * (3.0 * w * t).sin();
        assert_close(v[0], r(exact), 1e-11);
    }
    let with_mean: Vec<Vec<C64>> = s.iter().map(|v| vec![v[0] + 1.5]).collect();
    let (a, mean) = periodic_antiderivative(&with_mean, period);
    assert_close(mean[0], r(1.5), 1e-13);
    for (t, v) in times.iter().zip(&a) {
        let exact = -(w * t).cos() / w + 0.1 * (3.0 * w * t).sin() / w;
        assert_close(v[0], r(exact), 1e-12);
    }
}

#[test]
fn gmres_solves_dense_system() {
    let n = 12;
    let a = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            r(3.0 + i as f64 * 0.1)
        } else {
            c(((i * 7 + j * 3) % 5) as f64 * 0.05, ((i + 2 * j) % 3) as f64 * 0.04)
        }
    });
    let b: Vec<C64> = (0..n).map(|k| c(k as f64, 1.0)).collect();
    let mut apply = |v: &[C64], out: &mut [C64]| {
        out.copy_from_slice(&dense::mat_vec(&a, v));
        Ok(())
    };
    let res = gmres(&mut apply, &b, None, GmresOptions { tol: 1e-13, restart: 5, max_iter: 200 }).unwrap();
    let x = dense::solve(&a, &b).unwrap();
    assert!(max_abs_diff(&res.x, &x) < 1e-11);
}

#[test]
fn banded_lu_matches_dense() {
    let n = 40;
    let mut tr = Vec::new();
    for i in 0..n {
        tr.push((i, i, c(0.1 + (i % 3) as f64 * 0.01, -1.0)));
        if i >= 3 {
            tr.push((i, i - 3, c(2.0, 0.5)));
        }
        if i + 2 < n {
            tr.push((i, i + 2, r(-0.7)));
        }
    }
    let s = SparseMatrix::from_triplets(n, n, &tr);
    let lu = BandedLu::from_sparse(&s, &s.values).unwrap();
    let b: Vec<C64> = (0..n).map(|k| c((k as f64).sin(), 1.0)).collect();
    let mut x = b.clone();
    lu.solve_in_place(&mut x);
    let y = dense::solve(&s.to_dense(), &b).unwrap();
    assert!(max_abs_diff(&x, &y) < 1e-10, "{}", max_abs_diff(&x, &y));
}
