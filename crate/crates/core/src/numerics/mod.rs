//! Numerical building blocks: integration, eigensystems, Fourier analysis,
//! sparse storage and Krylov solves.

pub mod dense;
pub mod eigen;
pub mod fourier;
pub mod krylov;
pub mod ode;
pub mod sparse;

pub use num_complex::Complex64 as C64;

/// Dense complex matrix.
pub type CMatrix = faer::Mat<C64>;

pub use eigen::{eig_biorthonormal, matrix_log_over_period, EigenSystem};
pub use fourier::{fourier_coefficients, FourierSeries};
pub use ode::{integrate_linear_ode, Dopri5, OdeOptions, OutputMode, Trajectory};

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}
