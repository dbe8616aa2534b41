use thiserror::Error;

/// Failure modes shared by every solver stage.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },
    #[error("maximum number of integration steps ({0}) exceeded")]
    MaxSteps(usize),
    #[error("eigenvector matrix is nearly defective (condition number {condition:e})")]
    NearDefective { condition: f64 },
    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,
    #[error("monodromy eigenvalue with modulus {modulus} is not strictly inside the unit circle")]
    NonDecayingMode { modulus: f64 },
    #[error("monodromy eigenvalue underflowed; the period is too long to resolve every Floquet exponent")]
    MonodromyUnderflow,
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("samples are not uniformly spaced")]
    NonUniformGrid,
    #[error("{samples} samples cannot resolve harmonics up to |m| = {m_max}")]
    TooFewSamples { samples: usize, m_max: usize },
    #[error("Hamiltonian is not Hermitian at t = {t} (deviation {deviation:e})")]
    NonHermitian { t: f64, deviation: f64 },
    #[error("decay rate {rate} at t = {t} is negative or complex")]
    InvalidRate { t: f64, rate: f64 },
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("density matrix has eigenvalue {value:e} below tolerance")]
    NegativeEigenvalue { value: f64 },
    #[error("Fock truncation insufficient: top-level population {population:e} at n_max = {n_max}")]
    Truncation { population: f64, n_max: usize },
    #[error("iterative solver did not converge (residual {residual:e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
