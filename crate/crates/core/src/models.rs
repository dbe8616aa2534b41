//! The three driven systems: a qubit with modulated coupling, a Λ-system
//! with a modulated control drive, and a Kerr cavity with modulated detuning.
//!
//! Rates are in units of the bare decay rate γ. The probe drive entering the
//! effective Hamiltonian is `√(γ f / 2)` for the qubit and Λ-system and
//! `√(γ f)` for the Kerr cavity.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::liouvillian::{build_generator, Basis, Component, LindbladSpec, Modulation, PeriodicGenerator};
use crate::numerics::{dense, CMatrix, C64};

/// `offset + amplitude · cos(ω t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waveform {
    pub offset: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

impl Waveform {
    pub fn constant(value: f64) -> Self {
        Self { offset: value, amplitude: 0.0, omega: 0.0, phase: 0.0 }
    }

    pub fn cosine(offset: f64, amplitude: f64, omega: f64) -> Self {
        Self { offset, amplitude, omega, phase: 0.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            self.offset
        } else {
            self.offset + self.amplitude * (self.omega * t + self.phase).cos()
        }
    }

    pub fn is_constant(&self) -> bool {
        self.amplitude == 0.0 || self.omega == 0.0
    }

    pub fn min(&self) -> f64 {
        self.offset - self.amplitude.abs()
    }

    pub fn max(&self) -> f64 {
        self.offset + self.amplitude.abs()
    }

    /// Checks that the waveform repeats with the protocol period `2π/Ω`.
    pub fn check_commensurate(&self, protocol_omega: f64) -> Result<()> {
        if self.is_constant() {
            return Ok(());
        }
        let ratio = self.omega / protocol_omega;
        if !(ratio.is_finite() && ratio >= 1.0 - 1e-12 && (ratio - ratio.round()).abs() < 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "waveform frequency {} is not a harmonic of the protocol frequency {}",
                self.omega, protocol_omega
            )));
        }
        Ok(())
    }

    fn modulation(&self, scale: f64) -> Modulation {
        if self.is_constant() {
            Modulation::constant(scale * self.offset)
        } else {
            let w = *self;
            Modulation::periodic(move |t| C64::new(scale * w.eval(t), 0.0))
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be non-negative, got {v}")))
    }
}

fn ket_bra(n: usize, i: usize, j: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |a, b| if a == i && b == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// Input-output data of a model probed through the lowering operator.
#[derive(Debug, Clone)]
pub struct ScatteringChannel {
    pub flux: f64,
    /// `√π g(t)`; its square is the inelastic emission rate.
    pub coupling: Modulation,
    /// Component holding `⟨σ₋⟩` and its weight.
    pub lowering: usize,
    /// Excited-state population as `Σ w_k s_k`.
    pub excited: Vec<(usize, f64)>,
}

impl ScatteringChannel {
    pub fn lowering_mean(&self, s: &[C64]) -> C64 {
        s[self.lowering]
    }

    pub fn excited_population(&self, s: &[C64]) -> f64 {
        self.excited.iter().map(|&(k, w)| (s[k] * w).re).sum()
    }

    /// Reflection amplitude `R = −i √(π/f) g s_σ₋`.
    pub fn reflection(&self, t: f64, s: &[C64]) -> C64 {
        C64::new(0.0, -1.0) * self.coupling.at(t) / self.flux.sqrt() * self.lowering_mean(s)
    }
}

/// Two-level emitter with coupling `g(t) = g₀ w(t)` and rate `γ(t) = γ₀ w(t)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitModel {
    pub gamma0: f64,
    pub coupling: Waveform,
    pub detuning: Waveform,
    pub flux: f64,
    /// Protocol frequency Ω.
    pub omega: f64,
    /// Probe frequency label, used as an offset in spectra.
    pub omega0: f64,
}

impl QubitModel {
    pub fn sign_change(gamma0: f64, omega: f64, flux: f64) -> Self {
        Self {
            gamma0,
            coupling: Waveform::cosine(0.0, 1.0, omega),
            detuning: Waveform::constant(0.0),
            flux,
            omega,
            omega0: 0.0,
        }
    }

    pub fn on_off(gamma0: f64, omega: f64, flux: f64) -> Self {
        Self { coupling: Waveform::cosine(1.0, 1.0, omega), ..Self::sign_change(gamma0, omega, flux) }
    }

    pub fn constant(gamma0: f64, flux: f64) -> Self {
        Self { coupling: Waveform::constant(1.0), ..Self::sign_change(gamma0, 1.0, flux) }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn basis() -> Basis {
        Basis::new(
            2,
            vec![
                Component { i: 0, j: 1, weight: 1.0 },
                Component { i: 1, j: 0, weight: 1.0 },
                Component { i: 1, j: 1, weight: 2.0 },
            ],
        )
        .expect("qubit basis")
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.gamma0 * self.coupling.eval(t).powi(2)
    }

    /// `√π g(t) = √(γ₀/2) w(t)`.
    pub fn sqrt_pi_g(&self, t: f64) -> f64 {
        (self.gamma0 / 2.0).sqrt() * self.coupling.eval(t)
    }

    fn validate(&self) -> Result<()> {
        check_positive("gamma0", self.gamma0)?;
        check_nonnegative("flux", self.flux)?;
        check_positive("omega", self.omega)?;
        self.coupling.check_commensurate(self.omega)?;
        self.detuning.check_commensurate(self.omega)
    }

    pub fn spec(&self) -> Result<LindbladSpec> {
        self.validate()?;
        let a = (self.gamma0 * self.flux / 2.0).sqrt();
        let lower = ket_bra(2, 0, 1);
        let raise = ket_bra(2, 1, 0);
        let pe = ket_bra(2, 1, 1);
        let rate = if self.coupling.is_constant() {
            Modulation::constant(self.gamma0 * self.coupling.offset.powi(2))
        } else {
            let (g0, w) = (self.gamma0, self.coupling);
            Modulation::periodic(move |t| C64::new(g0 * w.eval(t).powi(2), 0.0))
        };
        Ok(LindbladSpec {
            period: self.period(),
            hamiltonian: vec![
                (self.detuning.modulation(-1.0), pe),
                (self.coupling.modulation(a), dense::add(&lower, &raise)),
            ],
            jump: lower,
            rate,
            basis: Arc::new(Self::basis()),
        })
    }

    pub fn generator(&self) -> Result<PeriodicGenerator> {
        build_generator(&self.spec()?)
    }

    pub fn channel(&self) -> ScatteringChannel {
        let m = *self;
        ScatteringChannel {
            flux: self.flux,
            coupling: if self.coupling.is_constant() {
                Modulation::constant(self.sqrt_pi_g(0.0))
            } else {
                Modulation::periodic(move |t| C64::new(m.sqrt_pi_g(t), 0.0))
            },
            lowering: 1,
            excited: vec![(2, 0.5)],
        }
    }
}

/// Λ-system (levels g = 0, e = 1, s = 2) with probe on g↔e and control `F(t)` on s↔e.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaModel {
    pub gamma: f64,
    pub drive: Waveform,
    pub delta1: f64,
    pub delta2: f64,
    pub flux: f64,
    pub omega: f64,
    pub omega0: f64,
}

impl LambdaModel {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Components `(P_e, P_s, ρ_ge, ρ_eg, ρ_se, ρ_es, ρ_gs, ρ_sg)`.
    pub fn basis() -> Basis {
        let c = |i, j| Component { i, j, weight: 1.0 };
        Basis::new(3, vec![c(1, 1), c(2, 2), c(0, 1), c(1, 0), c(2, 1), c(1, 2), c(0, 2), c(2, 0)]).expect("lambda basis")
    }

    fn validate(&self) -> Result<()> {
        check_positive("gamma", self.gamma)?;
        check_nonnegative("flux", self.flux)?;
        check_positive("omega", self.omega)?;
        if !(self.delta1.is_finite() && self.delta2.is_finite()) {
            return Err(Error::InvalidArgument("detunings must be finite".into()));
        }
        self.drive.check_commensurate(self.omega)
    }

    pub fn spec(&self) -> Result<LindbladSpec> {
        self.validate()?;
        let a = (self.gamma * self.flux / 2.0).sqrt();
        let n = 3;
        let h0 = {
            let mut h = dense::scale(&ket_bra(n, 1, 1), C64::new(-self.delta1, 0.0));
            h = dense::add(&h, &dense::scale(&ket_bra(n, 2, 2), C64::new(-(self.delta1 - self.delta2), 0.0)));
            let probe = dense::add(&ket_bra(n, 0, 1), &ket_bra(n, 1, 0));
            dense::add(&h, &dense::scale(&probe, C64::new(a, 0.0)))
        };
        let control = dense::add(&ket_bra(n, 1, 2), &ket_bra(n, 2, 1));
        Ok(LindbladSpec {
            period: self.period(),
            hamiltonian: vec![(Modulation::constant(1.0), h0), (self.drive.modulation(1.0), control)],
            jump: ket_bra(n, 0, 1),
            rate: Modulation::constant(self.gamma),
            basis: Arc::new(Self::basis()),
        })
    }

    pub fn generator(&self) -> Result<PeriodicGenerator> {
        build_generator(&self.spec()?)
    }

    pub fn channel(&self) -> ScatteringChannel {
        ScatteringChannel {
            flux: self.flux,
            coupling: Modulation::constant((self.gamma / 2.0).sqrt()),
            lowering: 3,
            excited: vec![(0, 1.0)],
        }
    }
}

/// Kerr cavity truncated to Fock states `0..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrModel {
    pub gamma: f64,
    pub u: f64,
    pub detuning: Waveform,
    pub flux: f64,
    pub n_max: usize,
    pub omega: f64,
}

impl KerrModel {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn with_truncation(&self, n_max: usize) -> Self {
        Self { n_max, ..*self }
    }

    pub fn with_detuning(&self, delta: f64) -> Self {
        Self { detuning: Waveform::constant(delta), ..*self }
    }

    fn validate(&self) -> Result<()> {
        check_positive("gamma", self.gamma)?;
        check_nonnegative("flux", self.flux)?;
        check_positive("omega", self.omega)?;
        if !self.u.is_finite() {
            return Err(Error::InvalidArgument("interaction must be finite".into()));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidArgument("n_max must be at least 1".into()));
        }
        self.detuning.check_commensurate(self.omega)
    }

    pub fn annihilation(&self) -> CMatrix {
        let n = self.levels();
        CMatrix::from_fn(n, n, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn spec(&self) -> Result<LindbladSpec> {
        self.validate()?;
        let n = self.levels();
        let b = self.annihilation();
        let num = CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(i as f64, 0.0) } else { C64::new(0.0, 0.0) });
        let inter = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(0.5 * self.u * (i as f64) * (i as f64 - 1.0), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let drive = dense::scale(&dense::add(&b, &dense::adjoint(&b)), C64::new((self.gamma * self.flux).sqrt(), 0.0));
        Ok(LindbladSpec {
            period: self.period(),
            hamiltonian: vec![(Modulation::constant(1.0), dense::add(&inter, &drive)), (self.detuning.modulation(-1.0), num)],
            jump: b,
            rate: Modulation::constant(self.gamma),
            basis: Arc::new(Basis::column_stacked(n)),
        })
    }

    pub fn generator(&self) -> Result<PeriodicGenerator> {
        build_generator(&self.spec()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Qubit(QubitModel),
    Lambda(LambdaModel),
    Kerr(KerrModel),
}

impl Model {
    pub fn generator(&self) -> Result<PeriodicGenerator> {
        match self {
            Model::Qubit(m) => m.generator(),
            Model::Lambda(m) => m.generator(),
            Model::Kerr(m) => m.generator(),
        }
    }

    pub fn period(&self) -> f64 {
        match self {
            Model::Qubit(m) => m.period(),
            Model::Lambda(m) => m.period(),
            Model::Kerr(m) => m.period(),
        }
    }

    pub fn channel(&self) -> Option<ScatteringChannel> {
        match self {
            Model::Qubit(m) => Some(m.channel()),
            Model::Lambda(m) => Some(m.channel()),
            Model::Kerr(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Qubit(_) => "qubit",
            Model::Lambda(_) => "lambda",
            Model::Kerr(_) => "kerr",
        }
    }
}
