//! Measurable quantities built from a quasi-stationary state: scattering
//! amplitudes and fluxes, power spectra, photon correlations, and the Kerr
//! cavity's occupation, entropy and hysteresis.

pub mod correlations;
pub mod kerr;
pub mod scattering;
pub mod spectrum;

pub use correlations::{g1_correlation, g2_correlation, CorrelationResult};
pub use kerr::{kerr_observables, KerrObservables};
pub use scattering::{elastic_spectrum, output_fluxes, reflection_transmission, AmplitudeTrace, ElasticLine, OutputFluxes};
pub use spectrum::{inelastic_spectrum, power_spectrum, LorentzianTerm, SpectrumResult};

/// Output port: reflected (L) or transmitted (R) photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    L,
    R,
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Channel::L => "L",
            Channel::R => "R",
        })
    }
}
