//! Configuration-driven runner for quasi-stationary scattering experiments.

pub mod config;
pub mod run;
pub mod sweep;
pub mod table;

pub use config::{parse_config, ConfigErrors, ExperimentConfig};
pub use run::{compute, run_experiment, RunError, RunOptions, RunOutput};
pub use sweep::{run_sweep, SweepReport};
