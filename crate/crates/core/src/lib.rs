//! Quasi-stationary states of periodically modulated open quantum systems
//! probed by a weak input field.

pub mod error;
pub mod expansions;
pub mod numerics;

pub use error::{Error, Result};
pub mod floquet;
pub mod liouvillian;
pub mod models;
pub mod observables;
