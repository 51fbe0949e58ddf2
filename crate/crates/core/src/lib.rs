//! Simulation library for squeezing the motion of a levitated dielectric sphere
//! by switching the optical trap frequency, including focal-field optics,
//! recoil and thermal decoherence, conditional Gaussian dynamics and an
//! impulse-sensing protocol.

pub mod config;
pub mod decoherence;
pub mod dynamics;
pub mod error;
pub mod gaussian_state;
pub mod numerics;
pub mod optics;
pub mod params;
pub mod protocol;

pub use error::{Error, Result};
pub use params::{Axis, ExperimentParams};
