//! Hermite-Gauss mode decomposition of type-I SPDC biphotons.
//!
//! Start with [`spdc_coeffs::build_state`] to get the truncated two-photon
//! amplitudes, then reduce, post-select and transform them with
//! [`entanglement`] and [`state_engineering`].

pub mod entanglement;
pub mod error;
pub mod gaussian_modes;
pub mod oracle;
pub mod spdc_coeffs;
pub mod state_engineering;

pub use error::{Error, Result};
pub use gaussian_modes::{BeamGeometry, ModeIndex};
pub use spdc_coeffs::{build_state, CoeffKey, CrystalConfig, Method, PumpSpec, TwoPhotonAmplitudes, CALIBRATION};
