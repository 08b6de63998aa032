//! Multiphoton interference at multiport linear-optical interferometers.
//!
//! * [`optics`]: permanent-based rates for indistinguishable and
//!   distinguishable photons through an arbitrary transfer matrix.
//! * [`distinguishability`]: Gram-matrix rates for partially
//!   distinguishable photons, HOM and three-photon delay curves, visibilities.
//! * [`fitting`]: Gaussian dip/peak fits and Poisson-bootstrap error bars.
//! * [`tomography`]: transfer-matrix reconstruction from single-photon
//!   counts and two-photon visibilities, with Monte Carlo uncertainties.
//! * [`design`]: target matrices and the per-input overlap figure of merit.
//!
//! Modes are 0-based in the API and 1-based in every file format.

pub mod config;
pub mod design;
pub mod distinguishability;
pub mod error;
pub mod fitting;
pub mod formats;
pub mod matrix;
pub mod optics;
pub mod permanent;
pub mod random;
pub mod tomography;

pub use config::PhotonConfiguration;
pub use error::{Error, Result};
pub use matrix::{ComplexAmplitude, TransferMatrix};
