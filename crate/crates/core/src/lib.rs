//! Joint waveform, active and passive beamforming for IRS-aided multi-carrier
//! SWIPT under a truncated nonlinear rectenna model.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: configuration, dual-slope path loss, tapped-delay-line channel
//!   synthesis, the composite (direct + cascaded) channel and CSIT perturbation.
//! - [`rectenna`]: achievable rate and the fourth-order DC model, including the
//!   block-diagonal frequency-coupling machinery and a time-domain oracle.
//! - [`solver`]: small dense convex kernels (unit-diagonal PSD programs with a
//!   log-sum rate term, and log-domain geometric programs).
//! - [`passive`]: IRS phase design by successive convex approximation over the
//!   lifted phase matrix, plus rank-1 phase extraction.
//! - [`active`]: maximum-ratio transmission.
//! - [`waveform`]: amplitude and splitting-ratio design (GP with AM-GM
//!   condensation, water-filling, scaled matched filter, superposition).
//! - [`orchestrate`]: block coordinate descent, the low-complexity variant,
//!   rate-energy region assembly and the baselines used in the experiments.
//!
//! All quantities are linear units (watts, linear gains); decibel conversion
//! only happens at the command-line boundary.

pub mod active;
pub mod error;
pub mod linalg;
pub mod orchestrate;
pub mod passive;
pub mod rectenna;
pub mod scenario;
pub mod solver;
pub mod waveform;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
