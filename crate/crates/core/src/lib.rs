//! Single-polarization fiber-optic channel simulation with digital
//! backpropagation (DBP) and stochastic DBP (SDBP) receivers, and Monte-Carlo
//! estimation of achievable information rates (AIRs) through auxiliary
//! forward and backward channels.
//!
//! The crate is organised along the signal path:
//!
//! * [`sigproc`]: constellations, pulse shaping, matched filtering, decisions.
//! * [`channel`]: split-step Fourier fiber model, FBG, EDFA, filters.
//! * [`dbp`]: deterministic backpropagation and Gaussian auxiliary channels.
//! * [`sdbp`]: particle backpropagation with SBS and GMP posteriors.
//! * [`infotheory`]: mutual-information bounds, oracles and MC averaging.
//! * [`harness`]: configuration, sweeps, run records and reports.

pub mod channel;
pub mod dbp;
mod error;
pub mod fft;
pub mod gauss;
pub mod harness;
pub mod infotheory;
pub mod sdbp;
pub mod seeds;
pub mod sigproc;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex<f64>;
