//! Forward model of the fiber link: split-step Fourier propagation over
//! standard single-mode fiber, FBG dispersion compensation, EDFAs with ASE,
//! and ideal band-pass filtering. All quantities are SI internally.

mod amplifier;
mod fiber;
mod filters;
mod link;

pub use amplifier::{
    ase_variance, complex_gaussian, edfa, photon_energy, spontaneous_emission_factor, PLANCK,
};
pub use fiber::{segment_length, ssfm_span, Direction, SpanConfig, SpanPropagator, SPEED_OF_LIGHT};
pub use filters::{bandpass, fbg, fbg_response, passband_mask};
pub use link::{transmit, Link, LinkConfig, NoiseRecord, Transmission};
