use rand::Rng;
use rand_distr::StandardNormal;

use super::fiber::SPEED_OF_LIGHT;
use crate::error::invalid;
use crate::seeds;
use crate::sigproc::ComplexBasebandSignal;
use crate::{Result, C64};

/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;

pub fn photon_energy(wavelength_m: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength_m
}

/// Spontaneous-emission factor from the noise figure (high-gain
/// approximation `n_sp = NF / 2`). A noise figure of `-inf` dB gives zero.
pub fn spontaneous_emission_factor(noise_figure_db: f64) -> f64 {
    10f64.powf(noise_figure_db / 10.0) / 2.0
}

/// Per-sample ASE variance `(G - 1) h nu n_sp F_s`, white across the
/// simulation bandwidth.
pub fn ase_variance(gain: f64, noise_figure_db: f64, wavelength_m: f64, sample_rate: f64) -> f64 {
    (gain - 1.0) * photon_energy(wavelength_m) * spontaneous_emission_factor(noise_figure_db) * sample_rate
}

/// Draws `len` circularly-symmetric complex Gaussian samples of variance
/// `var` (`E|w|^2 = var`).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, len: usize, var: f64) -> Vec<C64> {
    let sd = (var / 2.0).sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re * sd, im * sd)
        })
        .collect()
}

/// Amplifies by `gain_db` and adds ASE. Returns the amplified signal and the
/// noise block that was added.
pub fn edfa(
    sig: &ComplexBasebandSignal,
    gain_db: f64,
    noise_figure_db: f64,
    wavelength_m: f64,
    seed: u64,
) -> Result<(ComplexBasebandSignal, Vec<C64>)> {
    if !(gain_db >= 0.0) {
        return Err(invalid(format!("EDFA gain {gain_db} dB must be >= 0")));
    }
    let gain = 10f64.powf(gain_db / 10.0);
    let var = ase_variance(gain, noise_figure_db, wavelength_m, sig.sample_rate());
    let noise = if var > 0.0 {
        complex_gaussian(&mut seeds::stream(seed, 0), sig.len(), var)
    } else {
        vec![C64::new(0.0, 0.0); sig.len()]
    };
    let g = gain.sqrt();
    let out = sig.samples.iter().zip(&noise).map(|(s, w)| s * g + w).collect();
    Ok((sig.with_samples(out), noise))
}
