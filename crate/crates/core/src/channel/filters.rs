use super::fiber::SpanConfig;
use crate::error::invalid;
use crate::fft::{angular_frequencies, bin_frequencies, FftPair};
use crate::sigproc::ComplexBasebandSignal;
use crate::{Result, C64};

/// Frequency response of an ideal FBG that exactly undoes the accumulated
/// dispersion of `span`, with `insertion_loss_db` of amplitude loss. Includes
/// the `1/n` inverse-FFT factor.
pub fn fbg_response(
    span: &SpanConfig,
    wavelength_m: f64,
    insertion_loss_db: f64,
    len: usize,
    sample_rate: f64,
) -> Vec<C64> {
    let beta2 = span.beta2(wavelength_m);
    let amp = 10f64.powf(-insertion_loss_db / 20.0) / len as f64;
    angular_frequencies(len, sample_rate)
        .into_iter()
        .map(|w| C64::from_polar(amp, -beta2 / 2.0 * w * w * span.length_m))
        .collect()
}

/// Bins kept by an ideal low-pass of two-sided width `bandwidth_hz`.
pub fn passband_mask(len: usize, sample_rate: f64, bandwidth_hz: f64) -> Vec<bool> {
    let edge = bandwidth_hz / 2.0 * (1.0 + 1e-12);
    bin_frequencies(len, sample_rate)
        .into_iter()
        .map(|f| f.abs() <= edge)
        .collect()
}

/// Lumped dispersion compensation for the preceding span.
pub fn fbg(
    sig: &ComplexBasebandSignal,
    span: &SpanConfig,
    wavelength_m: f64,
    insertion_loss_db: f64,
) -> Result<ComplexBasebandSignal> {
    if sig.is_empty() {
        return Err(invalid("empty signal"));
    }
    let h = fbg_response(span, wavelength_m, insertion_loss_db, sig.len(), sig.sample_rate());
    let mut out = sig.samples.clone();
    FftPair::new(sig.len()).filter(&mut out, &h);
    Ok(sig.with_samples(out))
}

/// Ideal brick-wall filter keeping `|f| <= bandwidth_hz / 2`.
pub fn bandpass(sig: &ComplexBasebandSignal, bandwidth_hz: f64) -> Result<ComplexBasebandSignal> {
    if !(bandwidth_hz > 0.0) {
        return Err(invalid(format!("bandwidth {bandwidth_hz} Hz must be positive")));
    }
    if sig.is_empty() {
        return Err(invalid("empty signal"));
    }
    let n = sig.len();
    let h: Vec<C64> = passband_mask(n, sig.sample_rate(), bandwidth_hz)
        .into_iter()
        .map(|keep| C64::new(if keep { 1.0 / n as f64 } else { 0.0 }, 0.0))
        .collect();
    let mut out = sig.samples.clone();
    FftPair::new(n).filter(&mut out, &h);
    Ok(sig.with_samples(out))
}
