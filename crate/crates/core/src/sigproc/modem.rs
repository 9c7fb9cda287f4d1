use serde::{Deserialize, Serialize};
use std::ops::Range;

use super::{Constellation, PulseShape, SymbolSequence};
use crate::error::invalid;
use crate::{Result, C64};

/// Uniformly sampled complex envelope (amplitudes in sqrt(W)).
///
/// Symbol `k` of a modulated block contributes to samples
/// `k * sps + t` (cyclically) for tap `t`, so its pulse peaks
/// `delay_samples` after `k * sps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexBasebandSignal {
    pub samples: Vec<C64>,
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    /// Launch power the block was scaled to.
    pub reference_power_w: f64,
    /// Group delay of the pulse shaper in samples.
    pub delay_samples: usize,
}

impl ComplexBasebandSignal {
    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate * self.samples_per_symbol as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_symbols(&self) -> usize {
        self.samples.len() / self.samples_per_symbol
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len().max(1) as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Same metadata, new samples.
    pub fn with_samples(&self, samples: Vec<C64>) -> Self {
        ComplexBasebandSignal {
            samples,
            ..self.clone()
        }
    }

    /// Amplitude scale between unit-energy symbols and the waveform.
    pub fn amplitude(&self) -> f64 {
        (self.reference_power_w * self.samples_per_symbol as f64).sqrt()
    }
}

/// Pulse-shapes `x` (cyclic convolution) and scales it to mean launch power
/// `power_w`.
pub fn modulate(
    x: &SymbolSequence,
    c: &Constellation,
    p: &PulseShape,
    power_w: f64,
    symbol_rate: f64,
) -> Result<ComplexBasebandSignal> {
    if x.alphabet_size() != c.len() {
        return Err(invalid(format!(
            "sequence alphabet {} does not match constellation size {}",
            x.alphabet_size(),
            c.len()
        )));
    }
    modulate_amplitudes(&x.amplitudes(c), p, power_w, symbol_rate)
}

/// [`modulate`] on raw unit-energy-scale amplitudes.
pub fn modulate_amplitudes(
    amplitudes: &[C64],
    p: &PulseShape,
    power_w: f64,
    symbol_rate: f64,
) -> Result<ComplexBasebandSignal> {
    if amplitudes.is_empty() {
        return Err(invalid("cannot modulate an empty sequence"));
    }
    if !(power_w > 0.0 && power_w.is_finite()) {
        return Err(invalid(format!("launch power {power_w} W must be positive")));
    }
    if !(symbol_rate > 0.0) {
        return Err(invalid(format!("symbol rate {symbol_rate} must be positive")));
    }
    let sps = p.samples_per_symbol();
    let n = amplitudes.len() * sps;
    let amp = (power_w * sps as f64).sqrt();
    let mut samples = vec![C64::new(0.0, 0.0); n];
    for (k, &a) in amplitudes.iter().enumerate() {
        let a = a * amp;
        for (t, &h) in p.taps().iter().enumerate() {
            samples[(k * sps + t) % n] += a * h;
        }
    }
    Ok(ComplexBasebandSignal {
        samples,
        symbol_rate,
        samples_per_symbol: sps,
        reference_power_w: power_w,
        delay_samples: p.center(),
    })
}

/// Matched filter, symbol-rate sampling with delay compensation, and rescaling
/// back to the unit-energy constellation scale.
pub fn matched_filter_and_sample(sig: &ComplexBasebandSignal, p: &PulseShape) -> Result<Vec<C64>> {
    let sps = p.samples_per_symbol();
    if sig.samples_per_symbol != sps {
        return Err(invalid(format!(
            "signal has {} samples per symbol, pulse has {sps}",
            sig.samples_per_symbol
        )));
    }
    if sig.samples.is_empty() || sig.samples.len() % sps != 0 {
        return Err(invalid(format!(
            "signal length {} is not a positive multiple of {sps}",
            sig.samples.len()
        )));
    }
    if sig.delay_samples != p.center() {
        return Err(invalid("signal delay does not match the pulse group delay"));
    }
    let n = sig.samples.len();
    let scale = sig.amplitude().recip();
    Ok((0..n / sps)
        .map(|k| {
            let acc: C64 = p
                .taps()
                .iter()
                .enumerate()
                .map(|(t, &h)| sig.samples[(k * sps + t) % n] * h)
                .sum();
            acc * scale
        })
        .collect())
}

/// Symbols used for rate estimation: all but half the pulse span at each end.
pub fn evaluation_range(num_symbols: usize, p: &PulseShape) -> Range<usize> {
    let guard = p.span_symbols() / 2;
    if num_symbols <= 2 * guard {
        return 0..0;
    }
    guard..num_symbols - guard
}
