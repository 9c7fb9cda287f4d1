use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::invalid;
use crate::fft::{angular_frequencies, FftPair};
use crate::sigproc::ComplexBasebandSignal;
use crate::{Result, C64};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// One span of standard single-mode fiber. All fields in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanConfig {
    pub length_m: f64,
    /// Dispersion parameter D in s/m^2 (16 ps/(nm km) = 16e-6 s/m^2).
    pub dispersion_s_per_m2: f64,
    /// Kerr parameter in 1/(W m).
    pub gamma_per_w_m: f64,
    /// Power attenuation coefficient in 1/m.
    pub alpha_per_m: f64,
    /// Target SSFM segment length; the span is cut into `ceil(L / Δ)` equal
    /// segments.
    pub segment_length_m: f64,
}

impl SpanConfig {
    /// Builds a span from engineering units. The segment length defaults to the
    /// whole span until [`SpanConfig::with_segment_length`] is applied.
    pub fn from_units(
        length_km: f64,
        dispersion_ps_nm_km: f64,
        gamma_per_w_km: f64,
        alpha_db_per_km: f64,
    ) -> Self {
        let length_m = length_km * 1e3;
        SpanConfig {
            length_m,
            dispersion_s_per_m2: dispersion_ps_nm_km * 1e-6,
            gamma_per_w_m: gamma_per_w_km * 1e-3,
            alpha_per_m: alpha_db_per_km * 10f64.ln() / 10.0 / 1e3,
            segment_length_m: length_m,
        }
    }

    /// ITU-T G.652 fiber: D = 16 ps/(nm km), gamma = 1.3 /(W km), 0.2 dB/km.
    pub fn standard_smf(length_km: f64) -> Self {
        Self::from_units(length_km, 16.0, 1.3, 0.2)
    }

    pub fn with_segment_length(mut self, delta_m: f64) -> Self {
        self.segment_length_m = delta_m.min(self.length_m);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0 && self.length_m.is_finite()) {
            return Err(invalid(format!("span length {} m must be positive", self.length_m)));
        }
        if !(self.segment_length_m > 0.0) {
            return Err(invalid("segment length must be positive"));
        }
        if self.alpha_per_m < 0.0 || self.gamma_per_w_m < 0.0 {
            return Err(invalid("attenuation and nonlinearity must be non-negative"));
        }
        Ok(())
    }

    pub fn segments(&self) -> usize {
        let delta = self.segment_length_m.min(self.length_m);
        ((self.length_m / delta) - 1e-9).ceil().max(1.0) as usize
    }

    /// Group-velocity dispersion beta2 = -D lambda^2 / (2 pi c), s^2/m.
    pub fn beta2(&self, wavelength_m: f64) -> f64 {
        -self.dispersion_s_per_m2 * wavelength_m * wavelength_m / (2.0 * PI * SPEED_OF_LIGHT)
    }

    /// Linear power transmission of the whole span.
    pub fn transmission(&self) -> f64 {
        (-self.alpha_per_m * self.length_m).exp()
    }

    pub fn loss_db(&self) -> f64 {
        -10.0 * self.transmission().log10()
    }
}

/// Step size `(eps * L_N * L_D^2)^(1/3)` with nonlinear length `1/(gamma P)`
/// and dispersion length `2 pi c / (Rs^2 |D| lambda^2)`. Infinite when the
/// span is linear or dispersionless; callers cap it at the span length.
pub fn segment_length(
    power_w: f64,
    symbol_rate: f64,
    span: &SpanConfig,
    wavelength_m: f64,
    epsilon: f64,
) -> Result<f64> {
    if !(power_w > 0.0) {
        return Err(invalid(format!("power {power_w} W must be positive")));
    }
    if !(symbol_rate > 0.0 && wavelength_m > 0.0 && epsilon > 0.0) {
        return Err(invalid("symbol rate, wavelength and epsilon must be positive"));
    }
    let l_nl = 1.0 / (span.gamma_per_w_m * power_w);
    let l_d = 2.0 * PI * SPEED_OF_LIGHT
        / (symbol_rate * symbol_rate * span.dispersion_s_per_m2.abs() * wavelength_m * wavelength_m);
    Ok((epsilon * l_nl * l_d * l_d).cbrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Precomputed asymmetric split-step operator for one span at a fixed
/// signal length and sample rate.
///
/// Each forward segment applies the linear step (loss and dispersion) in the
/// frequency domain, then the Kerr phase in the time domain. The Kerr phase
/// uses the segment-end power times `(e^{alpha h} - 1)/alpha`, which equals the
/// start power times the loss-weighted effective length.
#[derive(Debug, Clone)]
pub struct SpanPropagator {
    fft: FftPair,
    segments: usize,
    linear_forward: Vec<C64>,
    linear_inverse: Vec<C64>,
    kerr: f64,
}

impl SpanPropagator {
    pub fn new(span: &SpanConfig, wavelength_m: f64, len: usize, sample_rate: f64) -> Result<Self> {
        span.validate()?;
        if len == 0 {
            return Err(invalid("cannot propagate an empty signal"));
        }
        let segments = span.segments();
        let h = span.length_m / segments as f64;
        let beta2 = span.beta2(wavelength_m);
        let alpha = span.alpha_per_m;
        let norm = 1.0 / len as f64;
        let omega = angular_frequencies(len, sample_rate);
        let linear_forward = omega
            .iter()
            .map(|w| C64::new(-alpha / 2.0 * h, beta2 / 2.0 * w * w * h).exp() * norm)
            .collect();
        let linear_inverse = omega
            .iter()
            .map(|w| C64::new(alpha / 2.0 * h, -beta2 / 2.0 * w * w * h).exp() * norm)
            .collect();
        let l_end = if alpha > 0.0 {
            (alpha * h).exp_m1() / alpha
        } else {
            h
        };
        Ok(SpanPropagator {
            fft: FftPair::new(len),
            segments,
            linear_forward,
            linear_inverse,
            kerr: span.gamma_per_w_m * l_end,
        })
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fft.is_empty()
    }

    pub fn propagate(&self, buf: &mut [C64], direction: Direction) {
        debug_assert_eq!(buf.len(), self.fft.len());
        match direction {
            Direction::Forward => {
                for _ in 0..self.segments {
                    self.fft.filter(buf, &self.linear_forward);
                    kerr_phase(buf, self.kerr);
                }
            }
            Direction::Inverse => {
                for _ in 0..self.segments {
                    kerr_phase(buf, -self.kerr);
                    self.fft.filter(buf, &self.linear_inverse);
                }
            }
        }
    }
}

fn kerr_phase(buf: &mut [C64], coeff: f64) {
    if coeff == 0.0 {
        return;
    }
    for u in buf.iter_mut() {
        let (s, c) = (coeff * u.norm_sqr()).sin_cos();
        *u *= C64::new(c, s);
    }
}

/// Propagates `sig` through one span with the split-step Fourier method.
pub fn ssfm_span(
    sig: &ComplexBasebandSignal,
    span: &SpanConfig,
    wavelength_m: f64,
    direction: Direction,
) -> Result<ComplexBasebandSignal> {
    let prop = SpanPropagator::new(span, wavelength_m, sig.len(), sig.sample_rate())?;
    let mut out = sig.samples.clone();
    prop.propagate(&mut out, direction);
    Ok(sig.with_samples(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversion() {
        let s = SpanConfig::standard_smf(100.0);
        assert!((s.dispersion_s_per_m2 - 16e-6).abs() < 1e-18);
        assert!((s.gamma_per_w_m - 1.3e-3).abs() < 1e-15);
        assert!((s.loss_db() - 20.0).abs() < 1e-9);
        // about -20.4 ps^2/km
        let b2 = s.beta2(1550e-9);
        assert!((b2 / 1e-27 + 20.4).abs() < 0.1, "{b2}");
    }

    #[test]
    fn segment_length_closed_form() {
        let s = SpanConfig::standard_smf(120.0);
        let d = segment_length(1e-3, 14e9, &s, 1550e-9, 1e-4).unwrap();
        // independent evaluation: L_N = 1/(1.3e-3*1e-3), L_D = 2 pi c/(Rs^2 D lambda^2)
        let l_n = 1.0 / 1.3e-6;
        let l_d = 2.0 * PI * 299_792_458.0 / (14e9f64.powi(2) * 16e-6 * 1550e-9f64.powi(2));
        assert!((d - (1e-4 * l_n * l_d * l_d).cbrt()).abs() < 1e-6);
        assert!((d - 1.7e4).abs() < 0.05e4, "{d}");
        let d2 = segment_length(1e-3, 14e9, &s, 1550e-9, 2e-4).unwrap();
        assert!((d2 / d - 2f64.cbrt()).abs() < 1e-12);
        assert!(segment_length(0.0, 14e9, &s, 1550e-9, 1e-4).is_err());
    }

    #[test]
    fn segment_length_shrinks_with_gamma() {
        let mut last = f64::INFINITY;
        for g in [1.0, 10.0, 100.0, 1e4] {
            let s = SpanConfig::from_units(100.0, 16.0, g, 0.2);
            let d = segment_length(1e-3, 14e9, &s, 1550e-9, 1e-4).unwrap();
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn segment_count() {
        let s = SpanConfig::standard_smf(120.0).with_segment_length(17e3);
        assert_eq!(s.segments(), 8);
        let s = SpanConfig::standard_smf(120.0).with_segment_length(f64::INFINITY);
        assert_eq!(s.segments(), 1);
        let s = SpanConfig::standard_smf(120.0).with_segment_length(40e3);
        assert_eq!(s.segments(), 3);
    }
}
