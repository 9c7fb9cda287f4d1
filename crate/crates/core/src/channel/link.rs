use serde::{Deserialize, Serialize};

use super::amplifier::{ase_variance, complex_gaussian, photon_energy, spontaneous_emission_factor};
use super::fiber::{segment_length, Direction, SpanConfig, SpanPropagator};
use super::filters::{fbg_response, passband_mask};
use crate::error::invalid;
use crate::fft::FftPair;
use crate::seeds;
use crate::sigproc::{modulate, ComplexBasebandSignal, Constellation, PulseShape, SymbolSequence, TxConfig};
use crate::{Result, C64};

/// Relative change of the restored stopband field below which the filter
/// inversion stops iterating.
const FILTER_INVERSE_TOLERANCE: f64 = 1e-4;

fn energy(u: &[C64]) -> f64 {
    u.iter().map(|v| v.norm_sqr()).sum()
}

/// A chain of identical spans: fiber, optional FBG, EDFA, optional in-line
/// filter; plus an optional receiver filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub num_spans: usize,
    pub span: SpanConfig,
    /// `-inf` switches amplifier noise off.
    pub noise_figure_db: f64,
    pub fbg_insertion_loss_db: f64,
    /// Two-sided width of the ideal in-line and receiver filters.
    pub bandpass_bandwidth_hz: f64,
    pub wavelength_m: f64,
    pub dispersion_managed: bool,
    pub inline_filters: bool,
    pub receiver_filter: bool,
    /// Most fixed-point passes that re-estimate the out-of-band field each
    /// in-line filter removed before a span is inverted; passes stop early
    /// once the estimate settles. 0 keeps the bare projection.
    #[serde(default)]
    pub filter_inverse_iterations: usize,
}

impl LinkConfig {
    /// Dispersion-managed G.652 link with 5.5 dB amplifiers, 3 dB FBGs and
    /// filters whose equivalent low-pass bandwidth equals the symbol rate.
    pub fn standard(num_spans: usize, span_length_km: f64, symbol_rate: f64) -> Self {
        LinkConfig {
            num_spans,
            span: SpanConfig::standard_smf(span_length_km),
            noise_figure_db: 5.5,
            fbg_insertion_loss_db: 3.0,
            bandpass_bandwidth_hz: 2.0 * symbol_rate,
            wavelength_m: 1550e-9,
            dispersion_managed: true,
            inline_filters: true,
            receiver_filter: true,
            filter_inverse_iterations: 8,
        }
    }

    /// One noisy amplifier behind a dispersionless, lossless, linear span and a
    /// lumped attenuator of `loss_db`: a memoryless AWGN channel.
    pub fn awgn_surrogate(loss_db: f64, symbol_rate: f64) -> Self {
        LinkConfig {
            num_spans: 1,
            span: SpanConfig::from_units(1.0, 0.0, 0.0, 0.0),
            noise_figure_db: 5.5,
            fbg_insertion_loss_db: loss_db,
            bandpass_bandwidth_hz: 2.0 * symbol_rate,
            wavelength_m: 1550e-9,
            dispersion_managed: true,
            inline_filters: true,
            receiver_filter: true,
            filter_inverse_iterations: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.span.validate()?;
        if !(self.noise_figure_db >= 3.0 || self.noise_figure_db == f64::NEG_INFINITY) {
            return Err(invalid(format!(
                "noise figure {} dB is below the 3 dB quantum limit",
                self.noise_figure_db
            )));
        }
        if !(self.bandpass_bandwidth_hz > 0.0) {
            return Err(invalid("filter bandwidth must be positive"));
        }
        if !(self.wavelength_m > 0.0) {
            return Err(invalid("wavelength must be positive"));
        }
        if self.fbg_insertion_loss_db < 0.0 {
            return Err(invalid("FBG insertion loss must be non-negative"));
        }
        Ok(())
    }

    pub fn noiseless(mut self) -> Self {
        self.noise_figure_db = f64::NEG_INFINITY;
        self
    }

    /// Sets the segment length from the launch power.
    pub fn segmented_for_power(mut self, power_w: f64, symbol_rate: f64, epsilon: f64) -> Result<Self> {
        let d = segment_length(power_w, symbol_rate, &self.span, self.wavelength_m, epsilon)?;
        self.span = self.span.with_segment_length(d);
        Ok(self)
    }

    /// Linear power gain that restores the launch power after each span.
    pub fn amplifier_gain(&self) -> f64 {
        let fbg_db = if self.dispersion_managed { self.fbg_insertion_loss_db } else { 0.0 };
        10f64.powf(fbg_db / 10.0) / self.span.transmission()
    }

    /// Per-sample ASE variance injected by each amplifier.
    pub fn ase_variance(&self, sample_rate: f64) -> f64 {
        ase_variance(self.amplifier_gain(), self.noise_figure_db, self.wavelength_m, sample_rate)
    }

    /// Linear SNR at the matched-filter output of a purely linear link:
    /// launch power over the ASE of all amplifiers in the symbol bandwidth.
    pub fn snr_proxy(&self, power_w: f64, symbol_rate: f64) -> f64 {
        let psd = (self.amplifier_gain() - 1.0)
            * photon_energy(self.wavelength_m)
            * spontaneous_emission_factor(self.noise_figure_db);
        power_w / (self.num_spans as f64 * psd * symbol_rate)
    }

    /// Launch power giving `snr` under [`LinkConfig::snr_proxy`].
    pub fn power_for_snr(&self, snr: f64, symbol_rate: f64) -> f64 {
        snr / self.snr_proxy(1.0, symbol_rate)
    }
}

/// White noise blocks injected by each amplifier, in span order.
#[derive(Debug, Clone, Default)]
pub struct NoiseRecord {
    pub blocks: Vec<Vec<C64>>,
    pub variance: f64,
}

/// Output of [`transmit`].
#[derive(Debug, Clone)]
pub struct Transmission {
    pub sent: ComplexBasebandSignal,
    pub received: ComplexBasebandSignal,
    pub noise: NoiseRecord,
}

/// A [`LinkConfig`] resolved for one signal length and sample rate.
#[derive(Debug, Clone)]
pub struct Link {
    config: LinkConfig,
    sample_rate: f64,
    fft: FftPair,
    span: SpanPropagator,
    fbg_forward: Option<Vec<C64>>,
    passband: Vec<C64>,
    stopband: Vec<C64>,
    mask: Vec<bool>,
    /// Passband projection (with in-line filters), FBG inverse and gain
    /// inverse, with the 1/n factor.
    stage_inverse: Vec<C64>,
    gain_amplitude: f64,
    noise_variance: f64,
}

impl Link {
    pub fn new(config: &LinkConfig, len: usize, sample_rate: f64) -> Result<Self> {
        config.validate()?;
        if len == 0 {
            return Err(invalid("signal length must be positive"));
        }
        let n = len as f64;
        let span = SpanPropagator::new(&config.span, config.wavelength_m, len, sample_rate)?;
        let fbg_forward = config.dispersion_managed.then(|| {
            fbg_response(&config.span, config.wavelength_m, config.fbg_insertion_loss_db, len, sample_rate)
        });
        let mask = passband_mask(len, sample_rate, config.bandpass_bandwidth_hz);
        let passband = mask
            .iter()
            .map(|&k| C64::new(if k { 1.0 / n } else { 0.0 }, 0.0))
            .collect();
        let stopband = mask
            .iter()
            .map(|&k| C64::new(if k { 0.0 } else { 1.0 / n }, 0.0))
            .collect();
        let gain = config.amplifier_gain();
        let gain_amplitude = gain.sqrt();
        let mut stage_inverse: Vec<C64> = match &fbg_forward {
            // fbg_forward carries 1/n; its exact inverse times 1/n is 1/(n^2 h)
            Some(h) => h.iter().map(|v| (v * n).inv() / (n * gain_amplitude)).collect(),
            None => vec![C64::new(1.0 / (n * gain_amplitude), 0.0); len],
        };
        if config.inline_filters {
            // the pseudo-inverse of an ideal filter is the filter itself
            for (g, &keep) in stage_inverse.iter_mut().zip(&mask) {
                if !keep {
                    *g = C64::new(0.0, 0.0);
                }
            }
        }
        Ok(Link {
            config: config.clone(),
            sample_rate,
            fft: FftPair::new(len),
            span,
            fbg_forward,
            passband,
            stopband,
            mask,
            stage_inverse,
            gain_amplitude,
            noise_variance: config.ase_variance(sample_rate),
        })
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.fft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fft.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn segments_per_span(&self) -> usize {
        self.span.segments()
    }

    pub(crate) fn check_signal(&self, sig: &ComplexBasebandSignal) -> Result<()> {
        if sig.len() != self.len() {
            return Err(invalid(format!(
                "signal has {} samples, link was resolved for {}",
                sig.len(),
                self.len()
            )));
        }
        if (sig.sample_rate() - self.sample_rate).abs() > 1e-9 * self.sample_rate {
            return Err(invalid("signal sample rate does not match the link"));
        }
        Ok(())
    }

    /// Propagates samples through every span. `seed` drives the ASE; amplifier
    /// `i` uses stream `i`.
    pub fn forward(&self, samples: &mut [C64], seed: u64) -> NoiseRecord {
        let mut record = NoiseRecord {
            blocks: Vec::with_capacity(self.config.num_spans),
            variance: self.noise_variance,
        };
        for i in 0..self.config.num_spans {
            self.span.propagate(samples, Direction::Forward);
            if let Some(h) = &self.fbg_forward {
                self.fft.filter(samples, h);
            }
            let w = if self.noise_variance > 0.0 {
                complex_gaussian(&mut seeds::stream(seed, i as u64), samples.len(), self.noise_variance)
            } else {
                vec![C64::new(0.0, 0.0); samples.len()]
            };
            for (u, wk) in samples.iter_mut().zip(&w) {
                *u = *u * self.gain_amplitude + wk;
            }
            if self.config.inline_filters {
                self.fft.filter(samples, &self.passband);
            }
            record.blocks.push(w);
        }
        if self.config.receiver_filter {
            self.fft.filter(samples, &self.passband);
        }
        record
    }

    /// Whether the ASE of amplifier `i` reaches the receiver band-limited.
    fn band_limited_noise(&self, amp: usize) -> bool {
        self.config.inline_filters || (self.config.receiver_filter && amp + 1 == self.config.num_spans)
    }

    /// Spectrum of an ASE draw with forward statistics, filtered like the
    /// forward noise of amplifier `amp` (unnormalized DFT scale).
    pub(crate) fn draw_noise_spectrum(&self, amp: usize, seed: u64) -> Vec<C64> {
        let n = self.len();
        let mut w = complex_gaussian(&mut seeds::stream(seed, amp as u64), n, self.noise_variance * n as f64);
        if self.band_limited_noise(amp) {
            for (v, &keep) in w.iter_mut().zip(&self.mask) {
                if !keep {
                    *v = C64::new(0.0, 0.0);
                }
            }
        }
        w
    }

    /// Undoes in-line filter and amplifier `amp` (optionally subtracting a
    /// noise draw given as a spectrum), its FBG, then its span.
    ///
    /// The filter is undone by its pseudo-inverse, a projection onto the
    /// passband. What it removed is the stopband part of the span output. The
    /// span input is band-limited (transmit pulse or previous filter), so each
    /// extra pass projects the estimate of the input onto the passband,
    /// propagates it forward, restores the stopband part of the result and
    /// inverts again, until the restored part stops changing. FBG and filter
    /// commute, so the restored part needs no FBG correction.
    pub(crate) fn inverse_span(&self, samples: &mut [C64], noise_spectrum: Option<&[C64]>) {
        self.fft.forward(samples);
        match noise_spectrum {
            Some(w) => {
                for ((u, g), wk) in samples.iter_mut().zip(&self.stage_inverse).zip(w) {
                    *u = (*u - wk) * g;
                }
            }
            None => {
                for (u, g) in samples.iter_mut().zip(&self.stage_inverse) {
                    *u *= g;
                }
            }
        }
        self.fft.inverse(samples);
        let passes = if self.config.inline_filters { self.config.filter_inverse_iterations } else { 0 };
        if passes == 0 {
            self.span.propagate(samples, Direction::Inverse);
            return;
        }
        let base = samples.to_vec();
        let tol = FILTER_INVERSE_TOLERANCE * FILTER_INVERSE_TOLERANCE * energy(&base);
        self.span.propagate(samples, Direction::Inverse);
        self.fft.filter(samples, &self.passband);
        let mut v = vec![C64::new(0.0, 0.0); samples.len()];
        let mut restored = vec![C64::new(0.0, 0.0); samples.len()];
        for _ in 0..passes {
            v.copy_from_slice(samples);
            self.span.propagate(&mut v, Direction::Forward);
            self.fft.filter(&mut v, &self.stopband);
            let change: f64 = v.iter().zip(&restored).map(|(a, b)| (a - b).norm_sqr()).sum();
            restored.copy_from_slice(&v);
            for ((u, b), r) in samples.iter_mut().zip(&base).zip(&restored) {
                *u = b + r;
            }
            self.span.propagate(samples, Direction::Inverse);
            self.fft.filter(samples, &self.passband);
            if change <= tol {
                break;
            }
        }
    }

    /// Deterministic inverse of every block (digital backpropagation).
    pub fn backpropagate(&self, samples: &mut [C64]) {
        for _ in 0..self.config.num_spans {
            self.inverse_span(samples, None);
        }
    }

    /// Modulates `x` and sends it through the link.
    pub fn transmit(
        &self,
        x: &SymbolSequence,
        c: &Constellation,
        p: &PulseShape,
        power_w: f64,
        symbol_rate: f64,
        seed: u64,
    ) -> Result<Transmission> {
        let sent = modulate(x, c, p, power_w, symbol_rate)?;
        self.check_signal(&sent)?;
        let mut y = sent.samples.clone();
        let noise = self.forward(&mut y, seed);
        Ok(Transmission {
            received: sent.with_samples(y),
            sent,
            noise,
        })
    }
}

/// Modulates `x` with `tx` and propagates it over `link` at launch power
/// `power_w`.
pub fn transmit(
    x: &SymbolSequence,
    link: &LinkConfig,
    tx: &TxConfig,
    power_w: f64,
    seed: u64,
) -> Result<Transmission> {
    let c = tx.constellation()?;
    let p = tx.pulse()?;
    let resolved = Link::new(link, x.len() * tx.samples_per_symbol, tx.sample_rate())?;
    resolved.transmit(x, &c, &p, power_w, tx.symbol_rate, seed)
}
