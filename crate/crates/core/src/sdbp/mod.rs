//! Stochastic digital backpropagation: an ensemble of waveforms is pushed
//! backwards through the link, with a fresh amplifier-noise draw subtracted
//! per particle at every amplifier. The ensemble is then summarized per
//! symbol, either by matched filtering each particle (SBS) or by Gaussian
//! message passing through the pulse shaper (GMP).

mod gmp;
mod posterior;

pub use gmp::{gmp_posterior, gmp_posterior_with_diagnostics, GmpDiagnostics};
pub use posterior::{air_abc, air_abc_terms, PosteriorTable, PROBABILITY_FLOOR};

use rayon::prelude::*;

use crate::channel::Link;
use crate::error::invalid;
use crate::gauss::{fit, Gaussian2};
use crate::seeds;
use crate::sigproc::{matched_filter_and_sample, ComplexBasebandSignal, Constellation, PulseShape};
use crate::{Result, C64};

/// Diagonal loading on per-slot SBS covariances.
pub const SBS_RIDGE: f64 = 1e-12;

/// `N_p` equally long waveforms sharing the metadata of the received block.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    particles: Vec<Vec<C64>>,
    template: ComplexBasebandSignal,
}

impl ParticleEnsemble {
    /// Wraps `particles`, taking metadata from `template`.
    pub fn new(particles: Vec<Vec<C64>>, template: &ComplexBasebandSignal) -> Result<Self> {
        if particles.is_empty() {
            return Err(invalid("an ensemble needs at least one particle"));
        }
        if particles.iter().any(|p| p.len() != template.len()) {
            return Err(invalid("particles must match the template length"));
        }
        Ok(ParticleEnsemble {
            particles,
            template: template.with_samples(Vec::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn num_samples(&self) -> usize {
        self.particles[0].len()
    }

    pub fn particles(&self) -> &[Vec<C64>] {
        &self.particles
    }

    /// Particle `i` as a signal.
    pub fn particle(&self, i: usize) -> ComplexBasebandSignal {
        self.template.with_samples(self.particles[i].clone())
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.template.samples_per_symbol
    }

    pub fn amplitude(&self) -> f64 {
        self.template.amplitude()
    }

    pub(crate) fn delay_samples(&self) -> usize {
        self.template.delay_samples
    }

    /// Matched-filter outputs, `[particle][slot]`.
    pub fn matched_filter(&self, p: &PulseShape) -> Result<Vec<Vec<C64>>> {
        (0..self.len())
            .into_par_iter()
            .map(|i| matched_filter_and_sample(&self.particle(i), p))
            .collect()
    }
}

/// Backpropagates `n_particles` copies of `y`. Particle `i` draws the noise
/// of amplifier `a` from stream `a` of `derive(seed, [i])`, so results do not
/// depend on scheduling. With a noiseless link every particle equals the DBP
/// waveform.
pub fn sdbp_backward(
    y: &ComplexBasebandSignal,
    link: &Link,
    n_particles: usize,
    seed: u64,
) -> Result<ParticleEnsemble> {
    if n_particles == 0 {
        return Err(invalid("need at least one particle"));
    }
    link.check_signal(y)?;
    let noisy = link.noise_variance() > 0.0;
    let spans = link.config().num_spans;
    let particles = (0..n_particles)
        .into_par_iter()
        .map(|i| {
            let ps = seeds::derive(seed, &[i as u64]);
            let mut u = y.samples.clone();
            for amp in (0..spans).rev() {
                let w = noisy.then(|| link.draw_noise_spectrum(amp, ps));
                link.inverse_span(&mut u, w.as_deref());
            }
            u
        })
        .collect();
    ParticleEnsemble::new(particles, y)
}

fn check_prior(prior: &[f64], c: &Constellation) -> Result<Vec<f64>> {
    if prior.len() != c.len() {
        return Err(invalid("prior length does not match the constellation"));
    }
    if prior.iter().any(|&p| !(p >= 0.0)) || (prior.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(invalid("prior is not a distribution"));
    }
    Ok(prior.iter().map(|p| p.ln()).collect())
}

/// Symbol-by-symbol posterior: matched-filter every particle, fit a bivariate
/// Gaussian per slot over the particles, evaluate it on the constellation
/// and multiply by the prior.
pub fn sbs_posterior(
    ens: &ParticleEnsemble,
    p: &PulseShape,
    c: &Constellation,
    prior: &[f64],
) -> Result<PosteriorTable> {
    if ens.len() < 2 {
        return Err(invalid("SBS needs at least two particles"));
    }
    let log_prior = check_prior(prior, c)?;
    let z = ens.matched_filter(p)?;
    let slots = z[0].len();
    let m = c.len();
    let mut logs = Vec::with_capacity(slots * m);
    let mut column = vec![C64::new(0.0, 0.0); ens.len()];
    for k in 0..slots {
        for (v, zp) in column.iter_mut().zip(&z) {
            *v = zp[k];
        }
        let (mean, cov) = fit(&column)?;
        let g = Gaussian2::new(mean, cov.ridge(SBS_RIDGE))?;
        logs.extend(c.points().iter().zip(&log_prior).map(|(&pt, lp)| g.log_pdf(pt) + lp));
    }
    PosteriorTable::from_log_rows(m, logs)
}
