//! Deterministic digital backpropagation and the memoryless Gaussian
//! auxiliary forward channels trained on its output.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::ops::Range;

use crate::channel::Link;
use crate::error::invalid;
use crate::gauss::{fit, log_sum_exp, Cov2, Gaussian2};
use crate::sdbp::PosteriorTable;
use crate::sigproc::{matched_filter_and_sample, ComplexBasebandSignal, PulseShape, SymbolSequence};
use crate::{Error, Result, C64};

/// Diagonal loading applied to every trained covariance.
pub const COVARIANCE_RIDGE: f64 = 1e-12;

/// Runs the link backwards (gain, FBG and fiber of every span in reverse
/// order), then matched-filters and samples.
///
/// Ideal filters have no inverse; with in-line filters each span's input is
/// projected back onto the passband (the filter's pseudo-inverse), which
/// discards out-of-band content the forward link could not have carried.
pub fn dbp_receive(y: &ComplexBasebandSignal, link: &Link, p: &PulseShape) -> Result<Vec<C64>> {
    link.check_signal(y)?;
    let mut u = y.samples.clone();
    link.backpropagate(&mut u);
    matched_filter_and_sample(&y.with_samples(u), p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxVariant {
    /// Circular covariance `sigma^2 I` per point.
    Iidg,
    /// Full 2x2 covariance per point.
    Cg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingOptions {
    /// Minimum number of training samples per constellation point.
    pub min_count: usize,
    /// iidG only: share one variance across all points.
    pub pooled_variance: bool,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        TrainingOptions {
            min_count: 50,
            pooled_variance: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AuxParams {
    variant: AuxVariant,
    means: Vec<C64>,
    covariances: Vec<Cov2>,
}

/// Memoryless channel `q(z | x = m) = N(mu_m, Sigma_m)` over (Re, Im).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "AuxParams", into = "AuxParams")]
pub struct GaussianAuxChannel {
    variant: AuxVariant,
    means: Vec<C64>,
    covariances: Vec<Cov2>,
    densities: Vec<Gaussian2>,
}

impl TryFrom<AuxParams> for GaussianAuxChannel {
    type Error = Error;

    fn try_from(p: AuxParams) -> Result<Self> {
        GaussianAuxChannel::new(p.variant, p.means, p.covariances)
    }
}

impl From<GaussianAuxChannel> for AuxParams {
    fn from(a: GaussianAuxChannel) -> Self {
        AuxParams {
            variant: a.variant,
            means: a.means,
            covariances: a.covariances,
        }
    }
}

impl GaussianAuxChannel {
    pub fn new(variant: AuxVariant, means: Vec<C64>, covariances: Vec<Cov2>) -> Result<Self> {
        if means.len() != covariances.len() || means.is_empty() {
            return Err(invalid("need one mean and one covariance per point"));
        }
        if variant == AuxVariant::Iidg
            && covariances.iter().any(|c| c.xy != 0.0 || c.xx != c.yy)
        {
            return Err(invalid("iidG covariances must be isotropic"));
        }
        let densities = means
            .iter()
            .zip(&covariances)
            .map(|(&m, &c)| Gaussian2::new(m, c))
            .collect::<Result<_>>()?;
        Ok(GaussianAuxChannel {
            variant,
            means,
            covariances,
            densities,
        })
    }

    pub fn variant(&self) -> AuxVariant {
        self.variant
    }

    pub fn alphabet_size(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[C64] {
        &self.means
    }

    pub fn covariances(&self) -> &[Cov2] {
        &self.covariances
    }

    /// `ln q(z | m)` for every point.
    pub fn log_likelihoods(&self, z: C64) -> Vec<f64> {
        self.densities.iter().map(|g| g.log_pdf(z)).collect()
    }
}

/// Fits per-point means and covariances to `(z, label)` pairs.
pub fn train_gaussian_aux(
    z: &[C64],
    labels: &[usize],
    alphabet_size: usize,
    variant: AuxVariant,
    opts: &TrainingOptions,
) -> Result<GaussianAuxChannel> {
    if z.len() != labels.len() {
        return Err(invalid(format!(
            "{} samples but {} labels",
            z.len(),
            labels.len()
        )));
    }
    let mut groups = vec![Vec::new(); alphabet_size];
    for (&zk, &m) in z.iter().zip(labels) {
        if m >= alphabet_size {
            return Err(invalid(format!("label {m} outside alphabet of size {alphabet_size}")));
        }
        groups[m].push(zk);
    }
    let required = opts.min_count.max(2);
    let mut means = Vec::with_capacity(alphabet_size);
    let mut covs = Vec::with_capacity(alphabet_size);
    for (point, g) in groups.iter().enumerate() {
        if g.len() < required {
            return Err(Error::TrainingInsufficient {
                point,
                count: g.len(),
                required,
            });
        }
        let (mu, c) = fit(g)?;
        means.push(mu);
        covs.push(c);
    }
    let covs: Vec<Cov2> = match variant {
        AuxVariant::Cg => covs.iter().map(|c| c.ridge(COVARIANCE_RIDGE)).collect(),
        AuxVariant::Iidg if opts.pooled_variance => {
            // residual sum of squares over all points, per real dimension
            let (mut ss, mut dof) = (0.0, 0.0);
            for (c, g) in covs.iter().zip(&groups) {
                ss += c.trace() * (g.len() - 1) as f64;
                dof += 2.0 * (g.len() - 1) as f64;
            }
            vec![Cov2::isotropic(ss / dof + COVARIANCE_RIDGE); alphabet_size]
        }
        AuxVariant::Iidg => covs
            .iter()
            .map(|c| Cov2::isotropic(c.trace() / 2.0 + COVARIANCE_RIDGE))
            .collect(),
    };
    GaussianAuxChannel::new(variant, means, covs)
}

/// `ln q(z | m)` in nats.
pub fn q_loglik(z: C64, m: usize, aux: &GaussianAuxChannel) -> f64 {
    aux.densities[m].log_pdf(z)
}

fn check_prior(prior: &[f64], m: usize) -> Result<Vec<f64>> {
    if prior.len() != m {
        return Err(invalid(format!("prior has {} entries, alphabet has {m}", prior.len())));
    }
    let total: f64 = prior.iter().sum();
    if prior.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(invalid("prior is not a distribution"));
    }
    Ok(prior.iter().map(|p| p.ln()).collect())
}

/// Per-symbol information densities `log2 q(z|x) / sum_m p(m) q(z|m)` over
/// `range`.
pub fn air_dbp_terms(
    z: &[C64],
    x: &SymbolSequence,
    aux: &GaussianAuxChannel,
    prior: &[f64],
    range: Range<usize>,
) -> Result<Vec<f64>> {
    if z.len() != x.len() || range.end > z.len() {
        return Err(invalid("samples, symbols and range do not line up"));
    }
    if x.alphabet_size() != aux.alphabet_size() {
        return Err(invalid("symbol alphabet does not match the auxiliary channel"));
    }
    let log_prior = check_prior(prior, aux.alphabet_size())?;
    let mut joint = vec![0.0; aux.alphabet_size()];
    Ok(range
        .map(|k| {
            for (j, (g, lp)) in joint.iter_mut().zip(aux.densities.iter().zip(&log_prior)) {
                *j = g.log_pdf(z[k]) + lp;
            }
            let xk = x.indices()[k];
            (aux.densities[xk].log_pdf(z[k]) - log_sum_exp(&joint)) / LN_2
        })
        .collect())
}

/// Monte-Carlo AIR of the auxiliary forward channel, bits per symbol.
pub fn air_dbp(
    z: &[C64],
    x: &SymbolSequence,
    aux: &GaussianAuxChannel,
    prior: &[f64],
    range: Range<usize>,
) -> Result<f64> {
    let terms = air_dbp_terms(z, x, aux, prior, range)?;
    if terms.is_empty() {
        return Err(invalid("empty evaluation range"));
    }
    let air = terms.iter().sum::<f64>() / terms.len() as f64;
    let cap = prior
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| -p.log2())
        .fold(0.0, f64::max);
    debug_assert!(air <= cap + 1e-9, "AIR {air} above log2 of the alphabet");
    Ok(air)
}

/// Backward channel induced by `aux` and the prior:
/// `r(m | z) = p(m) q(z|m) / sum_j p(j) q(z|j)`.
pub fn induced_posterior(z: &[C64], aux: &GaussianAuxChannel, prior: &[f64]) -> Result<PosteriorTable> {
    let log_prior = check_prior(prior, aux.alphabet_size())?;
    let m = aux.alphabet_size();
    let mut logs = Vec::with_capacity(z.len() * m);
    for &zk in z {
        logs.extend(aux.densities.iter().zip(&log_prior).map(|(g, lp)| g.log_pdf(zk) + lp));
    }
    PosteriorTable::from_log_rows(m, logs)
}
