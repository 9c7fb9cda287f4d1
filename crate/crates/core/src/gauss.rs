//! Bivariate Gaussians over the (real, imaginary) plane.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::invalid;
use crate::{Result, C64};

/// Symmetric 2x2 covariance over (Re, Im).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Cov2 {
    pub fn isotropic(var: f64) -> Self {
        Cov2 {
            xx: var,
            xy: 0.0,
            yy: var,
        }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.det() > 0.0
    }

    pub fn inverse(&self) -> Option<Cov2> {
        let d = self.det();
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        Some(Cov2 {
            xx: self.yy / d,
            xy: -self.xy / d,
            yy: self.xx / d,
        })
    }

    /// Adds `eps` to the diagonal.
    pub fn ridge(&self, eps: f64) -> Cov2 {
        Cov2 {
            xx: self.xx + eps,
            xy: self.xy,
            yy: self.yy + eps,
        }
    }

    /// Quadratic form `v^T self v` with `v = (Re z, Im z)`.
    pub fn quad(&self, z: C64) -> f64 {
        self.xx * z.re * z.re + 2.0 * self.xy * z.re * z.im + self.yy * z.im * z.im
    }
}

/// Bivariate Gaussian with cached precision and normalizer.
#[derive(Debug, Clone, Copy)]
pub struct Gaussian2 {
    mean: C64,
    precision: Cov2,
    log_norm: f64,
}

impl Gaussian2 {
    pub fn new(mean: C64, cov: Cov2) -> Result<Self> {
        let precision = cov
            .inverse()
            .ok_or_else(|| invalid(format!("covariance {cov:?} is not positive definite")))?;
        Ok(Self::from_precision(mean, precision))
    }

    pub fn from_precision(mean: C64, precision: Cov2) -> Self {
        let log_norm = -(2.0 * PI).ln() + 0.5 * precision.det().ln();
        Gaussian2 {
            mean,
            precision,
            log_norm,
        }
    }

    pub fn mean(&self) -> C64 {
        self.mean
    }

    /// Natural-log density at `z`.
    pub fn log_pdf(&self, z: C64) -> f64 {
        self.log_norm - 0.5 * self.precision.quad(z - self.mean)
    }
}

/// Sample mean and unbiased sample covariance. Needs at least two samples.
pub fn fit(samples: &[C64]) -> Result<(C64, Cov2)> {
    let n = samples.len();
    if n < 2 {
        return Err(invalid("Gaussian fit needs at least two samples"));
    }
    let mean = samples.iter().sum::<C64>() / n as f64;
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for s in samples {
        let d = s - mean;
        xx += d.re * d.re;
        xy += d.re * d.im;
        yy += d.im * d.im;
    }
    let k = 1.0 / (n - 1) as f64;
    Ok((
        mean,
        Cov2 {
            xx: xx * k,
            xy: xy * k,
            yy: yy * k,
        },
    ))
}

/// `ln(sum(exp(v)))`, stable for large magnitudes.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circular_peak_density() {
        let g = Gaussian2::new(C64::new(0.3, -0.2), Cov2::isotropic(0.5)).unwrap();
        assert!((g.log_pdf(C64::new(0.3, -0.2)) + PI.ln()).abs() < 1e-14);
    }

    #[test]
    fn singular_rejected() {
        let c = Cov2 {
            xx: 1.0,
            xy: 1.0,
            yy: 1.0,
        };
        assert!(Gaussian2::new(C64::new(0.0, 0.0), c).is_err());
        assert!(Gaussian2::new(C64::new(0.0, 0.0), c.ridge(1e-9)).is_ok());
    }

    #[test]
    fn lse_handles_extremes() {
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }
}
