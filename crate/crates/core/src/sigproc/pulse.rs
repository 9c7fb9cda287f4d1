use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::invalid;
use crate::Result;

/// A real, symmetric, unit-energy FIR pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    taps: Vec<f64>,
    rolloff: f64,
    span_symbols: usize,
    samples_per_symbol: usize,
}

/// Truncated root-raised-cosine taps over `span_symbols` symbol periods at
/// `sps` samples per symbol (`span_symbols * sps + 1` taps), scaled to unit
/// energy.
pub fn rrc_pulse(rolloff: f64, span_symbols: usize, sps: usize) -> Result<PulseShape> {
    if !(0.0..=1.0).contains(&rolloff) {
        return Err(invalid(format!("rolloff {rolloff} outside [0, 1]")));
    }
    if span_symbols == 0 || span_symbols % 2 != 0 {
        return Err(invalid(format!("span_symbols {span_symbols} must be even and positive")));
    }
    if sps < 2 {
        return Err(invalid(format!("samples per symbol {sps} must be >= 2")));
    }
    let half = (span_symbols * sps / 2) as isize;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|n| rrc_value(n as f64 / sps as f64, rolloff))
        .collect();
    let e = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| *t /= e);
    Ok(PulseShape {
        taps,
        rolloff,
        span_symbols,
        samples_per_symbol: sps,
    })
}

/// Continuous-time RRC impulse response at `t` symbol periods (unnormalized).
fn rrc_value(t: f64, beta: f64) -> f64 {
    const EPS: f64 = 1e-10;
    if t.abs() < EPS {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < EPS {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

impl PulseShape {
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Index of the center tap; also the group delay in samples.
    pub fn center(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn rolloff(&self) -> f64 {
        self.rolloff
    }

    pub fn span_symbols(&self) -> usize {
        self.span_symbols
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    /// Autocorrelation of the taps at lags `0, sps, 2*sps, ...`: the symbol-rate
    /// response of pulse shaper followed by matched filter.
    pub fn symbol_autocorrelation(&self) -> Vec<f64> {
        let sps = self.samples_per_symbol;
        let n = self.taps.len();
        (0..)
            .map(|j| j * sps)
            .take_while(|&lag| lag < n)
            .map(|lag| (0..n - lag).map(|i| self.taps[i] * self.taps[i + lag]).sum())
            .collect()
    }

    /// Largest |autocorrelation| at a nonzero symbol lag.
    pub fn max_isi(&self) -> f64 {
        self.symbol_autocorrelation()
            .iter()
            .skip(1)
            .fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Minimum-norm correction of the taps (same length, still symmetric)
    /// that makes the pulse exactly orthonormal to its own symbol-spaced
    /// shifts, so shaping followed by matched filtering has no ISI. Solved by
    /// Gauss-Newton on the autocorrelation constraints.
    pub fn nyquist_refined(&self) -> Result<PulseShape> {
        let sps = self.samples_per_symbol;
        let c = self.center();
        let n = self.taps.len();
        let lags: Vec<usize> = (0..).map(|j| j * sps).take_while(|&l| l < n).collect();
        let mut p: Vec<f64> = self.taps[c..].to_vec();

        let expand = |p: &[f64]| -> Vec<f64> {
            (0..n).map(|m| p[(m as isize - c as isize).unsigned_abs()]).collect()
        };

        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..60 {
            let h = expand(&p);
            let resid = DVector::from_iterator(
                lags.len(),
                lags.iter().enumerate().map(|(j, &lag)| {
                    let r: f64 = (0..n - lag).map(|i| h[i] * h[i + lag]).sum();
                    if j == 0 {
                        r - 1.0
                    } else {
                        r
                    }
                }),
            );
            let worst = resid.amax();
            if best.as_ref().is_none_or(|(b, _)| worst < *b) {
                best = Some((worst, h.clone()));
            }
            if worst < 1e-15 {
                break;
            }
            // d r_lag / d h[m] = h[m + lag] + h[m - lag]
            let jac = DMatrix::from_fn(lags.len(), p.len(), |row, col| {
                let lag = lags[row] as isize;
                let mut ms = vec![c as isize + col as isize];
                if col > 0 {
                    ms.push(c as isize - col as isize);
                }
                let at = |i: isize| {
                    if i >= 0 && (i as usize) < n {
                        h[i as usize]
                    } else {
                        0.0
                    }
                };
                ms.into_iter().map(|m| at(m + lag) + at(m - lag)).sum::<f64>()
            });
            let jjt = &jac * jac.transpose();
            let y = jjt
                .lu()
                .solve(&resid)
                .ok_or_else(|| invalid("Nyquist refinement: singular Jacobian"))?;
            let step = jac.transpose() * y;
            for (pi, s) in p.iter_mut().zip(step.iter()) {
                *pi -= s;
            }
        }
        match best {
            Some((worst, h)) if worst < 1e-13 => {
                let mut out = self.clone();
                out.taps = h;
                Ok(out)
            }
            _ => Err(invalid("Nyquist refinement did not converge")),
        }
    }
}
