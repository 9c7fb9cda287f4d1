//! Gaussian message passing over a sliding window of the particle waveforms.
//!
//! For slot `k` the ensemble samples in a window centred on the symbol's
//! matched-filter support are summarized by a Gaussian `N(m, C)`. The
//! window is modelled as `H_k x_k + sum_{j != k} H_j x_j`, where the `H_j` are
//! the (real) pulse-shaping columns. Marginalizing the neighbouring symbols
//! under their prior moments and combining with `N(m, C)` gives the Gaussian
//! message
//!
//! ```text
//! W_k = H_k^T C'^{-1} H_k,  xi_k = H_k^T C'^{-1} (m - sum_j H_j mu),
//! C'  = C + sum_{j != k} H_j P H_j^T
//! ```
//!
//! whose density is evaluated on the constellation.
//!
//! With fewer particles than window dimensions the sample covariance is
//! singular, so it is shrunk towards the window covariance averaged over all
//! slots (which is cyclostationary and well conditioned) with a
//! Ledoit-Wolf style data-driven weight.
//!
//! Band-limited links leave some window directions with almost no particle
//! variance, and a message trusting them is fragile to any mismatch between
//! the particles and the true field. `C'` is therefore raised by whatever the
//! average window covariance lacks, per eigendirection, to reach a floor set
//! by its mean variance; white noise is already at the floor and is left
//! untouched.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::{check_prior, ParticleEnsemble, PosteriorTable};
use crate::error::invalid;
use crate::sigproc::{Constellation, PulseShape};
use crate::Result;

/// Relative diagonal loading, times `trace(C') / dim`.
const RELATIVE_RIDGE: f64 = 1e-9;
/// Loading used when the window covariance is identically zero.
const ABSOLUTE_RIDGE: f64 = 1e-12;
/// Least variance of any window direction, relative to the mean variance of
/// the average window covariance.
const NOISE_FLOOR: f64 = 0.5;

/// Per-call summary of the regularization actually applied.
#[derive(Debug, Clone, PartialEq)]
pub struct GmpDiagnostics {
    pub window_symbols: usize,
    /// Real dimension of each window (2 per sample).
    pub dimension: usize,
    pub mean_shrinkage: f64,
    pub max_shrinkage: f64,
    pub min_ridge: f64,
    pub max_ridge: f64,
}

/// Window geometry shared by every slot.
struct Window {
    /// Offset of the first window sample from `k * sps`, may be negative.
    offset: isize,
    len: usize,
    /// Pulse tap seen at window sample `i` for the centre symbol.
    centre: Vec<f64>,
    /// `sum_{j != k} h_j h_j^T`, `len x len`.
    nuisance_gram: DMatrix<f64>,
    /// `sum_{j != k} h_j`.
    nuisance_sum: Vec<f64>,
}

impl Window {
    fn new(p: &PulseShape, window_symbols: usize) -> Result<Self> {
        let sps = p.samples_per_symbol() as isize;
        let taps = p.taps();
        let centre_tap = p.center() as isize;
        let samples = window_symbols * p.samples_per_symbol();
        if window_symbols < p.span_symbols() {
            return Err(invalid(format!(
                "GMP window of {window_symbols} symbols is shorter than the pulse span {}",
                p.span_symbols()
            )));
        }
        if samples % 2 != 0 {
            return Err(invalid("GMP window must span an even number of samples"));
        }
        let half = (samples / 2) as isize;
        let len = samples + 1;
        let offset = centre_tap - half;
        let tap = |i: usize, delta: isize| -> f64 {
            let t = offset + i as isize - delta * sps;
            if t >= 0 && (t as usize) < taps.len() {
                taps[t as usize]
            } else {
                0.0
            }
        };
        let reach = (centre_tap + half) / sps;
        let centre = (0..len).map(|i| tap(i, 0)).collect();
        let mut gram = DMatrix::zeros(len, len);
        let mut sum = vec![0.0; len];
        for delta in -reach..=reach {
            if delta == 0 {
                continue;
            }
            let h: Vec<f64> = (0..len).map(|i| tap(i, delta)).collect();
            for i in 0..len {
                sum[i] += h[i];
                if h[i] == 0.0 {
                    continue;
                }
                for j in 0..len {
                    gram[(i, j)] += h[i] * h[j];
                }
            }
        }
        Ok(Window {
            offset,
            len,
            centre,
            nuisance_gram: gram,
            nuisance_sum: sum,
        })
    }

    fn start(&self, k: usize, sps: usize, n: usize) -> usize {
        ((k * sps) as isize + self.offset).rem_euclid(n as isize) as usize
    }
}

/// GMP posterior with the default bookkeeping dropped.
pub fn gmp_posterior(
    ens: &ParticleEnsemble,
    p: &PulseShape,
    c: &Constellation,
    prior: &[f64],
    window_symbols: usize,
) -> Result<PosteriorTable> {
    gmp_posterior_with_diagnostics(ens, p, c, prior, window_symbols).map(|(t, _)| t)
}

/// Per-slot Gaussian message passing through the pulse shaper; see the
/// module docs.
pub fn gmp_posterior_with_diagnostics(
    ens: &ParticleEnsemble,
    p: &PulseShape,
    c: &Constellation,
    prior: &[f64],
    window_symbols: usize,
) -> Result<(PosteriorTable, GmpDiagnostics)> {
    let np = ens.len();
    if np < 2 {
        return Err(invalid("GMP needs at least two particles"));
    }
    if ens.samples_per_symbol() != p.samples_per_symbol() || ens.delay_samples() != p.center() {
        return Err(invalid("ensemble is not aligned with the pulse"));
    }
    let log_prior = check_prior(prior, c)?;
    let sps = p.samples_per_symbol();
    let n = ens.num_samples();
    if n % sps != 0 {
        return Err(invalid("ensemble length is not a whole number of symbols"));
    }
    let slots = n / sps;
    let win = Window::new(p, window_symbols)?;
    if win.len > n {
        return Err(invalid("GMP window is longer than the block"));
    }
    let d = 2 * win.len;
    let scale = ens.amplitude().recip();

    // interleaved (re, im) mean and deviations on the unit-energy scale
    let mut mean = vec![0.0; 2 * n];
    for q in ens.particles() {
        for (t, v) in q.iter().enumerate() {
            mean[2 * t] += v.re * scale;
            mean[2 * t + 1] += v.im * scale;
        }
    }
    mean.iter_mut().for_each(|v| *v /= np as f64);
    let dev: Vec<Vec<f64>> = ens
        .particles()
        .iter()
        .map(|q| {
            q.iter()
                .enumerate()
                .flat_map(|(t, v)| [v.re * scale - mean[2 * t], v.im * scale - mean[2 * t + 1]])
                .collect()
        })
        .collect();

    let target = cyclostationary_target(&dev, &win, sps, slots, np);
    let lift = variance_floor(&target, NOISE_FLOOR);

    let (pmean, pcov) = c.moments(prior);
    let p2 = [[pcov.xx, pcov.xy], [pcov.xy, pcov.yy]];
    let nuisance = DMatrix::from_fn(d, d, |r, s| win.nuisance_gram[(r / 2, s / 2)] * p2[r % 2][s % 2]);
    let offset_mean: Vec<f64> = win
        .nuisance_sum
        .iter()
        .flat_map(|&h| [h * pmean.re, h * pmean.im])
        .collect();
    let hk = DMatrix::from_fn(d, 2, |r, s| if r % 2 == s { win.centre[r / 2] } else { 0.0 });

    let m = c.len();
    let nf = np as f64;
    let results: Vec<(Vec<f64>, f64, f64)> = (0..slots)
        .into_par_iter()
        .map_init(
            || (DMatrix::<f64>::zeros(d, np), DMatrix::<f64>::zeros(np, d), DMatrix::<f64>::zeros(d, d)),
            |(dk, dkt, s), k| {
                let start = win.start(k, sps, n);
                let mut m_adj = DVector::<f64>::zeros(d);
                for i in 0..win.len {
                    let t = (start + i) % n;
                    m_adj[2 * i] = mean[2 * t] - offset_mean[2 * i];
                    m_adj[2 * i + 1] = mean[2 * t + 1] - offset_mean[2 * i + 1];
                }
                let mut fourth = 0.0;
                for (pi, q) in dev.iter().enumerate() {
                    let mut sq = 0.0;
                    for i in 0..win.len {
                        let t = (start + i) % n;
                        let (a, b) = (q[2 * t], q[2 * t + 1]);
                        dk[(2 * i, pi)] = a;
                        dk[(2 * i + 1, pi)] = b;
                        sq += a * a + b * b;
                    }
                    fourth += sq * sq;
                }
                dk.transpose_to(dkt);
                s.gemm(1.0 / (nf - 1.0), dk, dkt, 0.0);

                let s_norm2 = s.norm_squared();
                let gap2 = (&*s - &target).norm_squared();
                let var_sum = nf / (nf - 1.0).powi(3) * (fourth - (nf - 1.0).powi(2) / nf * s_norm2);
                let rho = if gap2 > 0.0 {
                    (var_sum / gap2).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                let mut cp = &*s * (1.0 - rho) + &target * rho + &nuisance + &lift;
                let mut ridge = RELATIVE_RIDGE * cp.trace() / d as f64;
                if !(ridge > 0.0) {
                    ridge = ABSOLUTE_RIDGE;
                }
                let chol = loop {
                    let mut trial = cp.clone();
                    for i in 0..d {
                        trial[(i, i)] += ridge;
                    }
                    if let Some(ch) = trial.cholesky() {
                        break ch;
                    }
                    ridge *= 10.0;
                };
                cp.fill(0.0);
                let mut rhs = DMatrix::<f64>::zeros(d, 3);
                rhs.view_mut((0, 0), (d, 2)).copy_from(&hk);
                rhs.column_mut(2).copy_from(&m_adj);
                let sol = chol.solve(&rhs);
                let proj = hk.transpose() * sol;
                let w = [
                    [proj[(0, 0)], 0.5 * (proj[(0, 1)] + proj[(1, 0)])],
                    [0.5 * (proj[(0, 1)] + proj[(1, 0)]), proj[(1, 1)]],
                ];
                let xi = [proj[(0, 2)], proj[(1, 2)]];
                let logs = c
                    .points()
                    .iter()
                    .zip(&log_prior)
                    .map(|(pt, lp)| {
                        let v = [pt.re, pt.im];
                        let quad = w[0][0] * v[0] * v[0] + 2.0 * w[0][1] * v[0] * v[1] + w[1][1] * v[1] * v[1];
                        -0.5 * quad + xi[0] * v[0] + xi[1] * v[1] + lp
                    })
                    .collect();
                (logs, rho, ridge)
            },
        )
        .collect();

    let mut logs = Vec::with_capacity(slots * m);
    let mut diag = GmpDiagnostics {
        window_symbols,
        dimension: d,
        mean_shrinkage: 0.0,
        max_shrinkage: 0.0,
        min_ridge: f64::INFINITY,
        max_ridge: 0.0,
    };
    for (l, rho, ridge) in results {
        logs.extend(l);
        diag.mean_shrinkage += rho / slots as f64;
        diag.max_shrinkage = diag.max_shrinkage.max(rho);
        diag.min_ridge = diag.min_ridge.min(ridge);
        diag.max_ridge = diag.max_ridge.max(ridge);
    }
    Ok((PosteriorTable::from_log_rows(m, logs)?, diag))
}

/// `V max(0, f - L) V^T` for `T = V L V^T` and `f = fraction * trace(T) / dim`:
/// raises every eigen-direction of the average window covariance to at least
/// `f`. Zero for white noise.
fn variance_floor(target: &DMatrix<f64>, fraction: f64) -> DMatrix<f64> {
    let d = target.nrows();
    let floor = fraction * target.trace() / d as f64;
    let eig = SymmetricEigen::new(target.clone());
    let lifts = eig.eigenvalues.map(|l| (floor - l).max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&lifts) * eig.eigenvectors.transpose()
}

/// Average of the per-slot window sample covariances. Every window starts at
/// the same phase of the symbol clock, so entry `(i, j)` only depends on the
/// phase of sample `i` and the lag `j - i`; it is accumulated once per
/// (phase, lag) over the whole block instead of once per slot.
fn cyclostationary_target(dev: &[Vec<f64>], win: &Window, sps: usize, slots: usize, np: usize) -> DMatrix<f64> {
    let n = slots * sps;
    let lw = win.len;
    // acc[phase][lag] = sum over particles and t = phase (mod sps) of d_t d_{t+lag}^T
    let mut acc = vec![vec![[0.0f64; 4]; lw]; sps];
    for q in dev {
        for t in 0..n {
            let (a0, a1) = (q[2 * t], q[2 * t + 1]);
            let row = &mut acc[t % sps];
            for (lag, cell) in row.iter_mut().enumerate() {
                let u = (t + lag) % n;
                let (b0, b1) = (q[2 * u], q[2 * u + 1]);
                cell[0] += a0 * b0;
                cell[1] += a0 * b1;
                cell[2] += a1 * b0;
                cell[3] += a1 * b1;
            }
        }
    }
    let norm = 1.0 / (slots as f64 * (np as f64 - 1.0));
    let phase0 = win.offset.rem_euclid(sps as isize) as usize;
    let d = 2 * lw;
    let mut t = DMatrix::zeros(d, d);
    for i in 0..lw {
        let row = &acc[(phase0 + i) % sps];
        for j in i..lw {
            let cell = row[j - i];
            for a in 0..2 {
                for b in 0..2 {
                    let v = cell[2 * a + b] * norm;
                    t[(2 * i + a, 2 * j + b)] = v;
                    t[(2 * j + b, 2 * i + a)] = v;
                }
            }
        }
    }
    t
}
