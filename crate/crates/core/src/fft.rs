//! Thin wrapper around `rustfft` with a process-wide plan cache.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::{Fft, FftPlanner};

use crate::C64;

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

/// Forward/inverse transform pair of a fixed length. Both directions are
/// unnormalized; callers fold the `1/n` factor into their frequency response.
#[derive(Clone)]
pub struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl std::fmt::Debug for FftPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPair").field("len", &self.len).finish()
    }
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut p = planner().lock().expect("fft planner poisoned");
        FftPair {
            forward: p.plan_fft_forward(len),
            inverse: p.plan_fft_inverse(len),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward(&self, buf: &mut [C64]) {
        self.forward.process(buf);
    }

    pub fn inverse(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
    }

    /// Applies a frequency response `h` (already carrying the `1/n` factor).
    pub fn filter(&self, buf: &mut [C64], h: &[C64]) {
        self.forward(buf);
        for (b, &g) in buf.iter_mut().zip(h) {
            *b *= g;
        }
        self.inverse(buf);
    }
}

/// Frequency in Hz of every DFT bin, in FFT order. The Nyquist bin of an
/// even-length transform is assigned to `-fs/2`.
pub fn bin_frequencies(len: usize, sample_rate: f64) -> Vec<f64> {
    let n = len as f64;
    (0..len)
        .map(|k| {
            let k = if 2 * k >= len { k as f64 - n } else { k as f64 };
            k * sample_rate / n
        })
        .collect()
}

/// Angular frequency `2*pi*f` of every DFT bin.
pub fn angular_frequencies(len: usize, sample_rate: f64) -> Vec<f64> {
    bin_frequencies(len, sample_rate)
        .into_iter()
        .map(|f| 2.0 * PI * f)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_odd_length() {
        let n = 77;
        let pair = FftPair::new(n);
        let x: Vec<C64> = (0..n)
            .map(|k| C64::new((k as f64).sin(), (k as f64 * 0.3).cos()))
            .collect();
        let mut y = x.clone();
        pair.forward(&mut y);
        pair.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b / n as f64).norm() < 1e-12);
        }
    }

    #[test]
    fn bin_layout() {
        let f = bin_frequencies(4, 4.0);
        assert_eq!(f, vec![0.0, 1.0, -2.0, -1.0]);
        let f = bin_frequencies(5, 5.0);
        assert_eq!(f, vec![0.0, 1.0, 2.0, -2.0, -1.0]);
    }
}
