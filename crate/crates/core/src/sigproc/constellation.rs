use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::gauss::Cov2;
use crate::{Result, C64};

/// A finite input alphabet in the complex plane, normalized to unit average
/// energy under the uniform law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    points: Vec<C64>,
}

impl Constellation {
    /// Wraps arbitrary points. They must be distinct; they are rescaled to unit
    /// average energy.
    pub fn from_points(points: Vec<C64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("a constellation needs at least two points"));
        }
        for (i, a) in points.iter().enumerate() {
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(invalid(format!("point {i} is not finite")));
            }
            if points[..i].iter().any(|b| (a - b).norm() < 1e-12) {
                return Err(invalid(format!("point {i} is duplicated")));
            }
        }
        let energy = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
        if energy <= 0.0 {
            return Err(invalid("constellation has zero energy"));
        }
        let scale = energy.sqrt().recip();
        Ok(Constellation {
            points: points.into_iter().map(|p| p * scale).collect(),
        })
    }

    /// Square M-QAM. When `sqrt(M)` is a power of two each axis is Gray
    /// labelled, so index `i` carries its in-phase label in the high half of
    /// its bits and its quadrature label in the low half.
    pub fn square_qam(m: usize) -> Result<Self> {
        let side = (m as f64).sqrt().round() as usize;
        if m < 4 || side * side != m {
            return Err(invalid(format!("M = {m} is not a perfect square >= 4")));
        }
        let gray = side.is_power_of_two();
        let level = |label: usize| -> f64 {
            let pos = if gray { gray_to_binary(label) } else { label };
            2.0 * pos as f64 - (side as f64 - 1.0)
        };
        let norm = (2.0 * (m as f64 - 1.0) / 3.0).sqrt();
        let points = (0..m)
            .map(|i| C64::new(level(i / side), level(i % side)) / norm)
            .collect();
        Ok(Constellation { points })
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> C64 {
        self.points[index]
    }

    pub fn uniform_prior(&self) -> Vec<f64> {
        vec![1.0 / self.len() as f64; self.len()]
    }

    /// Mean and (Re, Im) covariance of the alphabet under `prior`.
    pub fn moments(&self, prior: &[f64]) -> (C64, Cov2) {
        let mean: C64 = self.points.iter().zip(prior).map(|(p, w)| p * w).sum();
        let mut c = Cov2::isotropic(0.0);
        for (p, w) in self.points.iter().zip(prior) {
            let d = p - mean;
            c.xx += w * d.re * d.re;
            c.xy += w * d.re * d.im;
            c.yy += w * d.im * d.im;
        }
        (mean, c)
    }

    /// Uniform iid symbols.
    pub fn random_symbols<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> SymbolSequence {
        let m = self.len();
        SymbolSequence {
            indices: (0..k).map(|_| rng.random_range(0..m)).collect(),
            alphabet_size: m,
        }
    }

    /// Index of the nearest point.
    pub fn nearest(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = g;
    g >>= 1;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

/// Builds square M-QAM; see [`Constellation::square_qam`].
pub fn build_square_qam(m: usize) -> Result<Constellation> {
    Constellation::square_qam(m)
}

/// A sequence of constellation indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    indices: Vec<usize>,
    alphabet_size: usize,
}

impl SymbolSequence {
    pub fn new(indices: Vec<usize>, alphabet_size: usize) -> Result<Self> {
        if let Some((k, &i)) = indices.iter().enumerate().find(|(_, &i)| i >= alphabet_size) {
            return Err(invalid(format!(
                "symbol {k} has index {i} outside alphabet of size {alphabet_size}"
            )));
        }
        Ok(SymbolSequence {
            indices,
            alphabet_size,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn amplitudes(&self, c: &Constellation) -> Vec<C64> {
        self.indices.iter().map(|&i| c.point(i)).collect()
    }

    /// Fraction of positions in `range` where `self` and `other` differ.
    pub fn symbol_error_rate(&self, other: &SymbolSequence, range: std::ops::Range<usize>) -> f64 {
        let n = range.len();
        if n == 0 {
            return 0.0;
        }
        let errs = range
            .filter(|&k| self.indices[k] != other.indices[k])
            .count();
        errs as f64 / n as f64
    }
}
