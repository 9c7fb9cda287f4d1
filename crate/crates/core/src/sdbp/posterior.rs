use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::ops::Range;

use crate::error::invalid;
use crate::gauss::log_sum_exp;
use crate::sigproc::SymbolSequence;
use crate::Result;

/// Smallest probability kept in a posterior row.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Per-slot posteriors `r_k(m | y)`, stored row-major (`K` rows of `M`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTable {
    alphabet_size: usize,
    probs: Vec<f64>,
}

impl PosteriorTable {
    /// Normalizes unnormalized natural-log rows, floors at
    /// [`PROBABILITY_FLOOR`] and renormalizes.
    pub fn from_log_rows(alphabet_size: usize, logs: Vec<f64>) -> Result<Self> {
        if alphabet_size == 0 || logs.len() % alphabet_size != 0 {
            return Err(invalid("log table is not a whole number of rows"));
        }
        let mut probs = logs;
        for row in probs.chunks_exact_mut(alphabet_size) {
            if row.iter().any(|v| v.is_nan()) {
                return Err(invalid("NaN in posterior log-weights"));
            }
            let lse = log_sum_exp(row);
            if !lse.is_finite() {
                return Err(invalid("posterior row has no finite weight"));
            }
            for v in row.iter_mut() {
                *v = (*v - lse).exp().max(PROBABILITY_FLOOR);
            }
            let total: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        Ok(PosteriorTable {
            alphabet_size,
            probs,
        })
    }

    /// Wraps already-normalized rows.
    pub fn from_rows(alphabet_size: usize, probs: Vec<f64>) -> Result<Self> {
        if alphabet_size == 0 || probs.len() % alphabet_size != 0 {
            return Err(invalid("table is not a whole number of rows"));
        }
        for (k, row) in probs.chunks_exact(alphabet_size).enumerate() {
            if row.iter().any(|&v| !(v >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("row {k} is not a distribution")));
            }
        }
        Ok(PosteriorTable {
            alphabet_size,
            probs,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Number of slots.
    pub fn len(&self) -> usize {
        self.probs.len() / self.alphabet_size
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.probs[k * self.alphabet_size..(k + 1) * self.alphabet_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.alphabet_size)
    }
}

/// Per-slot terms `log2 r_k(x_k | y) / p(x_k)` over `range`.
pub fn air_abc_terms(
    post: &PosteriorTable,
    x: &SymbolSequence,
    prior: &[f64],
    range: Range<usize>,
) -> Result<Vec<f64>> {
    if post.len() != x.len() || range.end > x.len() {
        return Err(invalid("posterior, symbols and range do not line up"));
    }
    if x.alphabet_size() != post.alphabet_size() || prior.len() != post.alphabet_size() {
        return Err(invalid("alphabet sizes do not match"));
    }
    Ok(range
        .map(|k| {
            let xk = x.indices()[k];
            (post.row(k)[xk].ln() - prior[xk].ln()) / LN_2
        })
        .collect())
}

/// Monte-Carlo AIR of a backward channel, bits per symbol.
pub fn air_abc(post: &PosteriorTable, x: &SymbolSequence, prior: &[f64], range: Range<usize>) -> Result<f64> {
    let terms = air_abc_terms(post, x, prior, range)?;
    if terms.is_empty() {
        return Err(invalid("empty evaluation range"));
    }
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::{dmc_mi, DiscreteChannel};
    use crate::seeds;
    use rand::Rng;

    #[test]
    fn rows_are_normalized_and_floored() {
        let t = PosteriorTable::from_log_rows(3, vec![0.0, -1e6, 2.0, 5.0, 5.0, 5.0]).unwrap();
        assert_eq!(t.len(), 2);
        for r in t.rows() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(r.iter().all(|&v| v >= PROBABILITY_FLOOR));
        }
        assert!(PosteriorTable::from_log_rows(3, vec![0.0; 4]).is_err());
        assert!(PosteriorTable::from_rows(2, vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn uninformative_and_one_hot_rows() {
        let m = 64;
        let prior = vec![1.0 / m as f64; m];
        let x = SymbolSequence::new((0..100).map(|k| k % m).collect(), m).unwrap();
        let flat = PosteriorTable::from_rows(m, prior.repeat(100)).unwrap();
        assert_eq!(air_abc(&flat, &x, &prior, 0..100).unwrap(), 0.0);
        let mut hot = vec![0.0; 100 * m];
        for k in 0..100 {
            hot[k * m + k % m] = 1.0;
        }
        let hot = PosteriorTable::from_rows(m, hot).unwrap();
        assert!((air_abc(&hot, &x, &prior, 0..100).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn exact_posterior_of_a_dmc_estimates_its_mi() {
        let mut rng = seeds::stream(17, 0);
        let ch = DiscreteChannel::random(4, 5, &mut rng);
        let truth = dmc_mi(&ch);
        let post = ch.posterior();
        let n = 200_000;
        let mut xs = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n * 4);
        for _ in 0..n {
            let x = sample(ch.input_law(), rng.random());
            let y = sample(&ch.transition()[x], rng.random());
            xs.push(x);
            rows.extend((0..4).map(|i| post[i][y]));
        }
        let table = PosteriorTable::from_rows(4, rows).unwrap();
        let x = SymbolSequence::new(xs, 4).unwrap();
        let terms = air_abc_terms(&table, &x, ch.input_law(), 0..n).unwrap();
        let mean = terms.iter().sum::<f64>() / n as f64;
        let sd = (terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        assert!((mean - truth).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} {truth}");
    }

    fn sample(p: &[f64], u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &v) in p.iter().enumerate() {
            acc += v;
            if u < acc {
                return i;
            }
        }
        p.len() - 1
    }
}
