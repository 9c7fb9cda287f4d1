use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::Result;

/// Mean of per-run AIRs with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirEstimate {
    pub value_bits_per_symbol: f64,
    pub n_runs: usize,
    pub per_run: Vec<f64>,
    /// Sample standard deviation over `sqrt(n_runs)`; NaN for a single run.
    pub standard_error: f64,
}

impl AirEstimate {
    /// `sqrt(se_a^2 + se_b^2)`.
    pub fn combined_error(&self, other: &AirEstimate) -> f64 {
        self.standard_error.hypot(other.standard_error)
    }
}

pub fn mc_air(per_run: &[f64]) -> Result<AirEstimate> {
    if per_run.is_empty() {
        return Err(invalid("no runs to average"));
    }
    let n = per_run.len() as f64;
    let mean = per_run.iter().sum::<f64>() / n;
    let se = if per_run.len() < 2 {
        f64::NAN
    } else {
        let var = per_run.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Ok(AirEstimate {
        value_bits_per_symbol: mean,
        n_runs: per_run.len(),
        per_run: per_run.to_vec(),
        standard_error: se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng;

    #[test]
    fn arithmetic() {
        let e = mc_air(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.value_bits_per_symbol, 2.0);
        assert!((e.standard_error - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(mc_air(&[4.0; 5]).unwrap().standard_error, 0.0);
        assert!(mc_air(&[1.0]).unwrap().standard_error.is_nan());
        assert!(mc_air(&[]).is_err());
    }

    #[test]
    fn standard_error_shrinks_as_inverse_root() {
        let mut rng = seeds::stream(1, 0);
        let draws: Vec<f64> = (0..40_000).map(|_| rng.random::<f64>()).collect();
        let small = mc_air(&draws[..400]).unwrap().standard_error;
        let large = mc_air(&draws).unwrap().standard_error;
        // ratio sqrt(100) = 10 up to sampling noise of the std estimates
        assert!((small / large / 10.0 - 1.0).abs() < 0.1, "{}", small / large);
    }
}
