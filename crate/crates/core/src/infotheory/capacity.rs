use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

use crate::error::invalid;
use crate::gauss::log_sum_exp;
use crate::sigproc::Constellation;
use crate::{Result, C64};

/// Default Gauss-Hermite order per axis.
pub const DEFAULT_QUADRATURE_ORDER: usize = 20;

/// `log2(1 + snr)`, bits per complex symbol.
pub fn awgn_capacity(snr_linear: f64) -> f64 {
    (1.0 + snr_linear).log2()
}

/// Gauss-Hermite nodes and weights for `int f(t) exp(-t^2) dt`, from the
/// eigen-decomposition of the Jacobi matrix (Golub-Welsch).
pub fn gauss_hermite(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(invalid("quadrature order must be positive"));
    }
    let j = DMatrix::from_fn(order, order, |r, c| {
        if r + 1 == c || c + 1 == r {
            (r.max(c) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, PI.sqrt() * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// MI of `y = x + n`, `x` uniform on `c`, `n ~ CN(0, 1/snr)`, in bits, with
/// the default quadrature order.
pub fn constrained_capacity_qam(c: &Constellation, snr_linear: f64) -> Result<f64> {
    constrained_capacity_with_order(c, snr_linear, DEFAULT_QUADRATURE_ORDER)
}

/// As [`constrained_capacity_qam`] with an explicit per-axis order (at
/// least 4).
pub fn constrained_capacity_with_order(c: &Constellation, snr_linear: f64, order: usize) -> Result<f64> {
    if order < 4 {
        return Err(invalid(format!("quadrature order {order} is below 4")));
    }
    if !(snr_linear >= 0.0) {
        return Err(invalid("SNR must be non-negative"));
    }
    let m = c.len();
    let log_m = (m as f64).log2();
    if snr_linear == 0.0 {
        return Ok(0.0);
    }
    if snr_linear.is_infinite() {
        return Ok(log_m);
    }
    let (t, w) = gauss_hermite(order)?;
    let sigma = snr_linear.recip().sqrt();
    let pts = c.points();
    let mut expo = vec![0.0; m];
    let mut penalty = 0.0;
    for &xi in pts {
        for (ta, wa) in t.iter().zip(&w) {
            for (tb, wb) in t.iter().zip(&w) {
                // n = sigma (ta + i tb) has density exp(-|n|^2/sigma^2) / (pi sigma^2)
                let n = C64::new(*ta, *tb) * sigma;
                for (e, &xj) in expo.iter_mut().zip(pts) {
                    let d = xi - xj + n;
                    *e = -(d.norm_sqr() - n.norm_sqr()) * snr_linear;
                }
                penalty += wa * wb / PI * log_sum_exp(&expo);
            }
        }
    }
    let mi = log_m - penalty / m as f64 / std::f64::consts::LN_2;
    Ok(mi.clamp(0.0, log_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use crate::seeds;
    use rand::Rng;

    #[test]
    fn awgn_values() {
        assert_eq!(awgn_capacity(0.0), 0.0);
        assert!((awgn_capacity(1.0) - 1.0).abs() < 1e-15);
        assert!((awgn_capacity(255.0) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_rule_integrates_moments() {
        let (t, w) = gauss_hermite(20).unwrap();
        let m = |k: i32| t.iter().zip(&w).map(|(x, v)| v * x.powi(k)).sum::<f64>();
        assert!((m(0) - PI.sqrt()).abs() < 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert!((m(2) - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!((m(4) - 3.0 * PI.sqrt() / 4.0).abs() < 1e-12);
    }

    #[test]
    fn saturation_limits_and_order_check() {
        let c = Constellation::square_qam(64).unwrap();
        assert!((constrained_capacity_qam(&c, 1e6).unwrap() - 6.0).abs() < 1e-9);
        assert!(constrained_capacity_qam(&c, 1e-6).unwrap() < 1e-5);
        assert!(constrained_capacity_with_order(&c, 10.0, 3).is_err());
        let q = Constellation::square_qam(4).unwrap();
        // QPSK is two BPSK channels at half the SNR per dimension
        let c4 = constrained_capacity_qam(&q, 10f64.powf(0.5)).unwrap();
        assert!(c4 > 1.5 && c4 < 2.0);
        assert!(c4 < awgn_capacity(10f64.powf(0.5)));
    }

    #[test]
    fn agrees_with_monte_carlo_at_10_db() {
        let c = Constellation::square_qam(64).unwrap();
        let snr = 10.0;
        let gh = constrained_capacity_qam(&c, snr).unwrap();
        let n = 1_000_000;
        let mut rng = seeds::stream(11, 0);
        let noise = complex_gaussian(&mut rng, n, 1.0 / snr);
        let mut expo = vec![0.0; 64];
        let mut acc = 0.0;
        for w in &noise {
            let x = c.point(rng.random_range(0..64));
            for (e, &xj) in expo.iter_mut().zip(c.points()) {
                *e = -((x - xj + w).norm_sqr() - w.norm_sqr()) * snr;
            }
            acc += log_sum_exp(&expo);
        }
        let mc = 6.0 - acc / n as f64 / std::f64::consts::LN_2;
        assert!((gh - mc).abs() < 0.01, "{gh} {mc}");
    }
}
