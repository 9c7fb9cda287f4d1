//! Mutual information and its auxiliary-channel lower bounds, exact for
//! discrete memoryless channels and as Monte-Carlo averages otherwise, plus
//! the AWGN reference curves. Likelihoods are handled in nats; results are
//! reported in bits.

mod capacity;
mod dmc;
mod estimate;

pub use capacity::{
    awgn_capacity, constrained_capacity_qam, constrained_capacity_with_order, gauss_hermite,
    DEFAULT_QUADRATURE_ORDER,
};
pub use dmc::{
    backward_kld, dmc_air_abc, dmc_air_afc, dmc_mi, induced_abc, random_distribution, DiscreteChannel,
};
pub use estimate::{mc_air, AirEstimate};

use crate::dbp::GaussianAuxChannel;

/// MAP decision under an auxiliary forward channel: argmax over points of
/// `ln q(z|m) + ln p(m)`, ties to the lowest index.
pub fn map_decision_afc(z: crate::C64, aux: &GaussianAuxChannel, prior: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (m, (l, p)) in aux.log_likelihoods(z).iter().zip(prior).enumerate() {
        let v = l + p.ln();
        if v > best_v {
            best_v = v;
            best = m;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbp::AuxVariant;
    use crate::gauss::Cov2;
    use crate::sigproc::Constellation;
    use crate::C64;

    #[test]
    fn nearest_point_under_uniform_isotropic() {
        let c = Constellation::square_qam(16).unwrap();
        let aux = GaussianAuxChannel::new(AuxVariant::Iidg, c.points().to_vec(), vec![Cov2::isotropic(0.1); 16]).unwrap();
        for (m, &pt) in c.points().iter().enumerate() {
            assert_eq!(map_decision_afc(pt, &aux, &c.uniform_prior()), m);
            assert_eq!(map_decision_afc(pt + C64::new(0.01, -0.02), &aux, &c.uniform_prior()), m);
        }
    }

    #[test]
    fn skewed_prior_flips_the_boundary() {
        let pts = vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)];
        let aux = GaussianAuxChannel::new(AuxVariant::Iidg, pts, vec![Cov2::isotropic(0.5); 2]).unwrap();
        let z = C64::new(0.1, 0.0);
        // likelihood ratio q(z|1)/q(z|0) = exp(0.4)
        assert_eq!(map_decision_afc(z, &aux, &[0.5, 0.5]), 1);
        assert_eq!(map_decision_afc(z, &aux, &[0.7, 0.3]), 0);
        // ties go to the lowest index
        assert_eq!(map_decision_afc(C64::new(0.0, 0.0), &aux, &[0.5, 0.5]), 0);
    }

    #[test]
    fn invariant_to_a_common_likelihood_shift() {
        let c = Constellation::square_qam(4).unwrap();
        let a = GaussianAuxChannel::new(AuxVariant::Iidg, c.points().to_vec(), vec![Cov2::isotropic(0.3); 4]).unwrap();
        let prior = [0.1f64, 0.2, 0.3, 0.4];
        for z in [C64::new(0.2, 0.3), C64::new(-0.5, 0.1), C64::new(0.0, -0.7)] {
            let shifted: Vec<f64> = a
                .log_likelihoods(z)
                .iter()
                .zip(&prior)
                .map(|(l, p)| l + p.ln() + 123.0)
                .collect();
            let want = shifted
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                .0;
            assert_eq!(map_decision_afc(z, &a, &prior), want);
        }
    }
}
