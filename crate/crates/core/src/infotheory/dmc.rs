use rand::Rng;

use crate::error::invalid;
use crate::Result;

const ROW_TOL: f64 = 1e-12;

/// Finite-alphabet memoryless channel with an input law.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteChannel {
    input_law: Vec<f64>,
    /// `transition[x][y] = p(y | x)`.
    transition: Vec<Vec<f64>>,
}

fn is_distribution(v: &[f64], tol: f64) -> bool {
    v.iter().all(|&p| p >= 0.0 && p.is_finite()) && (v.iter().sum::<f64>() - 1.0).abs() <= tol
}

impl DiscreteChannel {
    pub fn new(input_law: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        if input_law.is_empty() || input_law.len() != transition.len() {
            return Err(invalid("need one transition row per input symbol"));
        }
        if !is_distribution(&input_law, ROW_TOL) {
            return Err(invalid("input law is not a distribution"));
        }
        let b = transition[0].len();
        if b == 0 {
            return Err(invalid("empty output alphabet"));
        }
        for (x, row) in transition.iter().enumerate() {
            if row.len() != b || !is_distribution(row, ROW_TOL) {
                return Err(invalid(format!("transition row {x} is not a distribution")));
            }
        }
        Ok(DiscreteChannel {
            input_law,
            transition,
        })
    }

    /// Random channel with strictly positive entries.
    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let input_law = random_distribution(inputs, rng);
        let transition = (0..inputs).map(|_| random_distribution(outputs, rng)).collect();
        DiscreteChannel {
            input_law,
            transition,
        }
    }

    pub fn inputs(&self) -> usize {
        self.input_law.len()
    }

    pub fn outputs(&self) -> usize {
        self.transition[0].len()
    }

    pub fn input_law(&self) -> &[f64] {
        &self.input_law
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    /// Output law `p(y)`.
    pub fn output_law(&self) -> Vec<f64> {
        output_law(&self.input_law, &self.transition)
    }

    /// True backward channel `p(x | y)`, indexed `[x][y]`.
    pub fn posterior(&self) -> Vec<Vec<f64>> {
        induced_backward(&self.input_law, &self.transition)
    }
}

/// Random point of the simplex with entries bounded away from zero.
pub fn random_distribution<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn output_law(px: &[f64], t: &[Vec<f64>]) -> Vec<f64> {
    let mut py = vec![0.0; t[0].len()];
    for (p, row) in px.iter().zip(t) {
        for (acc, q) in py.iter_mut().zip(row) {
            *acc += p * q;
        }
    }
    py
}

fn induced_backward(px: &[f64], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let qy = output_law(px, q);
    px.iter()
        .zip(q)
        .map(|(p, row)| {
            row.iter()
                .zip(&qy)
                .map(|(v, d)| if *d > 0.0 { p * v / d } else { 0.0 })
                .collect()
        })
        .collect()
}

/// `sum p(x) p(y|x) f(x, y)` skipping zero-probability pairs.
fn expect(ch: &DiscreteChannel, f: impl Fn(usize, usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for (x, (p, row)) in ch.input_law.iter().zip(&ch.transition).enumerate() {
        for (y, t) in row.iter().enumerate() {
            let w = p * t;
            if w > 0.0 {
                acc += w * f(x, y);
            }
        }
    }
    acc
}

/// Mutual information in bits.
pub fn dmc_mi(ch: &DiscreteChannel) -> f64 {
    let py = ch.output_law();
    expect(ch, |x, y| (ch.transition[x][y] / py[y]).log2())
}

fn check_forward(ch: &DiscreteChannel, q: &[Vec<f64>]) -> Result<()> {
    if q.len() != ch.inputs() {
        return Err(invalid("auxiliary channel has the wrong number of rows"));
    }
    for (x, row) in q.iter().enumerate() {
        if row.len() != ch.outputs() || !is_distribution(row, 1e-9) {
            return Err(invalid(format!("auxiliary row {x} is not a distribution")));
        }
    }
    Ok(())
}

fn check_backward(ch: &DiscreteChannel, r: &[Vec<f64>]) -> Result<()> {
    if r.len() != ch.inputs() || r.iter().any(|row| row.len() != ch.outputs()) {
        return Err(invalid("backward channel has the wrong shape"));
    }
    for y in 0..ch.outputs() {
        let col: Vec<f64> = r.iter().map(|row| row[y]).collect();
        if !is_distribution(&col, 1e-9) {
            return Err(invalid(format!("backward column {y} is not a distribution")));
        }
    }
    Ok(())
}

/// Lower bound through an auxiliary forward channel `q[x][y] = q(y|x)`:
/// `E log2 q(y|x) / q(y)` with `q(y) = sum_x p(x) q(y|x)`.
pub fn dmc_air_afc(ch: &DiscreteChannel, q: &[Vec<f64>]) -> Result<f64> {
    check_forward(ch, q)?;
    let qy = output_law(&ch.input_law, q);
    Ok(expect(ch, |x, y| (q[x][y] / qy[y]).log2()))
}

/// Lower bound through an auxiliary backward channel `r[x][y] = r(x|y)`:
/// `E log2 r(x|y) / p(x)`.
pub fn dmc_air_abc(ch: &DiscreteChannel, r: &[Vec<f64>]) -> Result<f64> {
    check_backward(ch, r)?;
    Ok(expect(ch, |x, y| (r[x][y] / ch.input_law[x]).log2()))
}

/// Backward channel induced by a forward one and the input law:
/// `r_q(x|y) = p(x) q(y|x) / q(y)`.
pub fn induced_abc(ch: &DiscreteChannel, q: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_forward(ch, q)?;
    Ok(induced_backward(&ch.input_law, q))
}

/// `D(p(x, y) || p(y) r(x|y))` in bits, the gap between the MI and
/// [`dmc_air_abc`].
pub fn backward_kld(ch: &DiscreteChannel, r: &[Vec<f64>]) -> Result<f64> {
    check_backward(ch, r)?;
    let py = ch.output_law();
    Ok(expect(ch, |x, y| {
        let joint = ch.input_law[x] * ch.transition[x][y];
        (joint / (py[y] * r[x][y])).log2()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    fn bsc(e: f64) -> DiscreteChannel {
        DiscreteChannel::new(vec![0.5, 0.5], vec![vec![1.0 - e, e], vec![e, 1.0 - e]]).unwrap()
    }

    fn h2(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn binary_symmetric_channel() {
        assert!((dmc_mi(&bsc(0.0)) - 1.0).abs() < 1e-15);
        assert!(dmc_mi(&bsc(0.5)).abs() < 1e-15);
        let mi = dmc_mi(&bsc(0.11));
        assert!((mi - (1.0 - h2(0.11))).abs() < 1e-14);
        assert!((mi - 0.5).abs() < 0.001);
    }

    #[test]
    fn matched_and_uninformative_auxiliaries() {
        let mut rng = seeds::stream(1, 0);
        let ch = DiscreteChannel::random(4, 6, &mut rng);
        let mi = dmc_mi(&ch);
        assert!((dmc_air_afc(&ch, ch.transition()).unwrap() - mi).abs() < 1e-14);
        assert!((dmc_air_abc(&ch, &ch.posterior()).unwrap() - mi).abs() < 1e-14);
        let flat = vec![vec![1.0 / 6.0; 6]; 4];
        assert!(dmc_air_afc(&ch, &flat).unwrap().abs() < 1e-15);
        let ignore: Vec<Vec<f64>> = ch.input_law().iter().map(|&p| vec![p; 6]).collect();
        assert!(dmc_air_abc(&ch, &ignore).unwrap().abs() < 1e-15);
    }

    #[test]
    fn bounds_and_kld_identity_on_random_instances() {
        let mut rng = seeds::stream(2, 0);
        for _ in 0..100 {
            let ch = DiscreteChannel::random(4, 5, &mut rng);
            let q = DiscreteChannel::random(4, 5, &mut rng).transition().to_vec();
            let mi = dmc_mi(&ch);
            let afc = dmc_air_afc(&ch, &q).unwrap();
            assert!(afc <= mi + 1e-12);
            let rq = induced_abc(&ch, &q).unwrap();
            assert!((dmc_air_abc(&ch, &rq).unwrap() - afc).abs() < 1e-12);
            let gap = backward_kld(&ch, &rq).unwrap();
            assert!(gap >= -1e-12 && (mi - afc - gap).abs() < 1e-10);

            // arbitrary column-stochastic r
            let cols: Vec<Vec<f64>> = (0..5).map(|_| random_distribution(4, &mut rng)).collect();
            let r: Vec<Vec<f64>> = (0..4).map(|x| cols.iter().map(|c| c[x]).collect()).collect();
            let abc = dmc_air_abc(&ch, &r).unwrap();
            let gap = backward_kld(&ch, &r).unwrap();
            assert!(abc <= mi + 1e-12 && gap >= 0.0 && (mi - abc - gap).abs() < 1e-10);
        }
    }

    #[test]
    fn malformed_auxiliaries_are_rejected() {
        let ch = bsc(0.1);
        assert!(dmc_air_afc(&ch, &[vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(dmc_air_abc(&ch, &[vec![0.5, 0.5], vec![0.6, 0.5]]).is_err());
        assert!(DiscreteChannel::new(vec![0.5, 0.6], vec![vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn maximizing_the_backward_bound_recovers_mi() {
        // r(x|y) = softmax over x of theta[x][y]; gradient of the bound in nats
        // is p(x, y) - p(y) r(x|y)
        let mut rng = seeds::stream(3, 0);
        let ch = DiscreteChannel::random(3, 4, &mut rng);
        let mi = dmc_mi(&ch);
        let py = ch.output_law();
        let mut theta = vec![vec![0.0; 4]; 3];
        let softmax = |theta: &[Vec<f64>]| -> Vec<Vec<f64>> {
            let mut r = vec![vec![0.0; 4]; 3];
            for y in 0..4 {
                let z: f64 = (0..3).map(|x| theta[x][y].exp()).sum();
                for x in 0..3 {
                    r[x][y] = theta[x][y].exp() / z;
                }
            }
            r
        };
        for _ in 0..20_000 {
            let r = softmax(&theta);
            for x in 0..3 {
                for y in 0..4 {
                    let joint = ch.input_law()[x] * ch.transition()[x][y];
                    theta[x][y] += 5.0 * (joint - py[y] * r[x][y]);
                }
            }
        }
        let got = dmc_air_abc(&ch, &softmax(&theta)).unwrap();
        assert!(got <= mi + 1e-12 && mi - got < 1e-6, "{got} {mi}");
    }
}
