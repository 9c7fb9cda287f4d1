use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::runner::{run_point, PointSimulation};
use super::config::Receiver;
use crate::channel::{complex_gaussian, Direction, Link, LinkConfig, SpanConfig, SpanPropagator};
use crate::dbp::dbp_receive;
use crate::gauss::log_sum_exp;
use crate::infotheory::{
    constrained_capacity_qam, dmc_air_abc, dmc_air_afc, dmc_mi, induced_abc, DiscreteChannel,
};
use crate::sdbp::sdbp_backward;
use crate::seeds;
use crate::sigproc::{matched_filter_and_sample, modulate, TxConfig};
use crate::{Result, C64};

/// Outcome of one quick oracle check.
#[derive(Debug, Clone)]
pub struct SelfTestCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> SelfTestCheck {
    match f() {
        Ok((passed, detail)) => SelfTestCheck { name, passed, detail },
        Err(e) => SelfTestCheck {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn dmc_bounds() -> Result<(bool, String)> {
    let mut rng = seeds::stream(101, 0);
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..100 {
        let ch = DiscreteChannel::random(4, 5, &mut rng);
        let q = DiscreteChannel::random(4, 5, &mut rng).transition().to_vec();
        let mi = dmc_mi(&ch);
        let afc = dmc_air_afc(&ch, &q)?;
        let abc = dmc_air_abc(&ch, &induced_abc(&ch, &q)?)?;
        ok &= afc <= mi + 1e-12;
        worst = worst.max((abc - afc).abs());
    }
    ok &= worst < 1e-12;
    Ok((ok, format!("100 random channels, max |ABC(r_q) - AFC(q)| = {worst:.1e}")))
}

fn qam_capacity() -> Result<(bool, String)> {
    let c = TxConfig::default().constellation()?;
    let snr = 10.0;
    let gh = constrained_capacity_qam(&c, snr)?;
    let n = 200_000;
    let mut rng = seeds::stream(102, 0);
    let noise = complex_gaussian(&mut rng, n, 1.0 / snr);
    let mut expo = vec![0.0; c.len()];
    let mut acc = 0.0;
    for w in &noise {
        let x = c.point(rng.random_range(0..c.len()));
        for (e, &xj) in expo.iter_mut().zip(c.points()) {
            *e = -((x - xj + w).norm_sqr() - w.norm_sqr()) * snr;
        }
        acc += log_sum_exp(&expo);
    }
    let mc = (c.len() as f64).log2() - acc / n as f64 / std::f64::consts::LN_2;
    Ok(((gh - mc).abs() < 0.02, format!("64-QAM at 10 dB: quadrature {gh:.4}, MC {mc:.4}")))
}

fn back_to_back() -> Result<(bool, String)> {
    let tx = TxConfig::default();
    let (c, p) = (tx.constellation()?, tx.pulse()?);
    let x = c.random_symbols(256, &mut ChaCha8Rng::seed_from_u64(103));
    let sig = modulate(&x, &c, &p, 1e-3, tx.symbol_rate)?;
    let z = matched_filter_and_sample(&sig, &p)?;
    let err = max_abs_diff(&z, &x.amplitudes(&c));
    Ok((err < 1e-6, format!("max symbol error {err:.1e}")))
}

fn lossless_energy() -> Result<(bool, String)> {
    let tx = TxConfig::default();
    let span = SpanConfig::from_units(80.0, 16.0, 1.3, 0.0).with_segment_length(5e3);
    let prop = SpanPropagator::new(&span, 1550e-9, 1024, tx.sample_rate())?;
    let mut u = complex_gaussian(&mut seeds::stream(104, 0), 1024, 1e-2);
    let e0: f64 = u.iter().map(|v| v.norm_sqr()).sum();
    prop.propagate(&mut u, Direction::Forward);
    let e1: f64 = u.iter().map(|v| v.norm_sqr()).sum();
    let rel = (e1 / e0 - 1.0).abs();
    Ok((rel < 1e-10, format!("relative energy change {rel:.1e}")))
}

fn dbp_round_trip() -> Result<(bool, String)> {
    let tx = TxConfig::default();
    let (c, p) = (tx.constellation()?, tx.pulse()?);
    let power = 10f64.powf(0.4) * 1e-3;
    let mut cfg = LinkConfig::standard(3, 80.0, tx.symbol_rate)
        .noiseless()
        .segmented_for_power(power, tx.symbol_rate, 1e-4)?;
    cfg.inline_filters = false;
    cfg.receiver_filter = false;
    let x = c.random_symbols(256, &mut ChaCha8Rng::seed_from_u64(105));
    let link = Link::new(&cfg, 256 * tx.samples_per_symbol, tx.sample_rate())?;
    let t = link.transmit(&x, &c, &p, power, tx.symbol_rate, 0)?;
    let z = dbp_receive(&t.received, &link, &p)?;
    let err = max_abs_diff(&z, &x.amplitudes(&c));
    let ens = sdbp_backward(&t.received, &link, 2, 7)?;
    let dbp_wave = {
        let mut u = t.received.samples.clone();
        link.backpropagate(&mut u);
        u
    };
    let spread = ens.particles().iter().map(|q| max_abs_diff(q, &dbp_wave)).fold(0.0, f64::max);
    Ok((
        err < 1e-6 && spread == 0.0,
        format!("3 x 80 km at 4 dBm: max symbol error {err:.1e}, noiseless SDBP deviation {spread:.1e}"),
    ))
}

fn awgn_surrogate() -> Result<(bool, String)> {
    let cfg = ExperimentConfig::from_toml_str(
        r#"
        [link]
        num_spans = 1
        span_length_km = 1.0
        dispersion_ps_nm_km = 0.0
        gamma_per_w_km = 0.0
        alpha_db_per_km = 0.0
        fbg_insertion_loss_db = 20.0
        [receivers]
        enabled = ["dbp-iidg"]
        [run]
        symbols_per_run = 4096
        mc_runs = 4
        master_seed = 106
        [sweep]
        snr_db = [10.0]
        "#,
    )?;
    let setup = cfg.setup(&cfg.grid()[0])?;
    let sim = PointSimulation::new(&setup, cfg.run.symbols_per_run)?;
    let cap = constrained_capacity_qam(&sim.constellation, setup.snr_proxy())?;
    let r = run_point(&cfg, &setup)?;
    let v = &r.per_run[&Receiver::DbpIidg];
    let air = v.iter().sum::<f64>() / v.len() as f64;
    Ok((
        (air - cap).abs() < 0.05,
        format!("iidG AIR {air:.4} vs constrained capacity {cap:.4} at 10 dB"),
    ))
}

/// Runs the quick oracle checks used by `fibair selftest`.
pub fn selftest() -> Vec<SelfTestCheck> {
    vec![
        check("dmc-bounds", dmc_bounds),
        check("qam-capacity", qam_capacity),
        check("pulse-back-to-back", back_to_back),
        check("lossless-energy", lossless_energy),
        check("dbp-round-trip", dbp_round_trip),
        check("awgn-surrogate", awgn_surrogate),
    ]
}
