use std::collections::BTreeMap;
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PointSetup, Receiver};
use crate::channel::{Link, Transmission};
use crate::dbp::{air_dbp, dbp_receive, train_gaussian_aux, AuxVariant, GaussianAuxChannel, TrainingOptions};
use crate::sdbp::{air_abc, gmp_posterior_with_diagnostics, sbs_posterior, sdbp_backward};
use crate::seeds::{derive, run_seed, Role};
use crate::sigproc::{evaluation_range, Constellation, PulseShape, SymbolSequence, TxConfig};
use crate::{Result, C64};

/// Regularization actually applied by GMP, aggregated over a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmpSummary {
    pub window_symbols: usize,
    pub dimension: usize,
    pub mean_shrinkage: f64,
    pub max_shrinkage: f64,
    pub max_ridge: f64,
}

/// Everything measured at one grid point.
#[derive(Debug, Clone)]
pub struct PointResult {
    /// One AIR per Monte-Carlo block, bits per symbol.
    pub per_run: BTreeMap<Receiver, Vec<f64>>,
    pub aux_channels: Vec<GaussianAuxChannel>,
    pub gmp: Option<GmpSummary>,
    pub training_runs: usize,
    pub segments_per_span: usize,
}

/// A grid point made concrete: modem, link and the shared evaluation range.
pub struct PointSimulation {
    pub tx: TxConfig,
    pub constellation: Constellation,
    pub pulse: PulseShape,
    pub link: Link,
    pub prior: Vec<f64>,
    pub power_w: f64,
    pub symbols: usize,
    pub range: Range<usize>,
}

impl PointSimulation {
    pub fn new(setup: &PointSetup, symbols: usize) -> Result<Self> {
        let tx = setup.tx.clone();
        let constellation = tx.constellation()?;
        let pulse = tx.pulse()?;
        let link = Link::new(&setup.link, symbols * tx.samples_per_symbol, tx.sample_rate())?;
        let range = evaluation_range(symbols, &pulse);
        Ok(PointSimulation {
            prior: constellation.uniform_prior(),
            tx,
            constellation,
            pulse,
            link,
            power_w: setup.power_w,
            symbols,
            range,
        })
    }

    /// Draws symbols from `derive(seed, [0])` and channel noise from
    /// `derive(seed, [1])`.
    pub fn transmit(&self, seed: u64) -> Result<(SymbolSequence, Transmission)> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[0]));
        let x = self.constellation.random_symbols(self.symbols, &mut rng);
        let t = self.link.transmit(
            &x,
            &self.constellation,
            &self.pulse,
            self.power_w,
            self.tx.symbol_rate,
            derive(seed, &[1]),
        )?;
        Ok((x, t))
    }

    /// DBP outputs and labels over the evaluation range of one block.
    pub fn dbp_block(&self, seed: u64) -> Result<(Vec<C64>, Vec<usize>)> {
        let (x, t) = self.transmit(seed)?;
        let z = dbp_receive(&t.received, &self.link, &self.pulse)?;
        Ok((z[self.range.clone()].to_vec(), x.indices()[self.range.clone()].to_vec()))
    }
}

/// Expected training samples per constellation point, in units of the
/// minimum count. Keeps the estimation loss of the fitted Gaussians well
/// below the Monte-Carlo error.
pub const TRAINING_OVERSAMPLING: usize = 20;

/// Training blocks needed so that every point is expected to be observed
/// `TRAINING_OVERSAMPLING * min_count` times.
pub fn auto_training_runs(min_count: usize, alphabet: usize, eval_len: usize) -> usize {
    (TRAINING_OVERSAMPLING * min_count * alphabet).div_ceil(eval_len.max(1)).max(2)
}

fn train(cfg: &ExperimentConfig, sim: &PointSimulation, point: u64, runs: usize) -> Result<Vec<GaussianAuxChannel>> {
    let blocks: Vec<(Vec<C64>, Vec<usize>)> = (0..runs as u64)
        .into_par_iter()
        .map(|t| sim.dbp_block(run_seed(cfg.run.master_seed, point, t, Role::Training)))
        .collect::<Result<_>>()?;
    let (z, labels): (Vec<C64>, Vec<usize>) = blocks
        .into_iter()
        .flat_map(|(z, l)| z.into_iter().zip(l))
        .unzip();
    let opts = TrainingOptions {
        min_count: cfg.receivers.min_training_count,
        pooled_variance: cfg.receivers.pooled_iidg_variance,
    };
    let mut out = Vec::new();
    for (r, v) in [(Receiver::DbpIidg, AuxVariant::Iidg), (Receiver::DbpCg, AuxVariant::Cg)] {
        if cfg.receiver_enabled(r) {
            out.push(train_gaussian_aux(&z, &labels, sim.constellation.len(), v, &opts)?);
        }
    }
    Ok(out)
}

struct RunOutcome {
    airs: Vec<(Receiver, f64)>,
    gmp: Option<(f64, f64, f64, usize, usize)>,
}

fn evaluate_run(
    cfg: &ExperimentConfig,
    sim: &PointSimulation,
    aux: &[GaussianAuxChannel],
    point: u64,
    run: u64,
) -> Result<RunOutcome> {
    let seed = run_seed(cfg.run.master_seed, point, run, Role::Channel);
    let (x, t) = sim.transmit(seed)?;
    let mut airs = Vec::new();
    if !aux.is_empty() {
        let z = dbp_receive(&t.received, &sim.link, &sim.pulse)?;
        for a in aux {
            let r = match a.variant() {
                AuxVariant::Iidg => Receiver::DbpIidg,
                AuxVariant::Cg => Receiver::DbpCg,
            };
            airs.push((r, air_dbp(&z, &x, a, &sim.prior, sim.range.clone())?));
        }
    }
    let mut gmp = None;
    let want_sbs = cfg.receiver_enabled(Receiver::SbsSdbp);
    let want_gmp = cfg.receiver_enabled(Receiver::GmpSdbp);
    if want_sbs || want_gmp {
        let sdbp_seed = run_seed(cfg.run.master_seed, point, run, Role::Sdbp);
        let ens = sdbp_backward(&t.received, &sim.link, cfg.run.particles, sdbp_seed)?;
        let (c, p) = (&sim.constellation, &sim.pulse);
        if want_sbs {
            let post = sbs_posterior(&ens, p, c, &sim.prior)?;
            airs.push((Receiver::SbsSdbp, air_abc(&post, &x, &sim.prior, sim.range.clone())?));
        }
        if want_gmp {
            let (post, d) =
                gmp_posterior_with_diagnostics(&ens, p, c, &sim.prior, cfg.receivers.gmp_window_symbols)?;
            airs.push((Receiver::GmpSdbp, air_abc(&post, &x, &sim.prior, sim.range.clone())?));
            gmp = Some((d.mean_shrinkage, d.max_shrinkage, d.max_ridge, d.window_symbols, d.dimension));
        }
    }
    Ok(RunOutcome { airs, gmp })
}

/// Trains the DBP auxiliary channels and evaluates every enabled receiver on
/// `mc_runs` independent blocks. All randomness derives from the master seed
/// and the point index.
pub fn run_point(cfg: &ExperimentConfig, setup: &PointSetup) -> Result<PointResult> {
    let sim = PointSimulation::new(setup, cfg.run.symbols_per_run)?;
    let point = setup.point.index as u64;
    let needs_aux = cfg.receiver_enabled(Receiver::DbpIidg) || cfg.receiver_enabled(Receiver::DbpCg);
    let training_runs = if needs_aux {
        cfg.run.training_runs.unwrap_or_else(|| {
            auto_training_runs(cfg.receivers.min_training_count, sim.constellation.len(), sim.range.len())
        })
    } else {
        0
    };
    let aux = if needs_aux {
        train(cfg, &sim, point, training_runs)?
    } else {
        Vec::new()
    };
    let any_sdbp = cfg.receivers.enabled.iter().any(|r| r.is_sdbp());
    let runs = 0..cfg.run.mc_runs as u64;
    // SDBP parallelizes over particles; nesting run-level parallelism on top
    // would hold several ensembles in memory at once
    let outcomes: Vec<RunOutcome> = if any_sdbp {
        runs.map(|r| evaluate_run(cfg, &sim, &aux, point, r)).collect::<Result<_>>()?
    } else {
        runs.into_par_iter()
            .map(|r| evaluate_run(cfg, &sim, &aux, point, r))
            .collect::<Result<_>>()?
    };
    let mut per_run: BTreeMap<Receiver, Vec<f64>> = BTreeMap::new();
    let mut gmp: Option<GmpSummary> = None;
    for o in &outcomes {
        for &(r, v) in &o.airs {
            per_run.entry(r).or_default().push(v);
        }
        if let Some((mean, max, ridge, w, d)) = o.gmp {
            let g = gmp.get_or_insert(GmpSummary {
                window_symbols: w,
                dimension: d,
                mean_shrinkage: 0.0,
                max_shrinkage: 0.0,
                max_ridge: 0.0,
            });
            g.mean_shrinkage += mean / outcomes.len() as f64;
            g.max_shrinkage = g.max_shrinkage.max(max);
            g.max_ridge = g.max_ridge.max(ridge);
        }
    }
    Ok(PointResult {
        per_run,
        aux_channels: aux,
        gmp,
        training_runs,
        segments_per_span: sim.link.segments_per_span(),
    })
}
