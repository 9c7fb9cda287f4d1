//! Experiment runner: TOML configs, sweep grids, per-point simulation,
//! append-only run records and the derived tables.
//!
//! Every grid point is independent and fully determined by the config and
//! its index, so an interrupted sweep resumes by skipping points that
//! already have a successful record.

mod config;
mod records;
mod report;
mod runner;
mod selftest;

pub use config::{
    dbm_to_watt, watt_to_dbm, ExperimentConfig, GridPoint, LinkSection, OutputSection, PointSetup, Receiver,
    ReceiverSection, RunSection, SweepAxis, SweepSection, TxSection,
};
pub use records::{RecordStore, RunRecord};
pub use report::{emit_plot_data, max_air_gain, peak_air, GainRow, PeakAir, ResultRow, ResultsTable, TableMeta};
pub use runner::{auto_training_runs, TRAINING_OVERSAMPLING, run_point, GmpSummary, PointResult, PointSimulation};
pub use selftest::{selftest, SelfTestCheck};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::Result;

/// What a run or report produced.
#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub config_hash: String,
    pub records: BTreeMap<usize, RunRecord>,
    pub table: ResultsTable,
    pub files: Vec<PathBuf>,
    /// Points simulated by this invocation.
    pub computed: usize,
    /// Points taken from earlier records.
    pub reused: usize,
}

impl ExperimentSummary {
    pub fn failed(&self) -> usize {
        self.table.failed_points()
    }

    pub fn missing(&self, cfg: &ExperimentConfig) -> usize {
        cfg.grid().len().saturating_sub(self.records.len())
    }
}

fn simulate(cfg: &ExperimentConfig, point: &GridPoint, hash: &str) -> RunRecord {
    let start = Instant::now();
    let mut record = RunRecord {
        config_hash: hash.to_string(),
        master_seed: cfg.run.master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        point_index: point.index,
        axis_value: point.axis_value,
        power_dbm: point.power_dbm,
        snr_proxy_db: f64::NAN,
        segments_per_span: 0,
        training_runs: 0,
        per_run: BTreeMap::new(),
        aux_channels: Vec::new(),
        gmp: None,
        elapsed_s: 0.0,
        error: None,
    };
    let outcome = cfg.setup(point).and_then(|setup| {
        record.snr_proxy_db = 10.0 * setup.snr_proxy().log10();
        run_point(cfg, &setup)
    });
    match outcome {
        Ok(r) => {
            record.segments_per_span = r.segments_per_span;
            record.training_runs = r.training_runs;
            record.per_run = r.per_run;
            record.aux_channels = r.aux_channels;
            record.gmp = r.gmp;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record.elapsed_s = start.elapsed().as_secs_f64();
    record
}

fn finish(
    cfg: &ExperimentConfig,
    store: &RecordStore,
    dir: &Path,
    computed: usize,
    reused: usize,
) -> Result<ExperimentSummary> {
    let records = store.latest()?;
    let table = ResultsTable::from_records(cfg, &records)?;
    let files = emit_plot_data(&table, dir)?;
    Ok(ExperimentSummary {
        config_hash: cfg.hash(),
        records,
        table,
        files,
        computed,
        reused,
    })
}

/// Simulates every grid point without a successful record, appending one
/// record per point, then writes the tables. `progress` sees each new record.
pub fn run_experiment(cfg: &ExperimentConfig, mut progress: impl FnMut(&RunRecord)) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let hash = cfg.hash();
    let dir = cfg.output.dir.clone();
    let store = RecordStore::new(&dir, &hash);
    let done = store.latest()?;
    let mut computed = 0;
    let mut reused = 0;
    for point in cfg.grid() {
        if done.get(&point.index).is_some_and(|r| r.error.is_none()) {
            reused += 1;
            continue;
        }
        let record = simulate(cfg, &point, &hash);
        store.append(&record)?;
        progress(&record);
        computed += 1;
    }
    finish(cfg, &store, &dir, computed, reused)
}

/// Regenerates the tables from existing records without simulating.
pub fn report(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    let store = RecordStore::new(&dir, &cfg.hash());
    let n = store.latest()?.len();
    finish(cfg, &store, &dir, 0, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path) -> ExperimentConfig {
        let mut c = ExperimentConfig::from_toml_str(
            r#"
            name = "tiny"
            [link]
            num_spans = 1
            span_length_km = 50.0
            [receivers]
            enabled = ["dbp-iidg", "dbp-cg"]
            min_training_count = 5
            [run]
            symbols_per_run = 256
            mc_runs = 2
            training_runs = 10
            [sweep]
            power_dbm = [-2.0, 2.0]
            "#,
        )
        .unwrap();
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn run_resume_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(dir.path());
        let mut seen = 0;
        let first = run_experiment(&c, |_| seen += 1).unwrap();
        assert_eq!((first.computed, first.reused, seen), (2, 0, 2));
        assert_eq!(first.failed(), 0);
        let tables: Vec<String> = first.files.iter().map(|f| std::fs::read_to_string(f).unwrap()).collect();
        let again = run_experiment(&c, |_| panic!("nothing to do")).unwrap();
        assert_eq!((again.computed, again.reused), (0, 2));
        let rep = report(&c).unwrap();
        for (f, t) in rep.files.iter().zip(&tables) {
            assert_eq!(&std::fs::read_to_string(f).unwrap(), t);
        }
        assert!(tables[0].contains("dbp-cg_air"));
        assert_eq!(rep.missing(&c), 0);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path());
        // too little training data for every point to be observed
        c.run.training_runs = Some(1);
        c.receivers.min_training_count = 1000;
        let s = run_experiment(&c, |_| {}).unwrap();
        assert_eq!(s.failed(), 2);
        assert!(s.records[&0].error.as_ref().unwrap().contains("insufficient training"));
        let body = std::fs::read_to_string(&s.files[0]).unwrap();
        assert!(body.lines().last().unwrap().contains("insufficient training"));
    }
}
