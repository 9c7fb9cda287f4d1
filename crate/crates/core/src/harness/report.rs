use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, Receiver, SweepAxis};
use super::records::RunRecord;
use crate::infotheory::{awgn_capacity, constrained_capacity_qam, mc_air, AirEstimate};
use crate::sigproc::Constellation;
use crate::Result;

/// Header metadata written at the top of every table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableMeta {
    pub name: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
    pub axis: SweepAxis,
}

impl TableMeta {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        TableMeta {
            name: cfg.name.clone(),
            config_hash: cfg.hash(),
            master_seed: cfg.run.master_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            axis: cfg.sweep.axis,
        }
    }

    fn header(&self, what: &str) -> String {
        format!(
            "# fibair {}\n# table: {what}\n# config: {}\n# config_hash: {}\n# master_seed: {}\n# axis: {}\n",
            self.version,
            self.name,
            self.config_hash,
            self.master_seed,
            self.axis.name()
        )
    }
}

/// One grid point as reported.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub point_index: usize,
    pub axis_value: Option<f64>,
    pub power_dbm: f64,
    pub snr_proxy_db: f64,
    pub awgn_capacity: f64,
    pub qam_capacity: f64,
    pub estimates: BTreeMap<Receiver, AirEstimate>,
    pub segments_per_span: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ResultsTable {
    pub meta: TableMeta,
    pub receivers: Vec<Receiver>,
    pub rows: Vec<ResultRow>,
}

/// Peak of one receiver's AIR-versus-power curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakAir {
    pub power_dbm: f64,
    pub air: f64,
    pub standard_error: f64,
}

/// Gain of a receiver's peak AIR over a baseline's peak AIR.
#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub receiver: Receiver,
    pub baseline: Receiver,
    pub peak: PeakAir,
    pub baseline_peak: PeakAir,
    pub gain: f64,
}

/// Maximum of `(power_dbm, estimate)` pairs; ties keep the lowest power.
pub fn peak_air(curve: &[(f64, AirEstimate)]) -> Option<PeakAir> {
    let mut best: Option<PeakAir> = None;
    for (p, e) in curve {
        if best.is_none_or(|b| e.value_bits_per_symbol > b.air) {
            best = Some(PeakAir {
                power_dbm: *p,
                air: e.value_bits_per_symbol,
                standard_error: e.standard_error,
            });
        }
    }
    best
}

/// For every receiver and each DBP baseline present in `curves`, the
/// difference between the two peak AIRs (maximized over power separately).
pub fn max_air_gain(curves: &BTreeMap<Receiver, Vec<(f64, AirEstimate)>>) -> Vec<GainRow> {
    let mut out = Vec::new();
    for baseline in [Receiver::DbpIidg, Receiver::DbpCg] {
        let Some(base) = curves.get(&baseline).and_then(|c| peak_air(c)) else {
            continue;
        };
        for (&r, curve) in curves {
            if r == baseline {
                continue;
            }
            if let Some(peak) = peak_air(curve) {
                out.push(GainRow {
                    receiver: r,
                    baseline,
                    peak,
                    baseline_peak: base,
                    gain: peak.air - base.air,
                });
            }
        }
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v}"))
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.6}")
    }
}

impl ResultsTable {
    /// Builds the table from records, in grid order. Points without a record
    /// are omitted.
    pub fn from_records(cfg: &ExperimentConfig, records: &BTreeMap<usize, RunRecord>) -> Result<Self> {
        let c = Constellation::square_qam(cfg.tx.constellation_size)?;
        let receivers = cfg.receivers.enabled.iter().copied().collect::<std::collections::BTreeSet<_>>();
        let mut rows = Vec::new();
        for r in records.values() {
            let snr = 10f64.powf(r.snr_proxy_db / 10.0);
            let mut estimates = BTreeMap::new();
            if r.error.is_none() {
                for (rx, v) in &r.per_run {
                    if receivers.contains(rx) {
                        estimates.insert(*rx, mc_air(v)?);
                    }
                }
            }
            rows.push(ResultRow {
                point_index: r.point_index,
                axis_value: r.axis_value,
                power_dbm: r.power_dbm,
                snr_proxy_db: r.snr_proxy_db,
                awgn_capacity: awgn_capacity(snr),
                qam_capacity: constrained_capacity_qam(&c, snr)?,
                estimates,
                segments_per_span: r.segments_per_span,
                error: r.error.clone(),
            });
        }
        Ok(ResultsTable {
            meta: TableMeta::for_config(cfg),
            receivers: receivers.into_iter().collect(),
            rows,
        })
    }

    /// Distinct axis values in row order (`None` for unswept configs).
    pub fn axis_values(&self) -> Vec<Option<f64>> {
        let mut out: Vec<Option<f64>> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.axis_value) {
                out.push(r.axis_value);
            }
        }
        out
    }

    /// AIR-versus-power curves at one axis value.
    pub fn curves(&self, axis_value: Option<f64>) -> BTreeMap<Receiver, Vec<(f64, AirEstimate)>> {
        let mut out: BTreeMap<Receiver, Vec<(f64, AirEstimate)>> = BTreeMap::new();
        for row in self.rows.iter().filter(|r| r.axis_value == axis_value) {
            for (rx, e) in &row.estimates {
                out.entry(*rx).or_default().push((row.power_dbm, e.clone()));
            }
        }
        out
    }

    pub fn failed_points(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn results_tsv(&self) -> String {
        let mut s = self.meta.header("results");
        s.push_str("point\taxis_value\tpower_dbm\tsnr_proxy_db\tawgn_capacity\tqam_capacity\tsegments_per_span");
        for r in &self.receivers {
            let _ = write!(s, "\t{r}_air\t{r}_se");
        }
        s.push_str("\terror\n");
        for row in &self.rows {
            let _ = write!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                row.point_index,
                fmt_opt(row.axis_value),
                fmt_f(row.power_dbm),
                fmt_f(row.snr_proxy_db),
                fmt_f(row.awgn_capacity),
                fmt_f(row.qam_capacity),
                row.segments_per_span
            );
            for r in &self.receivers {
                match row.estimates.get(r) {
                    Some(e) => {
                        let _ = write!(s, "\t{}\t{}", fmt_f(e.value_bits_per_symbol), fmt_f(e.standard_error));
                    }
                    None => s.push_str("\t-\t-"),
                }
            }
            let err = row.error.as_deref().unwrap_or("-").replace(['\t', '\n'], " ");
            let _ = writeln!(s, "\t{err}");
        }
        s
    }

    /// Long-format AIR curves: one line per (axis value, receiver, power).
    pub fn air_vs_power_tsv(&self) -> String {
        let mut s = self.meta.header("air_vs_power");
        s.push_str("axis_value\treceiver\tpower_dbm\tair\tse\n");
        for a in self.axis_values() {
            for (rx, curve) in self.curves(a) {
                for (p, e) in curve {
                    let _ = writeln!(
                        s,
                        "{}\t{rx}\t{}\t{}\t{}",
                        fmt_opt(a),
                        fmt_f(p),
                        fmt_f(e.value_bits_per_symbol),
                        fmt_f(e.standard_error)
                    );
                }
            }
        }
        s
    }

    /// Peak-AIR gains over each DBP baseline, per axis value.
    pub fn gain_tsv(&self) -> String {
        let mut s = self.meta.header("max_air_gain");
        s.push_str(
            "axis_value\treceiver\tbaseline\tpeak_power_dbm\tpeak_air\tpeak_se\tbaseline_peak_power_dbm\tbaseline_peak_air\tbaseline_peak_se\tgain\n",
        );
        for a in self.axis_values() {
            for g in max_air_gain(&self.curves(a)) {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    fmt_opt(a),
                    g.receiver,
                    g.baseline,
                    fmt_f(g.peak.power_dbm),
                    fmt_f(g.peak.air),
                    fmt_f(g.peak.standard_error),
                    fmt_f(g.baseline_peak.power_dbm),
                    fmt_f(g.baseline_peak.air),
                    fmt_f(g.baseline_peak.standard_error),
                    fmt_f(g.gain)
                );
            }
        }
        s
    }
}

fn gain_file_name(axis: SweepAxis) -> String {
    match axis {
        SweepAxis::None => "gain.tsv".to_string(),
        a => format!("gain_vs_{}.tsv", a.name()),
    }
}

/// Writes `results.tsv`, `air_vs_power.tsv` and the gain table into `dir`.
/// An empty table still produces header-only files.
pub fn emit_plot_data(table: &ResultsTable, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files = [
        ("results.tsv".to_string(), table.results_tsv()),
        ("air_vs_power.tsv".to_string(), table.air_vs_power_tsv()),
        (gain_file_name(table.meta.axis), table.gain_tsv()),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(v: f64) -> AirEstimate {
        mc_air(&[v - 0.01, v + 0.01]).unwrap()
    }

    #[test]
    fn gains_use_separate_optima() {
        let mut curves = BTreeMap::new();
        curves.insert(Receiver::DbpIidg, vec![(0.0, est(4.0)), (2.0, est(4.2)), (4.0, est(3.9))]);
        curves.insert(Receiver::DbpCg, vec![(0.0, est(4.1)), (2.0, est(4.3)), (4.0, est(4.0))]);
        curves.insert(Receiver::GmpSdbp, vec![(0.0, est(4.1)), (2.0, est(4.4)), (4.0, est(4.6))]);
        let g = max_air_gain(&curves);
        assert_eq!(g.len(), 4);
        let gmp_over_cg = g
            .iter()
            .find(|r| r.receiver == Receiver::GmpSdbp && r.baseline == Receiver::DbpCg)
            .unwrap();
        assert!((gmp_over_cg.gain - 0.3).abs() < 1e-12);
        assert_eq!(gmp_over_cg.peak.power_dbm, 4.0);
        assert_eq!(gmp_over_cg.baseline_peak.power_dbm, 2.0);
        let cg_over_iidg = g
            .iter()
            .find(|r| r.receiver == Receiver::DbpCg && r.baseline == Receiver::DbpIidg)
            .unwrap();
        assert!((cg_over_iidg.gain - 0.1).abs() < 1e-12);
        assert!(max_air_gain(&BTreeMap::new()).is_empty());
    }

    #[test]
    fn empty_tables_are_header_only() {
        let cfg = ExperimentConfig::from_toml_str("name = \"t\"\n[sweep]\npower_dbm = [0.0]\n").unwrap();
        let t = ResultsTable::from_records(&cfg, &BTreeMap::new()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(&t, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        for f in files {
            let body = std::fs::read_to_string(f).unwrap();
            let data: Vec<&str> = body.lines().filter(|l| !l.starts_with('#')).collect();
            assert_eq!(data.len(), 1, "{body}");
            assert!(body.contains(&cfg.hash()));
        }
    }
}
