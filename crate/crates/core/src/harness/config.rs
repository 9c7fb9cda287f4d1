use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{LinkConfig, SpanConfig};
use crate::sigproc::TxConfig;
use crate::{Error, Result};

fn config_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        location: location.into(),
        message: message.into(),
    }
}

/// The four receivers compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Receiver {
    #[serde(rename = "dbp-iidg")]
    DbpIidg,
    #[serde(rename = "dbp-cg")]
    DbpCg,
    #[serde(rename = "sbs-sdbp")]
    SbsSdbp,
    #[serde(rename = "gmp-sdbp")]
    GmpSdbp,
}

impl Receiver {
    pub const ALL: [Receiver; 4] = [Receiver::DbpIidg, Receiver::DbpCg, Receiver::SbsSdbp, Receiver::GmpSdbp];

    pub fn name(self) -> &'static str {
        match self {
            Receiver::DbpIidg => "dbp-iidg",
            Receiver::DbpCg => "dbp-cg",
            Receiver::SbsSdbp => "sbs-sdbp",
            Receiver::GmpSdbp => "gmp-sdbp",
        }
    }

    pub fn is_sdbp(self) -> bool {
        matches!(self, Receiver::SbsSdbp | Receiver::GmpSdbp)
    }
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Receiver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Receiver::ALL
            .into_iter()
            .find(|r| r.name() == s.trim())
            .ok_or_else(|| config_error("receivers", format!("unknown receiver `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub num_spans: usize,
    pub span_length_km: f64,
    pub dispersion_ps_nm_km: f64,
    pub gamma_per_w_km: f64,
    pub alpha_db_per_km: f64,
    pub noise_figure_db: f64,
    /// Switches amplifier noise off regardless of `noise_figure_db`.
    pub noiseless: bool,
    pub fbg_insertion_loss_db: f64,
    pub dispersion_managed: bool,
    pub inline_filters: bool,
    pub receiver_filter: bool,
    /// Most fixed-point passes restoring the out-of-band field removed by each
    /// in-line filter during backpropagation.
    pub filter_inverse_iterations: usize,
    /// Two-sided filter bandwidth in units of the symbol rate.
    pub filter_bandwidth_symbol_rates: f64,
    pub wavelength_nm: f64,
    pub step_epsilon: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection {
            num_spans: 30,
            span_length_km: 120.0,
            dispersion_ps_nm_km: 16.0,
            gamma_per_w_km: 1.3,
            alpha_db_per_km: 0.2,
            noise_figure_db: 5.5,
            noiseless: false,
            fbg_insertion_loss_db: 3.0,
            dispersion_managed: true,
            inline_filters: true,
            receiver_filter: true,
            filter_inverse_iterations: 8,
            filter_bandwidth_symbol_rates: 2.0,
            wavelength_nm: 1550.0,
            step_epsilon: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxSection {
    pub symbol_rate_gbd: f64,
    pub samples_per_symbol: usize,
    pub constellation_size: usize,
    pub rolloff: f64,
    pub span_symbols: usize,
    pub nyquist_refine: bool,
}

impl Default for TxSection {
    fn default() -> Self {
        TxSection {
            symbol_rate_gbd: 14.0,
            samples_per_symbol: 4,
            constellation_size: 64,
            rolloff: 0.25,
            span_symbols: 16,
            nyquist_refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverSection {
    pub enabled: Vec<Receiver>,
    pub gmp_window_symbols: usize,
    pub min_training_count: usize,
    pub pooled_iidg_variance: bool,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        ReceiverSection {
            enabled: Receiver::ALL.to_vec(),
            gmp_window_symbols: 16,
            min_training_count: 50,
            pooled_iidg_variance: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Symbols per Monte-Carlo block, K.
    pub symbols_per_run: usize,
    /// Evaluation blocks per grid point, N_MC.
    pub mc_runs: usize,
    /// SDBP ensemble size, N_p.
    pub particles: usize,
    /// Training blocks for the DBP auxiliary channels; derived from the
    /// minimum per-point count when absent.
    pub training_runs: Option<usize>,
    pub master_seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            symbols_per_run: 4096,
            mc_runs: 16,
            particles: 500,
            training_runs: None,
            master_seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    None,
    Spans,
    SpanLengthKm,
    SymbolRateGbd,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::Spans => "spans",
            SweepAxis::SpanLengthKm => "span_length_km",
            SweepAxis::SymbolRateGbd => "symbol_rate_gbd",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_axis")]
    pub axis: SweepAxis,
    /// Outer grid along `axis`; empty for `none`.
    #[serde(default)]
    pub values: Vec<f64>,
    /// Launch powers per span, dBm. Exclusive with `snr_db`.
    #[serde(default)]
    pub power_dbm: Vec<f64>,
    /// Launch powers given through the linear-link SNR, dB.
    #[serde(default)]
    pub snr_db: Vec<f64>,
}

fn default_axis() -> SweepAxis {
    SweepAxis::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("results"),
        }
    }
}

/// A complete experiment description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub tx: TxSection,
    #[serde(default)]
    pub receivers: ReceiverSection,
    #[serde(default)]
    pub run: RunSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// One point of the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub axis_value: Option<f64>,
    pub power_dbm: f64,
}

/// Link and transmitter for one grid point, segmented for its power.
#[derive(Debug, Clone)]
pub struct PointSetup {
    pub point: GridPoint,
    pub tx: TxConfig,
    pub link: LinkConfig,
    pub power_w: f64,
}

impl PointSetup {
    /// Linear-link SNR at the matched-filter output.
    pub fn snr_proxy(&self) -> f64 {
        self.link.snr_proxy(self.power_w, self.tx.symbol_rate)
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl ExperimentConfig {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| {
            let location = match e.span() {
                Some(span) => {
                    let (l, c) = line_col(src, span.start);
                    format!("line {l}, column {c}")
                }
                None => "document".to_string(),
            };
            config_error(location, e.message().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| config_error(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&src)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// Small-scale preset: K = 1024, N_MC = 8, N_p = 100.
    pub fn apply_desk_preset(&mut self) {
        self.run.symbols_per_run = 1024;
        self.run.mc_runs = 8;
        self.run.particles = 100;
    }

    /// Hex SHA-256 of the canonical JSON form. The output directory does not
    /// take part: moving results elsewhere does not change their identity.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn receiver_enabled(&self, r: Receiver) -> bool {
        self.receivers.enabled.contains(&r)
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.link;
        let positive = |loc: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_error(loc, format!("must be positive and finite, got {v}")))
            }
        };
        if l.num_spans == 0 {
            return Err(config_error("link.num_spans", "must be at least 1"));
        }
        positive("link.span_length_km", l.span_length_km)?;
        positive("link.wavelength_nm", l.wavelength_nm)?;
        positive("link.step_epsilon", l.step_epsilon)?;
        positive("link.filter_bandwidth_symbol_rates", l.filter_bandwidth_symbol_rates)?;
        for (loc, v) in [
            ("link.dispersion_ps_nm_km", l.dispersion_ps_nm_km),
            ("link.gamma_per_w_km", l.gamma_per_w_km),
            ("link.alpha_db_per_km", l.alpha_db_per_km),
            ("link.fbg_insertion_loss_db", l.fbg_insertion_loss_db),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_error(loc, format!("must be non-negative, got {v}")));
            }
        }
        if !l.noiseless && !(l.noise_figure_db >= 3.0 && l.noise_figure_db.is_finite()) {
            return Err(config_error(
                "link.noise_figure_db",
                format!("{} dB is below the 3 dB quantum limit", l.noise_figure_db),
            ));
        }
        positive("tx.symbol_rate_gbd", self.tx.symbol_rate_gbd)?;
        self.tx_config(self.tx.symbol_rate_gbd * 1e9)
            .validate()
            .map_err(|e| config_error("tx", e.to_string()))?;
        if self.receivers.enabled.is_empty() {
            return Err(config_error("receivers.enabled", "no receiver selected"));
        }
        if self.receivers.gmp_window_symbols < self.tx.span_symbols {
            return Err(config_error(
                "receivers.gmp_window_symbols",
                "must be at least the pulse span",
            ));
        }
        let r = &self.run;
        if r.symbols_per_run <= self.tx.span_symbols {
            return Err(config_error("run.symbols_per_run", "must exceed the pulse span"));
        }
        if r.mc_runs == 0 {
            return Err(config_error("run.mc_runs", "must be positive"));
        }
        if r.particles < 2 && self.receivers.enabled.iter().any(|r| r.is_sdbp()) {
            return Err(config_error("run.particles", "SDBP receivers need at least 2 particles"));
        }
        if r.training_runs == Some(0) {
            return Err(config_error("run.training_runs", "must be positive"));
        }
        let s = &self.sweep;
        match (s.power_dbm.is_empty(), s.snr_db.is_empty()) {
            (true, true) => return Err(config_error("sweep.power_dbm", "power grid is empty")),
            (false, false) => {
                return Err(config_error("sweep.snr_db", "give either power_dbm or snr_db, not both"))
            }
            _ => {}
        }
        if s.power_dbm.iter().chain(&s.snr_db).any(|v| !v.is_finite()) {
            return Err(config_error("sweep", "grid values must be finite"));
        }
        match s.axis {
            SweepAxis::None if !s.values.is_empty() => {
                return Err(config_error("sweep.values", "axis `none` takes no values"))
            }
            SweepAxis::None => {}
            _ if s.values.is_empty() => return Err(config_error("sweep.values", "axis grid is empty")),
            SweepAxis::Spans => {
                if s.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
                    return Err(config_error("sweep.values", "span counts must be positive integers"));
                }
            }
            _ => {
                if s.values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(config_error("sweep.values", "values must be positive"));
                }
            }
        }
        Ok(())
    }

    fn tx_config(&self, symbol_rate: f64) -> TxConfig {
        TxConfig {
            symbol_rate,
            samples_per_symbol: self.tx.samples_per_symbol,
            constellation_size: self.tx.constellation_size,
            rolloff: self.tx.rolloff,
            span_symbols: self.tx.span_symbols,
            nyquist_refine: self.tx.nyquist_refine,
        }
    }

    /// Transmitter and unsegmented link at an axis value.
    pub fn link_at(&self, axis_value: Option<f64>) -> (TxConfig, LinkConfig) {
        let l = &self.link;
        let mut spans = l.num_spans;
        let mut length = l.span_length_km;
        let mut rate = self.tx.symbol_rate_gbd;
        if let Some(v) = axis_value {
            match self.sweep.axis {
                SweepAxis::Spans => spans = v as usize,
                SweepAxis::SpanLengthKm => length = v,
                SweepAxis::SymbolRateGbd => rate = v,
                SweepAxis::None => {}
            }
        }
        let tx = self.tx_config(rate * 1e9);
        let link = LinkConfig {
            num_spans: spans,
            span: SpanConfig::from_units(length, l.dispersion_ps_nm_km, l.gamma_per_w_km, l.alpha_db_per_km),
            noise_figure_db: if l.noiseless { f64::NEG_INFINITY } else { l.noise_figure_db },
            fbg_insertion_loss_db: l.fbg_insertion_loss_db,
            bandpass_bandwidth_hz: l.filter_bandwidth_symbol_rates * tx.symbol_rate,
            wavelength_m: l.wavelength_nm * 1e-9,
            dispersion_managed: l.dispersion_managed,
            inline_filters: l.inline_filters,
            receiver_filter: l.receiver_filter,
            filter_inverse_iterations: l.filter_inverse_iterations,
        };
        (tx, link)
    }

    /// All grid points, axis-major.
    pub fn grid(&self) -> Vec<GridPoint> {
        let axis: Vec<Option<f64>> = if self.sweep.axis == SweepAxis::None {
            vec![None]
        } else {
            self.sweep.values.iter().map(|&v| Some(v)).collect()
        };
        let mut out = Vec::new();
        for a in axis {
            let (tx, link) = self.link_at(a);
            let powers: Vec<f64> = if self.sweep.snr_db.is_empty() {
                self.sweep.power_dbm.clone()
            } else {
                self.sweep
                    .snr_db
                    .iter()
                    .map(|s| watt_to_dbm(link.power_for_snr(10f64.powf(s / 10.0), tx.symbol_rate)))
                    .collect()
            };
            for p in powers {
                out.push(GridPoint {
                    index: out.len(),
                    axis_value: a,
                    power_dbm: p,
                });
            }
        }
        out
    }

    pub fn setup(&self, point: &GridPoint) -> Result<PointSetup> {
        let (tx, link) = self.link_at(point.axis_value);
        let power_w = dbm_to_watt(point.power_dbm);
        let link = link.segmented_for_power(power_w, tx.symbol_rate, self.link.step_epsilon)?;
        Ok(PointSetup {
            point: point.clone(),
            tx,
            link,
            power_w,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [sweep]
        power_dbm = [-2.0, 0.0, 2.0]
    "#;

    #[test]
    fn defaults_follow_the_reference_system() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.link.num_spans, 30);
        assert_eq!(c.run.particles, 500);
        assert_eq!(c.receivers.enabled.len(), 4);
        assert_eq!(c.grid().len(), 3);
        let s = c.setup(&c.grid()[2]).unwrap();
        assert!((s.power_w - 10f64.powf(0.2) * 1e-3).abs() < 1e-15);
        assert!(s.link.span.segments() > 1);
        assert_eq!(s.link.bandpass_bandwidth_hz, 28e9);
    }

    #[test]
    fn round_trips_and_hashes_stably() {
        let mut c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
        c.output.dir = PathBuf::from("elsewhere");
        assert_eq!(c.hash(), again.hash());
        c.apply_desk_preset();
        assert_ne!(c.hash(), again.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn errors_carry_locations() {
        let err = ExperimentConfig::from_toml_str("[sweep]\npower_dbm = [0.0]\n[run]\nmc_runz = 3\n").unwrap_err();
        match err {
            Error::Config { location, message } => {
                assert!(location.starts_with("line 4"), "{location}");
                assert!(message.contains("mc_runz"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let err = ExperimentConfig::from_toml_str("[sweep]\npower_dbm = []\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref location, .. } if location == "sweep.power_dbm"));
        let err = ExperimentConfig::from_toml_str("[sweep]\npower_dbm = [0.0]\n[receivers]\nenabled = [\"dbp\"]\n")
            .unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
        let err = ExperimentConfig::from_toml_str("[sweep]\naxis = \"spans\"\nvalues = [2.5]\npower_dbm = [0.0]\n")
            .unwrap_err();
        assert!(matches!(err, Error::Config { ref location, .. } if location == "sweep.values"));
    }

    #[test]
    fn snr_grid_and_axes() {
        let c = ExperimentConfig::from_toml_str(
            "[sweep]\naxis = \"spans\"\nvalues = [1, 2]\nsnr_db = [10.0]\n",
        )
        .unwrap();
        let g = c.grid();
        assert_eq!(g.len(), 2);
        for p in &g {
            let s = c.setup(p).unwrap();
            assert!((10.0 * s.snr_proxy().log10() - 10.0).abs() < 1e-9);
            assert_eq!(s.link.num_spans, p.axis_value.unwrap() as usize);
        }
        assert!("gmp-sdbp".parse::<Receiver>().is_ok());
        assert!("gmp".parse::<Receiver>().is_err());
    }
}
