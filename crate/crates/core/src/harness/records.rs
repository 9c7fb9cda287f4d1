use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::Receiver;
use super::runner::GmpSummary;
use crate::dbp::GaussianAuxChannel;
use crate::Result;

/// One line of the record file: everything measured at one grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
    pub point_index: usize,
    pub axis_value: Option<f64>,
    pub power_dbm: f64,
    pub snr_proxy_db: f64,
    pub segments_per_span: usize,
    pub training_runs: usize,
    /// Per-block AIRs, keyed by receiver.
    pub per_run: BTreeMap<Receiver, Vec<f64>>,
    pub aux_channels: Vec<GaussianAuxChannel>,
    pub gmp: Option<GmpSummary>,
    pub elapsed_s: f64,
    pub error: Option<String>,
}

/// Append-only JSON-lines store, one file per config hash.
#[derive(Debug, Clone)]
pub struct RecordStore {
    path: PathBuf,
}

impl RecordStore {
    pub fn new(dir: &Path, config_hash: &str) -> Self {
        RecordStore {
            path: dir.join(format!("records-{}.jsonl", &config_hash[..16.min(config_hash.len())])),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Every complete record in file order. A truncated last line (from an
    /// interrupted write) is ignored.
    pub fn load(&self) -> Result<Vec<RunRecord>> {
        let f = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let lines: Vec<String> = BufReader::new(f).lines().collect::<std::io::Result<_>>()?;
        let last = lines.len().saturating_sub(1);
        let mut out = Vec::new();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(r) => out.push(r),
                Err(_) if i == last => break,
                Err(e) => return Err(e.into()),
            }
        }
        Ok(out)
    }

    /// Latest record per point; failed points are superseded by later
    /// successful ones.
    pub fn latest(&self) -> Result<BTreeMap<usize, RunRecord>> {
        let mut out: BTreeMap<usize, RunRecord> = BTreeMap::new();
        for r in self.load()? {
            let keep_old = out.get(&r.point_index).is_some_and(|o| o.error.is_none() && r.error.is_some());
            if !keep_old {
                out.insert(r.point_index, r);
            }
        }
        Ok(out)
    }

    pub fn append(&self, record: &RunRecord) -> Result<()> {
        if let Some(dir) = self.path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        f.write_all(line.as_bytes())?;
        f.flush()?;
        Ok(())
    }
}
