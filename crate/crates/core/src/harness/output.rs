//! Result rows, run metadata, CSV and JSON emission.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::CpInterval;
use crate::{Error, Result};

/// One CSV row: a receiver (or attacker) at one sweep value.
///
/// Columns after `macs` are empty unless the sweep produces them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub build_id: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub code_seed: u64,
    pub scenario: String,
    pub receiver: String,
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub beta: f64,
    pub sigma_c: f64,
    pub rho_slot_db: f64,
    pub axis: String,
    pub value: f64,
    /// Secondary coordinate (sigma_c for quant, the other ratio for mismatch).
    pub series: Option<f64>,
    pub errors: u64,
    pub trials: u64,
    pub bler: f64,
    pub cp_lo: f64,
    pub cp_hi: f64,
    pub wall_s: f64,
    pub macs: u64,
    pub air_s1: Option<f64>,
    pub air_star: Option<f64>,
    pub s_star: Option<f64>,
    pub air_bits: Option<u64>,
    pub budget: Option<usize>,
    pub attack: Option<String>,
    pub best_score: Option<f64>,
    pub torus_distance: Option<f64>,
    pub success_upper: Option<f64>,
}

impl SweepRow {
    pub fn cp(&self, level: f64) -> Result<CpInterval> {
        crate::analysis::clopper_pearson(self.errors, self.trials, level)
    }
}

/// Echo of everything needed to reproduce a run, written next to the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub build_id: String,
    pub config_hash: String,
    /// Canonical `key = value` form of the configuration.
    pub config: String,
    pub accepted_code_seed: u64,
    pub code_rank: usize,
    pub n_info: usize,
    pub rate: f64,
    pub phase_key: Vec<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub metadata: RunMetadata,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Rows of one receiver, in sweep order.
    pub fn series<'a>(&'a self, receiver: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.receiver == receiver)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for row in &self.rows {
            w.serialize(row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_metadata(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, &self.metadata).map_err(|e| Error::Format(e.to_string()))?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Writes `path` (CSV) and the JSON sidecar `path.json`; returns the
    /// sidecar path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        self.write_csv(path)?;
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        let side = PathBuf::from(side);
        self.write_metadata(&side)?;
        Ok(side)
    }
}

/// Reads back a CSV written by [`SweepResult::write_csv`] as string records.
pub fn read_csv_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()).map_err(csv_err))
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}
