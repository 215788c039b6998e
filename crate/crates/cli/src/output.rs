//! CSV schemas, run records and the single writer that persists them.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentKind, GridPoint, RunConfig};

const BASE: [&str; 14] = [
    "L", "d", "alpha", "beta", "h_star", "J", "boundary", "algorithm", "seed", "observable", "mean", "std_error", "n_samples", "tau",
];
const PENETRATION: [&str; 19] = [
    "L", "d", "alpha", "beta", "h_star", "J", "boundary", "algorithm", "seed", "observable", "mean", "std_error", "n_samples", "tau",
    "successes", "ci_low", "ci_high", "inner_radius", "g_fraction",
];
const PEIERLS: [&str; 12] =
    ["L", "d", "alpha", "beta", "h_star", "J", "interior_size", "interior", "boundary_size", "ratio", "bound", "holds"];
const FIELD: [&str; 6] = ["d", "alpha", "h_star", "radius", "ball_sum", "normalized_sum"];
const ANIMALS: [&str; 6] = ["d", "beta", "J", "size", "count", "partial_sum"];
const FAT: [&str; 11] =
    ["d", "alpha", "beta", "h_star", "J", "box_radius", "max_boundary", "sum", "product_bound", "fat_count", "max_interior_size"];

/// Fixed CSV column set of each experiment kind.
pub fn schema(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::ExactVerify | ExperimentKind::McGap => &BASE,
        ExperimentKind::Penetration => &PENETRATION,
        ExperimentKind::PeierlsScan => &PEIERLS,
        ExperimentKind::FieldScan => &FIELD,
        ExperimentKind::Animals => &ANIMALS,
        ExperimentKind::FatSum => &FAT,
    }
}

/// Formats a float with the shortest representation that round-trips.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Error,
}

/// Everything known about one executed grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub kind: ExperimentKind,
    pub fingerprint: String,
    pub artifact_version: String,
    pub config: RunConfig,
    pub point: GridPoint,
    pub started_at: String,
    pub finished_at: String,
    pub status: Status,
    pub error: Option<String>,
    pub rng: Option<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    /// Rows as column-name maps.
    pub fn row_maps(&self) -> impl Iterator<Item = BTreeMap<&str, &str>> + '_ {
        self.rows.iter().map(|r| self.columns.iter().map(String::as_str).zip(r.iter().map(String::as_str)).collect())
    }
}

pub fn artifact_version() -> String {
    format!("isinglab {}", env!("CARGO_PKG_VERSION"))
}

/// Hex digest identifying a configuration; names the run's output files.
pub fn fingerprint(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("configs serialize");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Paths of one run under `<out>/<kind>/`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPaths {
    pub dir: PathBuf,
    pub csv: PathBuf,
    pub plot: PathBuf,
    pub records: PathBuf,
    pub diagnostics: PathBuf,
}

impl RunPaths {
    pub fn new(out: &Path, kind: ExperimentKind, fingerprint: &str) -> Self {
        let dir = out.join(kind.name());
        let stem = format!("run-{fingerprint}");
        RunPaths {
            csv: dir.join(format!("{stem}.csv")),
            plot: dir.join(format!("{stem}-plot.csv")),
            records: dir.join(format!("{stem}-records")),
            diagnostics: dir.join(format!("{stem}-diagnostics")),
            dir,
        }
    }

    pub fn record(&self, index: usize) -> PathBuf {
        self.records.join(format!("point-{index:04}.json"))
    }

    pub fn diagnostics_file(&self, index: usize) -> PathBuf {
        self.diagnostics.join(format!("point-{index:04}.jsonl"))
    }
}

/// Writes records in grid order regardless of completion order.
pub struct RecordWriter {
    paths: RunPaths,
    csv: csv::Writer<fs::File>,
    pending: BTreeMap<usize, RunRecord>,
    next: usize,
    done: Vec<RunRecord>,
}

impl RecordWriter {
    pub fn create(paths: RunPaths, kind: ExperimentKind) -> io::Result<Self> {
        fs::create_dir_all(&paths.records)?;
        let mut csv = csv::Writer::from_path(&paths.csv)?;
        csv.write_record(schema(kind))?;
        csv.flush()?;
        Ok(Self { paths, csv, pending: BTreeMap::new(), next: 0, done: Vec::new() })
    }

    pub fn push(&mut self, record: RunRecord) -> io::Result<()> {
        self.pending.insert(record.point.index, record);
        while let Some(r) = self.pending.remove(&self.next) {
            for row in &r.rows {
                self.csv.write_record(row)?;
            }
            self.csv.flush()?;
            let json = serde_json::to_string_pretty(&r).map_err(io::Error::other)?;
            fs::write(self.paths.record(r.point.index), json + "\n")?;
            self.done.push(r);
            self.next += 1;
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<Vec<RunRecord>> {
        if !self.pending.is_empty() {
            return Err(io::Error::other(format!("grid point {} never completed", self.next)));
        }
        self.csv.flush()?;
        Ok(self.done)
    }
}
