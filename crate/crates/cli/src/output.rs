//! CSV, JSON sidecar and generator archive writers.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use snc_core::channel_sim::MODE_WINDOW_CONVENTION;
use snc_core::code::{self, CodeParams};

use crate::config::SweepConfig;
use crate::sweep::SweepResult;
use crate::CliError;

/// One parsed CSV row: epsilon, series, value, stderr.
pub type CsvRow = (f64, String, f64, Option<f64>);

pub const CSV_HEADER: [&str; 4] = ["epsilon", "series", "value", "stderr"];

fn io_err(path: &Path, source: io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    };
    io_err(path, source)
}

/// Renders rows as RFC 4180 CSV with LF line endings. Numbers use Rust's
/// shortest round-trip formatting so output is byte-stable.
pub fn csv_bytes(result: &SweepResult) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("write to memory");
    for row in &result.rows {
        let stderr = row.stderr.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([
            row.epsilon.to_string(),
            row.series.clone(),
            row.value.to_string(),
            stderr,
        ])
        .expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

pub fn write_csv(path: &Path, result: &SweepResult) -> Result<(), CliError> {
    fs::write(path, csv_bytes(result)).map_err(|e| io_err(path, e))
}

/// Reads a CSV written by [`write_csv`] back into `(epsilon, series, value, stderr)`.
pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let bad = |what: &str| io_err(path, io::Error::new(io::ErrorKind::InvalidData, what.to_string()));
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let num = |i: usize| record.get(i).and_then(|s| s.parse::<f64>().ok());
        let epsilon = num(0).ok_or_else(|| bad("epsilon"))?;
        let series = record.get(1).ok_or_else(|| bad("series"))?.to_string();
        let value = num(2).ok_or_else(|| bad("value"))?;
        let stderr = match record.get(3) {
            Some("") | None => None,
            Some(_) => Some(num(3).ok_or_else(|| bad("stderr"))?),
        };
        rows.push((epsilon, series, value, stderr));
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub experiment: &'a str,
    pub version: String,
    pub seed: u64,
    pub trials: u64,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub csv: Option<String>,
    pub rows: usize,
    pub series: Vec<String>,
    /// `ceil` of the largest analytic average code length per mode.
    pub achieved_code_length: &'a std::collections::BTreeMap<String, u64>,
    pub mode_window_convention: &'static str,
    pub generator_archives: Vec<String>,
    pub config: &'a SweepConfig,
}

pub fn write_sidecar(path: &Path, sidecar: &Sidecar<'_>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(sidecar).expect("sidecar serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Builds and stores the generator matrices of `params` with `seed` as the point seed.
pub fn write_generator_archive(dir: &Path, experiment: &str, params: CodeParams, seed: u64) -> Result<PathBuf, CliError> {
    let gens = code::build_generators(params, seed).map_err(|e| CliError::Check(e.to_string()))?;
    let path = dir.join(format!(
        "{experiment}_generators_n{}_k{}_L{}.json",
        params.n(),
        params.k(),
        params.memory()
    ));
    let mut file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    writeln!(file, "{}", gens.to_json()).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn window_convention() -> &'static str {
    MODE_WINDOW_CONVENTION
}
