//! Experiment harness for sliding network coding: sweeps, figure presets,
//! verification and result files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub mod config;
pub mod output;
pub mod sweep;
pub mod verify;

pub use config::{Preset, SweepConfig};
pub use sweep::{run_sweep, Row, SweepResult};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 1 for config or check failures, 2 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Check(_) => 1,
            CliError::Io { .. } => 2,
        }
    }
}

/// Crate version plus `git describe` of the build tree.
pub fn version_string() -> String {
    format!("v{}-{}", env!("CARGO_PKG_VERSION"), env!("SNC_GIT_DESCRIBE"))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub csv: Option<PathBuf>,
    pub sidecar: Option<PathBuf>,
    pub archives: Vec<PathBuf>,
    pub rows: usize,
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Evaluates `cfg` and writes the requested files into its output directory.
pub fn run(cfg: &SweepConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let started = Instant::now();
    let dir = cfg.out_dir();
    output::ensure_dir(&dir)?;
    let result = sweep::run_sweep(cfg)?;
    let mut summary = RunSummary {
        rows: result.rows.len(),
        ..RunSummary::default()
    };
    if cfg.archive_generators {
        for code in &cfg.codes {
            let path = output::write_generator_archive(&dir, &cfg.experiment, code.params()?, cfg.seed)?;
            summary.archives.push(path);
        }
    }
    if cfg.emit.csv {
        let path = dir.join(format!("{}.csv", cfg.experiment));
        output::write_csv(&path, &result)?;
        summary.csv = Some(path);
    }
    if cfg.emit.json {
        let path = dir.join(format!("{}.json", cfg.experiment));
        let sidecar = output::Sidecar {
            experiment: &cfg.experiment,
            version: version_string(),
            seed: cfg.seed,
            trials: cfg.trials,
            threads: rayon::current_num_threads(),
            wall_time_seconds: started.elapsed().as_secs_f64(),
            csv: summary.csv.as_deref().map(file_name),
            rows: result.rows.len(),
            series: result.series_names(),
            achieved_code_length: &result.achieved_code_length,
            mode_window_convention: output::window_convention(),
            generator_archives: summary.archives.iter().map(|p| file_name(p)).collect(),
            config: cfg,
        };
        output::write_sidecar(&path, &sidecar)?;
        summary.sidecar = Some(path);
    }
    Ok(summary)
}
