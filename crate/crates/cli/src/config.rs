//! Sweep configuration: JSON file format, presets and validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use snc_core::code::CodeParams;
use snc_core::modes::{Mode, ModeConfig};

use crate::CliError;

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 20_240_101;
pub const OUT_DIR_ENV: &str = "SNC_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "results";

/// Inclusive epsilon grid `min, min + step, ..., <= max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl EpsilonGrid {
    pub fn new(min: f64, max: f64, step: f64) -> Self {
        EpsilonGrid { min, max, step }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let finite = self.min.is_finite() && self.max.is_finite() && self.step.is_finite();
        if !finite {
            return Err(CliError::Config("epsilon grid must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.min) || !(0.0..=1.0).contains(&self.max) {
            return Err(CliError::Config(format!(
                "epsilon grid [{}, {}] must lie in [0, 1]",
                self.min, self.max
            )));
        }
        if self.min > self.max {
            return Err(CliError::Config(format!(
                "epsilon grid is empty: min {} > max {}",
                self.min, self.max
            )));
        }
        if self.step <= 0.0 && self.min != self.max {
            return Err(CliError::Config("epsilon step must be positive".into()));
        }
        Ok(())
    }

    /// Grid points rounded to 1e-9 so that decimal steps print cleanly.
    pub fn values(&self) -> Vec<f64> {
        if self.min == self.max || self.step <= 0.0 {
            return vec![round9(self.min)];
        }
        let count = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| round9(self.min + i as f64 * self.step))
            .collect()
    }
}

fn round9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

impl FromStr for EpsilonGrid {
    type Err = CliError;

    /// `min:max:step`, `min:max` (step 0.05) or a single value.
    fn from_str(s: &str) -> Result<Self, CliError> {
        let parts = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("bad epsilon grid {s:?}: {e}")))?;
        let grid = match parts[..] {
            [v] => EpsilonGrid::new(v, v, 0.0),
            [min, max] => EpsilonGrid::new(min, max, 0.05),
            [min, max, step] => EpsilonGrid::new(min, max, step),
            _ => return Err(CliError::Config(format!("bad epsilon grid {s:?}: expected min:max:step"))),
        };
        grid.validate()?;
        Ok(grid)
    }
}

/// An `(n, k, L)` RS-SNC over GF(256).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSpec {
    pub n: usize,
    pub k: usize,
    pub memory: usize,
}

impl CodeSpec {
    pub fn params(&self) -> Result<CodeParams, CliError> {
        CodeParams::over_gf256(self.n, self.k, self.memory).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// A retransmission mode run with window memory `memory`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub mode: Mode,
    pub k: usize,
    #[serde(default)]
    pub extra: usize,
    #[serde(default)]
    pub feedback_delay: usize,
    #[serde(default)]
    pub memory: usize,
}

impl ModeSpec {
    pub fn config(&self) -> Result<ModeConfig, CliError> {
        ModeConfig::new(self.mode, self.k, self.extra, self.feedback_delay)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Code parameters handed to the simulator; only `k` and `L` matter there.
    pub fn params(&self) -> Result<CodeParams, CliError> {
        let cfg = self.config()?;
        CodeParams::over_gf256(cfg.first_transmission_len(), self.k, self.memory)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// First-block error probability.
    Error,
    /// Average packet latency in slots.
    Latency,
    /// Average packets sent per block (modes only).
    Length,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Emit {
    pub csv: bool,
    pub json: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Emit { csv: true, json: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig1, Preset::Fig2, Preset::Fig3, Preset::Fig4];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
        }
    }

    pub fn config(self) -> SweepConfig {
        let code = |n, k, memory| CodeSpec { n, k, memory };
        let mode = |mode, extra, feedback_delay, memory| ModeSpec {
            mode,
            k: 8,
            extra,
            feedback_delay,
            memory,
        };
        let all_modes = |feedback_delay, memory| {
            vec![
                mode(Mode::M1, 0, feedback_delay, memory),
                mode(Mode::M2, 2, feedback_delay, memory),
                mode(Mode::M3, 2, feedback_delay, memory),
            ]
        };
        let base = SweepConfig {
            experiment: self.name().to_string(),
            ..SweepConfig::default()
        };
        match self {
            Preset::Fig1 => SweepConfig {
                epsilon: EpsilonGrid::new(0.1, 0.3, 0.025),
                codes: vec![code(12, 8, 1), code(12, 8, 2), code(18, 12, 2)],
                metrics: vec![Metric::Error],
                ..base
            },
            Preset::Fig2 => SweepConfig {
                epsilon: EpsilonGrid::new(0.1, 0.3, 0.025),
                codes: vec![code(12, 8, 1), code(12, 8, 2)],
                metrics: vec![Metric::Latency],
                ..base
            },
            Preset::Fig3 => SweepConfig {
                epsilon: EpsilonGrid::new(0.15, 0.3, 0.025),
                codes: vec![code(12, 8, 1)],
                modes: [all_modes(1, 0), all_modes(1, 1)].concat(),
                metrics: vec![Metric::Error, Metric::Length],
                ..base
            },
            Preset::Fig4 => SweepConfig {
                epsilon: EpsilonGrid::new(0.15, 0.3, 0.025),
                codes: vec![code(12, 8, 1)],
                modes: [all_modes(1, 0), all_modes(8, 0), all_modes(1, 1), all_modes(8, 1)].concat(),
                metrics: vec![Metric::Latency],
                ..base
            },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CliError::Config(format!("unknown preset {s:?} (expected fig1..fig4)")))
    }
}

/// Everything one `run` needs. Missing fields in a config file take the
/// defaults below (or the preset's values when `--preset` is given).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub experiment: String,
    pub epsilon: EpsilonGrid,
    pub codes: Vec<CodeSpec>,
    pub modes: Vec<ModeSpec>,
    pub metrics: Vec<Metric>,
    pub trials: u64,
    pub seed: u64,
    /// Output directory; falls back to `$SNC_OUT_DIR`, then `results`.
    pub out: Option<PathBuf>,
    pub emit: Emit,
    /// Also write each code's generator matrices as JSON.
    pub archive_generators: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            experiment: "sweep".into(),
            epsilon: EpsilonGrid::new(0.1, 0.3, 0.05),
            codes: Vec::new(),
            modes: Vec::new(),
            metrics: vec![Metric::Error],
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            out: None,
            emit: Emit::default(),
            archive_generators: false,
        }
    }
}

impl SweepConfig {
    /// Overlays the keys present in `file` onto `self`.
    pub fn merge_json(&self, file: &str) -> Result<SweepConfig, CliError> {
        let overlay: Value =
            serde_json::from_str(file).map_err(|e| CliError::Config(format!("config file: {e}")))?;
        let Value::Object(overlay) = overlay else {
            return Err(CliError::Config("config file must hold a JSON object".into()));
        };
        let mut base = serde_json::to_value(self).expect("config serializes");
        let fields = base.as_object_mut().expect("config is an object");
        for (key, value) in overlay {
            fields.insert(key, value);
        }
        serde_json::from_value(base).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.epsilon.validate()?;
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if self.codes.is_empty() && self.modes.is_empty() {
            return Err(CliError::Config("nothing to run: no codes and no modes".into()));
        }
        if self.metrics.is_empty() {
            return Err(CliError::Config("no metrics selected".into()));
        }
        let bad_name = self.experiment.is_empty()
            || !self
                .experiment
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if bad_name {
            return Err(CliError::Config(format!(
                "experiment id {:?} must be nonempty and use only [A-Za-z0-9_-]",
                self.experiment
            )));
        }
        for c in &self.codes {
            c.params()?;
        }
        for m in &self.modes {
            m.params()?;
        }
        Ok(())
    }

    /// Output directory after applying the environment fallback.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}
