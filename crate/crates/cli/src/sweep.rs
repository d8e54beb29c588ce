//! Evaluates a [`SweepConfig`] into `(epsilon, series, value, stderr)` rows.
//!
//! Series names are `<family>[_<metric>]_<kind>` where the family encodes the
//! parameters (`bc_n12_k8`, `snc_n12_k8_L1`, `m2_k8_d2_L0`, latency series of
//! modes also carry `_N<feedback delay>`), the metric is omitted for error
//! probabilities, and the kind is `analytic`, `bound`, `exact` or `sim`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use snc_core::analytic::{self, ErasureProb, EXACT_MAX_MEMORY, EXACT_MAX_N};
use snc_core::channel_sim;
use snc_core::modes;

use crate::config::{CodeSpec, Metric, ModeSpec, SweepConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub epsilon: f64,
    pub series: String,
    pub value: f64,
    /// `None` for analytic series.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<Row>,
    /// `ceil` of the largest analytic average code length over the grid, per mode family.
    pub achieved_code_length: BTreeMap<String, u64>,
}

impl SweepResult {
    pub fn series_names(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.series.as_str()))
            .map(|r| r.series.clone())
            .collect()
    }
}

pub fn code_family(c: &CodeSpec) -> String {
    format!("snc_n{}_k{}_L{}", c.n, c.k, c.memory)
}

pub fn block_family(n: usize, k: usize) -> String {
    format!("bc_n{n}_k{k}")
}

pub fn mode_family(m: &ModeSpec) -> String {
    format!("{}_k{}_d{}_L{}", m.mode.label(), m.k, m.extra, m.memory)
}

/// Per-series stream seed: FNV-1a over the series family and the epsilon bits,
/// mixed with the master seed. Stable across runs, platforms and config order.
pub fn derive_seed(master: u64, family: &str, epsilon: f64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in family.bytes().chain(epsilon.to_bits().to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = h ^ master;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Emitter {
    epsilon: f64,
    seen: BTreeSet<String>,
    rows: Vec<Row>,
}

impl Emitter {
    fn wants(&self, name: &str) -> bool {
        !self.seen.contains(name)
    }

    fn push(&mut self, name: String, value: f64, stderr: Option<f64>) {
        if self.seen.insert(name.clone()) {
            self.rows.push(Row {
                epsilon: self.epsilon,
                series: name,
                value,
                stderr,
            });
        }
    }
}

fn analytic_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult, CliError> {
    cfg.validate()?;
    let metrics: BTreeSet<Metric> = cfg.metrics.iter().copied().collect();
    let mut result = SweepResult::default();
    for epsilon in cfg.epsilon.values() {
        let eps = ErasureProb::new(epsilon).map_err(analytic_err)?;
        let mut out = Emitter {
            epsilon,
            seen: BTreeSet::new(),
            rows: Vec::new(),
        };
        for code in &cfg.codes {
            code_series(cfg, code, eps, &metrics, &mut out)?;
        }
        for mode in &cfg.modes {
            mode_series(cfg, mode, eps, &metrics, &mut out, &mut result.achieved_code_length)?;
        }
        result.rows.extend(out.rows);
    }
    Ok(result)
}

fn code_series(
    cfg: &SweepConfig,
    code: &CodeSpec,
    eps: ErasureProb,
    metrics: &BTreeSet<Metric>,
    out: &mut Emitter,
) -> Result<(), CliError> {
    let params = code.params()?;
    let family = code_family(code);
    let blocks = params.window_blocks();
    let (long_n, long_k) = (blocks * code.n, blocks * code.k);
    let short = block_family(code.n, code.k);
    let long = block_family(long_n, long_k);
    let needs_sim = (metrics.contains(&Metric::Error) && out.wants(&format!("{family}_sim")))
        || (metrics.contains(&Metric::Latency) && out.wants(&format!("{family}_latency_sim")));
    let sim = if needs_sim {
        let seed = derive_seed(cfg.seed, &family, eps.value());
        Some(channel_sim::sim_snc_first_block(&params, eps, cfg.trials, seed).map_err(analytic_err)?)
    } else {
        None
    };
    if metrics.contains(&Metric::Error) {
        out.push(format!("{short}_analytic"), 1.0 - analytic::bc_success(code.n, code.k, eps), None);
        out.push(
            format!("{long}_analytic"),
            1.0 - analytic::comparable_long_bc_success(&params, eps),
            None,
        );
        out.push(
            format!("{family}_bound"),
            1.0 - analytic::snc_success_lower_bound(&params, eps),
            None,
        );
        if code.memory <= EXACT_MAX_MEMORY && code.n <= EXACT_MAX_N {
            let exact = analytic::snc_success_exact(&params, eps).map_err(analytic_err)?;
            out.push(format!("{family}_exact"), 1.0 - exact.total, None);
        }
        if let Some(r) = &sim {
            out.push(format!("{family}_sim"), r.error_rate, Some(r.error_stderr));
        }
    }
    if metrics.contains(&Metric::Latency) {
        let bc = |n, k| analytic::bc_avg_latency(n, k, eps).map_err(analytic_err);
        out.push(format!("{short}_latency_analytic"), bc(code.n, code.k)?, None);
        out.push(format!("{long}_latency_analytic"), bc(long_n, long_k)?, None);
        if code.memory <= EXACT_MAX_MEMORY && code.n <= EXACT_MAX_N {
            let snc = analytic::snc_avg_latency(&params, eps).map_err(analytic_err)?;
            out.push(format!("{family}_latency_analytic"), snc, None);
        }
        if let Some(r) = &sim {
            out.push(format!("{family}_latency_sim"), r.avg_latency, Some(r.latency_stderr));
        }
    }
    Ok(())
}

fn mode_series(
    cfg: &SweepConfig,
    spec: &ModeSpec,
    eps: ErasureProb,
    metrics: &BTreeSet<Metric>,
    out: &mut Emitter,
    achieved: &mut BTreeMap<String, u64>,
) -> Result<(), CliError> {
    let mode = spec.config()?;
    let params = spec.params()?;
    let family = mode_family(spec);
    let latency_family = format!("{family}_N{}", spec.feedback_delay);
    let analytic_ok = spec.memory == 0;

    let error_name = format!("{family}_sim");
    let length_name = format!("{family}_length_sim");
    let latency_name = format!("{latency_family}_latency_sim");
    let needs_sim = (metrics.contains(&Metric::Error) && out.wants(&error_name))
        || (metrics.contains(&Metric::Length) && out.wants(&length_name))
        || (metrics.contains(&Metric::Latency) && out.wants(&latency_name));
    let sim = if needs_sim {
        let seed = derive_seed(cfg.seed, &latency_family, eps.value());
        Some(channel_sim::sim_mode(&params, &mode, eps, cfg.trials, seed).map_err(analytic_err)?)
    } else {
        None
    };

    let length = modes::mode_avg_code_length(&mode, eps);
    let base = format!("{}_k{}_d{}", spec.mode.label(), spec.k, spec.extra);
    let ceil = length.ceil() as u64;
    achieved
        .entry(base)
        .and_modify(|c| *c = (*c).max(ceil))
        .or_insert(ceil);

    if metrics.contains(&Metric::Error) {
        if analytic_ok {
            out.push(format!("{family}_analytic"), 1.0 - modes::mode_success(&mode, eps), None);
        }
        if let Some(r) = &sim {
            out.push(error_name, r.error_rate, Some(r.error_stderr));
        }
    }
    if metrics.contains(&Metric::Length) {
        if analytic_ok {
            out.push(format!("{family}_length_analytic"), length, None);
        }
        if let Some(r) = &sim {
            out.push(length_name, r.avg_code_length, Some(r.code_length_stderr));
        }
    }
    if metrics.contains(&Metric::Latency) {
        if analytic_ok {
            out.push(
                format!("{latency_family}_latency_analytic"),
                modes::mode_avg_latency(&mode, eps),
                None,
            );
        }
        if let Some(r) = &sim {
            out.push(latency_name, r.avg_latency, Some(r.latency_stderr));
        }
    }
    Ok(())
}
