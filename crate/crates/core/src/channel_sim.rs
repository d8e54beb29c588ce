//! Bernoulli packet-erasure channel and Monte Carlo estimators.
//!
//! Every trial is an independent first-block episode driven by its own ChaCha
//! stream from [`seed_schedule`]. Tallies are integer sums merged with rayon, so
//! a report depends only on `(config, seed, trials)` and never on the thread
//! count or scheduling order.
//!
//! Timing model: slots are numbered from 1 at the start of the target block and
//! data packet `p` is sent in slot `p`. A block decodes at the end of the
//! transmission phase that completes it: its first transmission, its
//! retransmission burst (which starts `feedback_delay` slots after the first
//! transmission), or, for window decoding, the last phase of the last block used.
//! A packet's latency is that slot minus `p`; lost packets of blocks that never
//! decode are charged the end of the full window.

use rand::distributions::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analytic::ErasureProb;
use crate::code::{self, CodeParams, ErasurePattern, GeneratorSet, ReceivedWindow, Recovery};
use crate::galois::{FieldElem, Matrix};
use crate::modes::{Mode, ModeConfig};

/// Window-composition rule used by [`sim_mode`] when `L >= 1`.
pub const MODE_WINDOW_CONVENTION: &str = "each block of the window runs its own mode protocol; \
block j contributes surplus (received - k) after its retransmission and the target block is \
recovered at the first window whose cumulative surplus is nonnegative";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Code(#[from] code::CodeError),
}

/// ChaCha stream for one trial. The 256-bit key holds `master_seed` and the
/// stream id is `trial_index`, so distinct pairs never share a stream.
pub fn seed_schedule(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(b"snc-sim1");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial_index);
    rng
}

/// I.i.d. erasure mask for `count` packets; `true` means erased.
pub fn erase<R: Rng + ?Sized>(count: usize, eps: ErasureProb, rng: &mut R) -> Vec<bool> {
    let dist = Bernoulli::new(eps.value()).expect("validated probability");
    (0..count).map(|_| dist.sample(rng)).collect()
}

fn count_erased<R: Rng + ?Sized>(count: usize, dist: &Bernoulli, rng: &mut R) -> usize {
    (0..count).filter(|_| dist.sample(rng)).count()
}

/// Result of one simulated block episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub recovery: Recovery,
    /// Packets sent for the target block.
    pub packets_sent: u64,
    /// Latency in slots of data packets `1..=k` of the target block.
    pub latencies: Vec<u64>,
    /// `Some(agree)` when the algebraic decoder was run on this trial.
    pub decoder_agrees: Option<bool>,
}

impl TrialOutcome {
    pub fn decoded(&self) -> bool {
        self.recovery.is_decoded()
    }
}

/// Echo of the simulated configuration, stored with every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimConfig {
    Snc {
        params: CodeParams,
        epsilon: ErasureProb,
    },
    Mode {
        params: CodeParams,
        mode: ModeConfig,
        epsilon: ErasureProb,
        window_convention: &'static str,
    },
}

/// Monte Carlo estimates with standard errors of the mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub trials: u64,
    pub seed: u64,
    pub failures: u64,
    pub error_rate: f64,
    pub error_stderr: f64,
    pub avg_code_length: f64,
    pub code_length_stderr: f64,
    /// Mean over trials of the per-block average packet latency.
    pub avg_latency: f64,
    pub latency_stderr: f64,
    pub per_packet_latency: Vec<f64>,
    pub per_packet_latency_stderr: Vec<f64>,
    /// Trials cross-checked with the algebraic decoder, and disagreements found.
    pub decoder_checks: u64,
    pub decoder_disagreements: u64,
    pub config: SimConfig,
}

impl SimReport {
    pub fn success_rate(&self) -> f64 {
        1.0 - self.error_rate
    }
}

#[derive(Debug, Clone)]
struct Tally {
    trials: u64,
    failures: u64,
    packets: u64,
    packets_sq: u128,
    latency: u64,
    latency_sq: u128,
    per_packet: Vec<u64>,
    per_packet_sq: Vec<u128>,
    decoder_checks: u64,
    decoder_disagreements: u64,
}

impl Tally {
    fn new(k: usize) -> Self {
        Tally {
            trials: 0,
            failures: 0,
            packets: 0,
            packets_sq: 0,
            latency: 0,
            latency_sq: 0,
            per_packet: vec![0; k],
            per_packet_sq: vec![0; k],
            decoder_checks: 0,
            decoder_disagreements: 0,
        }
    }

    fn record(&mut self, t: &TrialOutcome) {
        self.trials += 1;
        self.failures += (!t.decoded()) as u64;
        self.packets += t.packets_sent;
        self.packets_sq += (t.packets_sent as u128).pow(2);
        let sum: u64 = t.latencies.iter().sum();
        self.latency += sum;
        self.latency_sq += (sum as u128).pow(2);
        for (i, &d) in t.latencies.iter().enumerate() {
            self.per_packet[i] += d;
            self.per_packet_sq[i] += (d as u128).pow(2);
        }
        if let Some(agree) = t.decoder_agrees {
            self.decoder_checks += 1;
            self.decoder_disagreements += (!agree) as u64;
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        self.failures += other.failures;
        self.packets += other.packets;
        self.packets_sq += other.packets_sq;
        self.latency += other.latency;
        self.latency_sq += other.latency_sq;
        for i in 0..self.per_packet.len() {
            self.per_packet[i] += other.per_packet[i];
            self.per_packet_sq[i] += other.per_packet_sq[i];
        }
        self.decoder_checks += other.decoder_checks;
        self.decoder_disagreements += other.decoder_disagreements;
        self
    }

    fn into_report(self, seed: u64, config: SimConfig) -> SimReport {
        let t = self.trials as f64;
        let k = self.per_packet.len() as f64;
        // Mean and standard error of samples x / scale from integer sums.
        let moments = |sum: u64, sum_sq: u128, scale: f64| {
            let mean = sum as f64 / scale / t;
            let var = (sum_sq as f64 / (scale * scale) / t - mean * mean).max(0.0);
            (mean, (var / t).sqrt())
        };
        let error_rate = self.failures as f64 / t;
        let (avg_code_length, code_length_stderr) = moments(self.packets, self.packets_sq, 1.0);
        let (avg_latency, latency_stderr) = moments(self.latency, self.latency_sq, k);
        let (per_packet_latency, per_packet_latency_stderr) = self
            .per_packet
            .iter()
            .zip(&self.per_packet_sq)
            .map(|(&s, &sq)| moments(s, sq, 1.0))
            .unzip();
        SimReport {
            trials: self.trials,
            seed,
            failures: self.failures,
            error_rate,
            error_stderr: (error_rate * (1.0 - error_rate) / t).sqrt(),
            avg_code_length,
            code_length_stderr,
            avg_latency,
            latency_stderr,
            per_packet_latency,
            per_packet_latency_stderr,
            decoder_checks: self.decoder_checks,
            decoder_disagreements: self.decoder_disagreements,
            config,
        }
    }
}

fn run_trials<F>(trials: u64, seed: u64, k: usize, trial: F) -> Tally
where
    F: Fn(u64, &mut ChaCha8Rng) -> TrialOutcome + Sync,
{
    (0..trials)
        .into_par_iter()
        .fold(
            || Tally::new(k),
            |mut tally, i| {
                let mut rng = seed_schedule(seed, i);
                tally.record(&trial(i, &mut rng));
                tally
            },
        )
        .reduce(|| Tally::new(k), Tally::merge)
}

fn check_trials(trials: u64) -> Result<(), SimError> {
    if trials == 0 {
        return Err(SimError::InvalidConfig("trials must be at least 1".into()));
    }
    Ok(())
}

/// One RS-SNC episode: erasure masks for the `L + 1` blocks of the window,
/// classified by the count rule.
pub fn snc_trial<R: Rng + ?Sized>(params: &CodeParams, eps: ErasureProb, rng: &mut R) -> (ErasurePattern, TrialOutcome) {
    let (n, k) = (params.n(), params.k());
    let masks: Vec<Vec<bool>> = (0..params.window_blocks()).map(|_| erase(n, eps, rng)).collect();
    let pattern = ErasurePattern::new(n, masks).expect("masks have length n");
    let recovery = code::decodable_by_count(&pattern.counts(), params);
    let blocks_waited = match recovery {
        Recovery::Window(l) => l + 1,
        Recovery::Undecodable => params.window_blocks(),
    };
    let latencies = (1..=k)
        .map(|p| {
            if pattern.is_erased(0, p - 1) {
                (blocks_waited * n - p) as u64
            } else {
                0
            }
        })
        .collect();
    let outcome = TrialOutcome {
        recovery,
        packets_sent: n as u64,
        latencies,
        decoder_agrees: None,
    };
    (pattern, outcome)
}

fn snc_config(params: &CodeParams, eps: ErasureProb) -> SimConfig {
    SimConfig::Snc {
        params: *params,
        epsilon: eps,
    }
}

/// First-block error probability of RS-SNC by simulation.
pub fn sim_snc_first_block(
    params: &CodeParams,
    eps: ErasureProb,
    trials: u64,
    seed: u64,
) -> Result<SimReport, SimError> {
    check_trials(trials)?;
    let tally = run_trials(trials, seed, params.k(), |_, rng| snc_trial(params, eps, rng).1);
    Ok(tally.into_report(seed, snc_config(params, eps)))
}

/// Packet latency of RS-SNC by simulation. Shares the trial engine with
/// [`sim_snc_first_block`], so both estimates come from the same episodes.
pub fn sim_snc_latency(
    params: &CodeParams,
    eps: ErasureProb,
    trials: u64,
    seed: u64,
) -> Result<SimReport, SimError> {
    sim_snc_first_block(params, eps, trials, seed)
}

/// [`sim_snc_first_block`] that also runs the algebraic window decoder on every
/// `check_every`-th trial and counts disagreements with the count rule.
///
/// Channel draws are identical to the unchecked run; source data for the
/// decoder comes from a separate stream.
pub fn sim_snc_first_block_checked(
    params: &CodeParams,
    eps: ErasureProb,
    trials: u64,
    seed: u64,
    gens: &GeneratorSet,
    check_every: u64,
) -> Result<SimReport, SimError> {
    check_trials(trials)?;
    let gp = gens.params();
    if (gp.n(), gp.k(), gp.memory()) != (params.n(), params.k(), params.memory()) {
        return Err(SimError::InvalidConfig(format!(
            "generators are for {gp:?}, simulating {params:?}"
        )));
    }
    if check_every == 0 {
        return Err(SimError::InvalidConfig("check_every must be at least 1".into()));
    }
    let tally = run_trials(trials, seed, params.k(), |i, rng| {
        let (pattern, mut outcome) = snc_trial(params, eps, rng);
        if i % check_every == 0 {
            let mut data_rng = seed_schedule(seed ^ 0xdec0_de00_0000_0000, i);
            let agree = decoder_agrees(gens, &pattern, outcome.recovery, &mut data_rng)
                .expect("decoder cross-check failed on a well-formed window");
            outcome.decoder_agrees = Some(agree);
        }
        outcome
    });
    Ok(tally.into_report(seed, snc_config(params, eps)))
}

fn decoder_agrees<R: Rng + ?Sized>(
    gens: &GeneratorSet,
    pattern: &ErasurePattern,
    by_count: Recovery,
    rng: &mut R,
) -> Result<bool, SimError> {
    let p = gens.params();
    let field = p.field();
    let order = field.order() as u32;
    let mut random_block = || {
        let data = (0..p.k()).map(|_| FieldElem(rng.gen_range(0..order) as u8)).collect();
        Matrix::from_elems(field, p.k(), 1, data).expect("k x 1")
    };
    let history: Vec<Matrix> = (0..p.memory()).map(|_| random_block()).collect();
    let window: Vec<Matrix> = (0..p.window_blocks()).map(|_| random_block()).collect();
    // stream order: oldest history first
    let mut stream: Vec<&Matrix> = history.iter().rev().collect();
    stream.extend(window.iter());
    let coded = (0..p.window_blocks())
        .map(|j| {
            let pos = p.memory() + j;
            let hist: Vec<Matrix> = (0..=p.memory()).map(|t| stream[pos - t].clone()).collect();
            code::encode_block(&hist, gens)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let outcome = code::window_decode(
        &ReceivedWindow {
            known_history: &history,
            blocks: &coded,
            erasures: pattern,
        },
        gens,
    )?;
    let correct = match &outcome {
        code::DecodeOutcome::Decoded { block, .. } => *block == window[0],
        code::DecodeOutcome::Failure => true,
    };
    Ok(correct && outcome.window() == by_count)
}

/// One block under a retransmission mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ModeBlock {
    sent: u64,
    /// Received packets minus `k`; the block decodes alone iff this is >= 0.
    surplus: i64,
    /// Slot, relative to the block start, at which its last phase ends.
    completion: u64,
}

fn mode_block<R: Rng + ?Sized>(cfg: &ModeConfig, dist: &Bernoulli, rng: &mut R, data_lost: Option<&mut Vec<bool>>) -> ModeBlock {
    let k = cfg.k();
    let extra = cfg.extra() as u64;
    let n_re = cfg.feedback_delay() as u64;
    let first = cfg.first_transmission_len();
    let mask: Vec<bool> = (0..first).map(|_| dist.sample(rng)).collect();
    if let Some(out) = data_lost {
        out.clear();
        out.extend_from_slice(&mask[..k]);
    }
    let lost = mask.iter().filter(|&&e| e).count() as u64;
    let k64 = k as u64;
    let first64 = first as u64;
    // Retransmission burst size for `lost` missing packets.
    let burst = match cfg.mode() {
        Mode::M1 if lost > 0 => lost,
        Mode::M2 if lost > 0 => lost + extra,
        Mode::M3 if lost > extra => lost - extra,
        _ => 0,
    };
    if burst == 0 {
        return ModeBlock {
            sent: first64,
            surplus: (first64 - lost) as i64 - k64 as i64,
            completion: first64,
        };
    }
    let lost_again = count_erased(burst as usize, dist, rng) as u64;
    let received = first64 - lost + burst - lost_again;
    ModeBlock {
        sent: first64 + burst,
        surplus: received as i64 - k64 as i64,
        completion: first64 + n_re + burst,
    }
}

/// One episode under a retransmission mode; see [`MODE_WINDOW_CONVENTION`].
pub fn mode_trial<R: Rng + ?Sized>(params: &CodeParams, cfg: &ModeConfig, eps: ErasureProb, rng: &mut R) -> TrialOutcome {
    let dist = Bernoulli::new(eps.value()).expect("validated probability");
    let period = cfg.first_transmission_len() as u64;
    let mut data_lost = Vec::with_capacity(cfg.k());
    let target = mode_block(cfg, &dist, rng, Some(&mut data_lost));
    let mut blocks = vec![target];
    if target.surplus < 0 {
        for _ in 0..params.memory() {
            blocks.push(mode_block(cfg, &dist, rng, None));
        }
    }
    let recovery = code::first_recovering_window(blocks.iter().map(|b| b.surplus));
    let used = match recovery {
        Recovery::Window(l) => l + 1,
        Recovery::Undecodable => blocks.len(),
    };
    let decode_slot = blocks[..used]
        .iter()
        .enumerate()
        .map(|(j, b)| j as u64 * period + b.completion)
        .max()
        .expect("at least one block");
    let latencies = data_lost
        .iter()
        .enumerate()
        .map(|(i, &lost)| if lost { decode_slot - (i as u64 + 1) } else { 0 })
        .collect();
    TrialOutcome {
        recovery,
        packets_sent: target.sent,
        latencies,
        decoder_agrees: None,
    }
}

/// Error probability, code length and latency of a retransmission mode.
///
/// Only `k` and the memory `L` of `params` are used.
pub fn sim_mode(
    params: &CodeParams,
    cfg: &ModeConfig,
    eps: ErasureProb,
    trials: u64,
    seed: u64,
) -> Result<SimReport, SimError> {
    check_trials(trials)?;
    if params.k() != cfg.k() {
        return Err(SimError::InvalidConfig(format!(
            "code has k = {}, mode has k = {}",
            params.k(),
            cfg.k()
        )));
    }
    let tally = run_trials(trials, seed, cfg.k(), |_, rng| mode_trial(params, cfg, eps, rng));
    Ok(tally.into_report(
        seed,
        SimConfig::Mode {
            params: *params,
            mode: *cfg,
            epsilon: eps,
            window_convention: MODE_WINDOW_CONVENTION,
        },
    ))
}
