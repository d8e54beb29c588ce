//! Closed forms for the three retransmission modes at `L = 0`.
//!
//! - **M1** sends the `k` data packets, then retransmits as many parity packets
//!   as data packets were lost.
//! - **M2** sends the `k` data packets; if `r > 0` are lost it retransmits
//!   `r + delta` parity packets.
//! - **M3** sends `k + delta` packets up front and, if `r > delta` are lost,
//!   retransmits the missing `r - delta`.
//!
//! Each block is retransmitted at most once, `feedback_delay` slots after its
//! first transmission ends. The latency distributions are the published closed
//! forms; for M3 with `delta > 0` they condition on data-packet losses only, so
//! they differ from a protocol simulation (see `channel_sim`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{binom_cdf, binom_pmf, avg_packet_latency, ErasureProb, LatencyDistribution};

/// At most one retransmission round per block.
pub const MAX_RETRANSMISSIONS: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModeError {
    #[error("invalid mode configuration: {0}")]
    InvalidConfig(String),
    #[error("packet index {p} outside 1..={k}")]
    PacketIndex { p: usize, k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    M1,
    M2,
    M3,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::M1, Mode::M2, Mode::M3];

    pub fn label(self) -> &'static str {
        match self {
            Mode::M1 => "m1",
            Mode::M2 => "m2",
            Mode::M3 => "m3",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Mode {
    type Err = ModeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "m1" | "1" => Ok(Mode::M1),
            "m2" | "2" => Ok(Mode::M2),
            "m3" | "3" => Ok(Mode::M3),
            other => Err(ModeError::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawModeConfig")]
pub struct ModeConfig {
    mode: Mode,
    k: usize,
    /// Extra redundant packets `delta`.
    extra: usize,
    /// Feedback latency in packet slots, `N_Re`.
    feedback_delay: usize,
}

#[derive(Deserialize)]
struct RawModeConfig {
    mode: Mode,
    k: usize,
    #[serde(default)]
    extra: usize,
    #[serde(default)]
    feedback_delay: usize,
}

impl TryFrom<RawModeConfig> for ModeConfig {
    type Error = ModeError;

    fn try_from(raw: RawModeConfig) -> Result<Self, Self::Error> {
        ModeConfig::new(raw.mode, raw.k, raw.extra, raw.feedback_delay)
    }
}

impl ModeConfig {
    pub fn new(mode: Mode, k: usize, extra: usize, feedback_delay: usize) -> Result<Self, ModeError> {
        if k == 0 {
            return Err(ModeError::InvalidConfig("k must be at least 1".into()));
        }
        if mode == Mode::M1 && extra != 0 {
            return Err(ModeError::InvalidConfig(format!("M1 takes no extra redundancy, got {extra}")));
        }
        Ok(ModeConfig {
            mode,
            k,
            extra,
            feedback_delay,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn extra(&self) -> usize {
        self.extra
    }

    pub fn feedback_delay(&self) -> usize {
        self.feedback_delay
    }

    pub fn max_retransmissions(&self) -> usize {
        MAX_RETRANSMISSIONS
    }

    /// Packets in the first transmission of a block.
    pub fn first_transmission_len(&self) -> usize {
        match self.mode {
            Mode::M1 | Mode::M2 => self.k,
            Mode::M3 => self.k + self.extra,
        }
    }

    /// The same configuration under another mode; `extra` is dropped for M1.
    pub fn with_mode(&self, mode: Mode) -> ModeConfig {
        let extra = if mode == Mode::M1 { 0 } else { self.extra };
        ModeConfig { mode, extra, ..*self }
    }
}

/// Probability that a block is decoded after at most one retransmission.
pub fn mode_success(cfg: &ModeConfig, eps: ErasureProb) -> f64 {
    let (k, d) = (cfg.k as i64, cfg.extra as i64);
    let e = eps.value();
    match cfg.mode {
        Mode::M1 => (1.0 - e * e).powi(k as i32),
        Mode::M2 => (0..=k)
            .map(|r| binom_pmf(r, k as u64, eps) * binom_cdf(d, (r + d) as u64, eps))
            .sum(),
        Mode::M3 => {
            let total = (k + d) as u64;
            let direct: f64 = (0..=d).map(|r| binom_pmf(r, total, eps)).sum();
            let retx: f64 = (d + 1..=k + d)
                .map(|r| (1.0 - e).powi((r - d) as i32) * binom_pmf(r, total, eps))
                .sum();
            direct + retx
        }
    }
}

/// M3 success through the substitution `epsilon_hat = 1 / (1 + epsilon)`:
/// `F(delta; k+delta, e) + (1-e)^k (1+e)^(k+delta) F(k-1; k+delta, e_hat)`.
pub fn m3_success_closed_form(k: usize, extra: usize, eps: ErasureProb) -> f64 {
    let e = eps.value();
    let total = (k + extra) as u64;
    let e_hat = ErasureProb::new(1.0 / (1.0 + e)).expect("1/(1+e) lies in [1/2, 1]");
    binom_cdf(extra as i64, total, eps)
        + (1.0 - e).powi(k as i32) * (1.0 + e).powi(total as i32) * binom_cdf(k as i64 - 1, total, e_hat)
}

/// Expected packets sent per block, first transmission plus retransmission.
pub fn mode_avg_code_length(cfg: &ModeConfig, eps: ErasureProb) -> f64 {
    let (k, d) = (cfg.k as f64, cfg.extra as f64);
    let e = eps.value();
    match cfg.mode {
        Mode::M1 => k + e * k,
        Mode::M2 => k + d + e * k - d * (1.0 - e).powi(cfg.k as i32),
        Mode::M3 => {
            let total = (cfg.k + cfg.extra) as u64;
            let unused: f64 = (0..=cfg.extra)
                .map(|r| (cfg.extra - r) as f64 * binom_pmf(r as i64, total, eps))
                .sum();
            unused + k + e * (k + d)
        }
    }
}

/// Published latency distribution of data packet `p` (1-based).
///
/// `r` ranges over the number of other data packets lost in the block, with
/// probability `f(r; k-1, epsilon)`.
pub fn mode_latency_dist(
    cfg: &ModeConfig,
    eps: ErasureProb,
    p: usize,
) -> Result<LatencyDistribution, ModeError> {
    let k = cfg.k;
    if p == 0 || p > k {
        return Err(ModeError::PacketIndex { p, k });
    }
    let e = eps.value();
    let (d, n_re) = (cfg.extra, cfg.feedback_delay);
    let lossy = (0..k).map(|r| {
        let mass = e * binom_pmf(r as i64, (k - 1) as u64, eps);
        let slot = match cfg.mode {
            Mode::M1 => k + r + 1 + n_re - p,
            Mode::M2 => k + d + r + 1 + n_re - p,
            Mode::M3 if r < d => k + d - p,
            Mode::M3 => k + r + 1 + n_re - p - d,
        };
        (slot as u64, mass)
    });
    Ok(LatencyDistribution::from_masses(
        std::iter::once((0, 1.0 - e)).chain(lossy),
    ))
}

/// Mean of [`mode_latency_dist`] averaged over `p = 1..=k`.
pub fn mode_avg_latency(cfg: &ModeConfig, eps: ErasureProb) -> f64 {
    let dists: Vec<LatencyDistribution> = (1..=cfg.k)
        .map(|p| mode_latency_dist(cfg, eps, p).expect("p in range"))
        .collect();
    avg_packet_latency(&dists).expect("k >= 1")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(v: f64) -> ErasureProb {
        ErasureProb::new(v).unwrap()
    }

    fn cfg(mode: Mode, k: usize, d: usize, n_re: usize) -> ModeConfig {
        ModeConfig::new(mode, k, d, n_re).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn config_validation() {
        assert!(ModeConfig::new(Mode::M1, 8, 2, 1).is_err());
        assert!(ModeConfig::new(Mode::M2, 0, 2, 1).is_err());
        let c = cfg(Mode::M3, 8, 2, 8);
        assert_eq!(c.first_transmission_len(), 10);
        assert_eq!(c.max_retransmissions(), 1);
        assert_eq!(c.with_mode(Mode::M1).extra(), 0);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ModeConfig>(&json).unwrap(), c);
        assert!(serde_json::from_str::<ModeConfig>(r#"{"mode":"m1","k":8,"extra":1}"#).is_err());
        assert_eq!("M2".parse::<Mode>().unwrap(), Mode::M2);
    }

    #[test]
    fn no_loss_always_succeeds() {
        for m in Mode::ALL {
            let c = cfg(m, 8, if m == Mode::M1 { 0 } else { 2 }, 3);
            assert_eq!(mode_success(&c, ErasureProb::ZERO), 1.0);
            assert_eq!(mode_avg_latency(&c, ErasureProb::ZERO), 0.0);
        }
        assert_eq!(mode_avg_code_length(&cfg(Mode::M1, 8, 0, 1), ErasureProb::ZERO), 8.0);
        assert_eq!(mode_avg_code_length(&cfg(Mode::M2, 8, 2, 1), ErasureProb::ZERO), 8.0);
        assert_eq!(mode_avg_code_length(&cfg(Mode::M3, 8, 2, 1), ErasureProb::ZERO), 10.0);
    }

    #[test]
    fn m1_success_equals_definition() {
        // Pr(X=0) + sum_r (1-e)^r Pr(X=r) with X ~ B(k, e)
        for e in [0.05f64, 0.2, 0.5] {
            let k = 8;
            let def: f64 = (0..=k)
                .map(|r| (1.0 - e).powi(r as i32) * binom_pmf(r, k as u64, eps(e)))
                .sum();
            assert!(close(mode_success(&cfg(Mode::M1, 8, 0, 0), eps(e)), def, 1e-14));
        }
        assert!(close(mode_success(&cfg(Mode::M1, 8, 0, 0), eps(0.2)), 0.96f64.powi(8), 1e-15));
        assert!(close(0.96f64.powi(8), 0.721390, 1e-6));
    }

    /// Enumerates every loss outcome for k = 1, delta = 1 at epsilon = 1/2.
    #[test]
    fn single_packet_enumeration() {
        let e = 0.5;
        // M2: data lost (1/2) -> 2 parities sent, need one of them: 3/4.
        let m2 = (1.0 - e) + e * (1.0 - e * e);
        // M3: 2 packets sent; both lost (1/4) -> one retransmission, must arrive.
        let m3 = (1.0 - e * e) + e * e * (1.0 - e);
        assert!(close(mode_success(&cfg(Mode::M2, 1, 1, 0), eps(e)), m2, 1e-15));
        assert!(close(mode_success(&cfg(Mode::M3, 1, 1, 0), eps(e)), m3, 1e-15));
        assert!(close(m2, 0.875, 1e-15) && close(m3, 0.875, 1e-15));
        // M3 length: 2 packets, plus one retransmitted when both are lost.
        let len = 2.0 + e * e * 1.0;
        assert!(close(mode_avg_code_length(&cfg(Mode::M3, 1, 1, 0), eps(e)), len, 1e-15));
        assert!(close(len, 2.25, 1e-15));
    }

    #[test]
    fn m2_and_m3_reference_values() {
        let m2 = mode_success(&cfg(Mode::M2, 8, 2, 1), eps(0.2));
        let m3 = mode_success(&cfg(Mode::M3, 8, 2, 1), eps(0.2));
        assert!(close(m2, 0.97468, 1e-5), "{m2}");
        assert!(close(m3, 0.91129, 1e-5), "{m3}");
        assert!(m2 > m3);
        let len = mode_avg_code_length(&cfg(Mode::M2, 8, 2, 1), eps(0.2));
        assert!(close(len, 11.6 - 2.0 * 0.8f64.powi(8), 1e-13));
        assert!(close(len, 11.264456, 1e-6));
        assert!(close(mode_avg_code_length(&cfg(Mode::M1, 8, 0, 1), eps(0.2)), 9.6, 1e-14));
    }

    #[test]
    fn m3_closed_form_matches_direct_sum() {
        for k in 1..=32 {
            for d in 0..=8 {
                for e in [0.01, 0.1, 0.25, 0.5, 0.75, 0.99] {
                    let direct = mode_success(&cfg(Mode::M3, k, d, 0), eps(e));
                    let closed = m3_success_closed_form(k, d, eps(e));
                    assert!(
                        (direct - closed).abs() <= 1e-9 * direct.abs().max(1e-300),
                        "k={k} d={d} e={e}: {direct} vs {closed}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_extra_collapses_to_m1() {
        for k in [1, 4, 8, 16] {
            for e in [0.05, 0.15, 0.3, 0.6] {
                for n_re in [0, 1, 8] {
                    let m1 = cfg(Mode::M1, k, 0, n_re);
                    for m in [Mode::M2, Mode::M3] {
                        let c = cfg(m, k, 0, n_re);
                        assert!(close(mode_success(&c, eps(e)), mode_success(&m1, eps(e)), 1e-12));
                        assert!(close(
                            mode_avg_code_length(&c, eps(e)),
                            mode_avg_code_length(&m1, eps(e)),
                            1e-12
                        ));
                        for p in 1..=k {
                            let a = mode_latency_dist(&c, eps(e), p).unwrap();
                            let b = mode_latency_dist(&m1, eps(e), p).unwrap();
                            assert!(close(a.mean(), b.mean(), 1e-12));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn latency_examples() {
        for m in Mode::ALL {
            let c = cfg(m, 4, if m == Mode::M1 { 0 } else { 1 }, 2);
            assert_eq!(mode_latency_dist(&c, ErasureProb::ZERO, 2).unwrap(), LatencyDistribution::point(0));
            assert!(mode_latency_dist(&c, eps(0.1), 0).is_err());
            assert!(mode_latency_dist(&c, eps(0.1), 5).is_err());
        }
        let d = mode_latency_dist(&cfg(Mode::M1, 2, 0, 1), eps(0.5), 1).unwrap();
        assert_eq!(d, LatencyDistribution::from_masses([(0, 0.5), (3, 0.25), (4, 0.25)]));

        let e = eps(0.15);
        let d = mode_latency_dist(&cfg(Mode::M3, 8, 2, 8), e, 4).unwrap();
        let f = |r: i64| 0.15 * binom_pmf(r, 7, e);
        assert!(close(d.mass(6), f(0) + f(1), 1e-15));
        for r in 2..=7 {
            assert!(close(d.mass(r as u64 + 11), f(r), 1e-15));
        }
        assert!(close(d.total(), 1.0, 1e-12));
    }

    #[test]
    fn latency_normalized() {
        for m in Mode::ALL {
            for k in [1, 2, 8, 12] {
                for d in [0, 1, 2, 5] {
                    if m == Mode::M1 && d > 0 {
                        continue;
                    }
                    for e in [0.01, 0.15, 0.3, 0.9] {
                        for n_re in [0, 1, 8] {
                            let c = cfg(m, k, d, n_re);
                            for p in 1..=k {
                                let t = mode_latency_dist(&c, eps(e), p).unwrap().total();
                                assert!(close(t, 1.0, 1e-12), "{m} k={k} d={d} e={e}: {t}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn success_nondecreasing_in_extra() {
        for m in [Mode::M2, Mode::M3] {
            for e in [0.05, 0.15, 0.3, 0.5] {
                let mut prev = 0.0;
                for d in 0..=8 {
                    let s = mode_success(&cfg(m, 8, d, 1), eps(e));
                    assert!(s >= prev - 1e-15, "{m} e={e} d={d}");
                    prev = s;
                }
            }
        }
    }

    #[test]
    fn m3_has_lowest_mean_latency_at_long_feedback() {
        let e = eps(0.15);
        let m1 = mode_avg_latency(&cfg(Mode::M1, 8, 0, 8), e);
        let m2 = mode_avg_latency(&cfg(Mode::M2, 8, 2, 8), e);
        let m3 = mode_avg_latency(&cfg(Mode::M3, 8, 2, 8), e);
        assert!(m3 < m1 && m3 < m2, "{m1} {m2} {m3}");
    }

    #[test]
    fn feedback_delay_slopes() {
        // Mean latency is affine in N_Re; finite differences give the slope.
        let e = eps(0.2);
        let slope = |c0: ModeConfig, c1: ModeConfig| mode_avg_latency(&c1, e) - mode_avg_latency(&c0, e);
        for m in [Mode::M1, Mode::M2] {
            let d = if m == Mode::M1 { 0 } else { 2 };
            let s = slope(cfg(m, 8, d, 100), cfg(m, 8, d, 101));
            assert!(close(s, 0.2, 1e-9), "{m}: {s}");
        }
        let s3 = slope(cfg(Mode::M3, 8, 2, 100), cfg(Mode::M3, 8, 2, 101));
        let p_retx = 1.0 - binom_cdf(1, 7, e);
        assert!(close(s3, 0.2 * p_retx, 1e-9));
        assert!(s3 < 0.2);
    }
}
