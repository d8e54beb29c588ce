//! Closed-form reliability and latency of RS-SNC and RS block codes without
//! retransmission, over an i.i.d. packet-erasure channel.
//!
//! Binomial probabilities are evaluated in the log domain. The exact first-block
//! success probability is computed by dynamic programming over the cumulative
//! erasure count of the window, which also yields the per-window increments
//! `Delta_l` used by the latency distribution.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::CodeParams;

/// Largest memory accepted by [`snc_success_exact`].
pub const EXACT_MAX_MEMORY: usize = 4;
/// Largest block length accepted by [`snc_success_exact`].
pub const EXACT_MAX_N: usize = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("erasure probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("exact evaluation is limited to L <= {EXACT_MAX_MEMORY}, n <= {EXACT_MAX_N}; got L={memory}, n={n}")]
    BudgetExceeded { n: usize, memory: usize },
    #[error("packet index {p} outside 1..={k}")]
    PacketIndex { p: usize, k: usize },
    #[error("need at least one latency distribution")]
    EmptyInput,
    #[error("invalid block code: {0}")]
    InvalidCode(String),
}

/// Packet erasure probability, validated to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ErasureProb(f64);

impl ErasureProb {
    pub const ZERO: ErasureProb = ErasureProb(0.0);
    pub const ONE: ErasureProb = ErasureProb(1.0);

    pub fn new(epsilon: f64) -> Result<Self, AnalyticError> {
        if (0.0..=1.0).contains(&epsilon) {
            Ok(ErasureProb(epsilon))
        } else {
            Err(AnalyticError::InvalidProbability(epsilon))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - epsilon`.
    #[inline]
    pub fn survival(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for ErasureProb {
    type Error = AnalyticError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        ErasureProb::new(v)
    }
}

impl From<ErasureProb> for f64 {
    fn from(e: ErasureProb) -> f64 {
        e.0
    }
}

/// `ln C(n, r)` for `r <= n`.
pub fn ln_choose(n: u64, r: u64) -> f64 {
    debug_assert!(r <= n);
    let r = r.min(n - r);
    (1..=r).map(|i| ((n - r + i) as f64 / i as f64).ln()).sum()
}

/// Exact binomial coefficient; panics on overflow of `u128`.
pub fn choose_exact(n: u64, r: u64) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 1..=r as u128 {
        // acc * (n - r + i) is divisible by i after the multiply.
        acc = acc
            .checked_mul(n as u128 - r as u128 + i)
            .expect("binomial coefficient overflows u128")
            / i;
    }
    acc
}

/// Checks `sum_{a+b=d} C(n,a) C(n,b) == C(2n,d)` for every `d <= 2n` in exact
/// integer arithmetic. Returns the first `d` that fails with both sides.
pub fn vandermonde_convolution_check(n: u64) -> Result<(), (u64, u128, u128)> {
    for d in 0..=2 * n {
        let lhs: u128 = (0..=d.min(n))
            .filter(|&a| d - a <= n)
            .map(|a| choose_exact(n, a) * choose_exact(n, d - a))
            .sum();
        let rhs = choose_exact(2 * n, d);
        if lhs != rhs {
            return Err((d, lhs, rhs));
        }
    }
    Ok(())
}

/// `f(r; n, epsilon) = C(n,r) (1-epsilon)^(n-r) epsilon^r`; zero for `r` outside `0..=n`.
pub fn binom_pmf(r: i64, n: u64, eps: ErasureProb) -> f64 {
    if r < 0 || r as u64 > n {
        return 0.0;
    }
    let r = r as u64;
    let e = eps.value();
    if e == 0.0 {
        return if r == 0 { 1.0 } else { 0.0 };
    }
    if e == 1.0 {
        return if r == n { 1.0 } else { 0.0 };
    }
    let ln = ln_choose(n, r) + (n - r) as f64 * (1.0 - e).ln() + r as f64 * e.ln();
    ln.exp()
}

/// `F(m; n, epsilon) = sum_{r=0..m} f(r; n, epsilon)`; 0 for `m < 0`, 1 for `m >= n`.
pub fn binom_cdf(m: i64, n: u64, eps: ErasureProb) -> f64 {
    if m < 0 {
        return 0.0;
    }
    if m as u64 >= n {
        return 1.0;
    }
    (0..=m).map(|r| binom_pmf(r, n, eps)).sum()
}

/// Per-window success increments of the exact first-block success probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSuccessTerms {
    /// `terms[l]` is the probability that the target block is first decodable
    /// with a window of `l + 1` blocks.
    pub terms: Vec<f64>,
    pub total: f64,
}

/// Exact first-block success probability of an `(n, k, L)` RS-SNC.
///
/// Term `l` sums `prod_j f(delta_j; n, epsilon)` over all `delta_0..delta_l`
/// whose cumulative sums exceed `(m+1)(n-k)` for every `m < l` and satisfy
/// `sum_{j<=l} delta_j <= (l+1)(n-k)`.
pub fn snc_success_exact(
    params: &CodeParams,
    eps: ErasureProb,
) -> Result<WindowSuccessTerms, AnalyticError> {
    let (n, memory) = (params.n(), params.memory());
    if memory > EXACT_MAX_MEMORY || n > EXACT_MAX_N {
        return Err(AnalyticError::BudgetExceeded { n, memory });
    }
    let r = params.redundancy();
    let pmf: Vec<f64> = (0..=n).map(|d| binom_pmf(d as i64, n as u64, eps)).collect();
    let max_sum = (memory + 1) * n;

    // carry[s]: probability that every shorter window failed and the
    // cumulative erasure count so far is s.
    let mut carry = vec![0.0; max_sum + 1];
    carry[0] = 1.0;
    let mut terms = Vec::with_capacity(memory + 1);
    for j in 0..=memory {
        let threshold = (j + 1) * r;
        let mut next = vec![0.0; max_sum + 1];
        let mut term = 0.0;
        for (s, &mass) in carry.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (d, &pd) in pmf.iter().enumerate() {
                let total = s + d;
                if total <= threshold {
                    term += mass * pd;
                } else {
                    next[total] += mass * pd;
                }
            }
        }
        terms.push(term);
        carry = next;
    }
    let total = terms.iter().sum();
    Ok(WindowSuccessTerms { terms, total })
}

/// Lower bound on the first-block success probability:
/// `F(n-k; n) + sum_{d=n-k+1..n} f(d; n) F((L+1)(n-k) - d; L n)`.
pub fn snc_success_lower_bound(params: &CodeParams, eps: ErasureProb) -> f64 {
    let (n, r, memory) = (params.n() as i64, params.redundancy() as i64, params.memory() as i64);
    let direct = binom_cdf(r, n as u64, eps);
    let helped: f64 = (r + 1..=n)
        .map(|d0| binom_pmf(d0, n as u64, eps) * binom_cdf((memory + 1) * r - d0, (memory * n) as u64, eps))
        .sum();
    direct + helped
}

/// Block success of an `(n, k)` RS block code, `F(n-k; n)`.
pub fn bc_success(n: usize, k: usize, eps: ErasureProb) -> f64 {
    binom_cdf(n as i64 - k as i64, n as u64, eps)
}

/// Success of the `((L+1)n, (L+1)k)` RS block code spanning the same window.
pub fn comparable_long_bc_success(params: &CodeParams, eps: ErasureProb) -> f64 {
    let blocks = params.window_blocks();
    bc_success(blocks * params.n(), blocks * params.k(), eps)
}

/// Finite probability mass function over integer packet latencies (slots).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyDistribution {
    mass: BTreeMap<u64, f64>,
}

impl LatencyDistribution {
    /// Builds a distribution, merging masses at equal latencies and dropping zeros.
    pub fn from_masses<I>(masses: I) -> Self
    where
        I: IntoIterator<Item = (u64, f64)>,
    {
        let mut mass = BTreeMap::new();
        for (d, m) in masses {
            if m != 0.0 {
                *mass.entry(d).or_insert(0.0) += m;
            }
        }
        LatencyDistribution { mass }
    }

    pub fn point(d: u64) -> Self {
        Self::from_masses([(d, 1.0)])
    }

    pub fn mass(&self, d: u64) -> f64 {
        self.mass.get(&d).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.mass.iter().map(|(&d, &m)| (d, m))
    }

    pub fn total(&self) -> f64 {
        self.mass.values().sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(d, m)| d as f64 * m).sum()
    }
}

fn check_packet(p: usize, k: usize) -> Result<(), AnalyticError> {
    if p == 0 || p > k {
        return Err(AnalyticError::PacketIndex { p, k });
    }
    Ok(())
}

/// Latency of data packet `p` (1-based) of a systematic RS-SNC.
///
/// The packet arrives directly with probability `1 - epsilon`. Otherwise it
/// waits for the end of block `l` with probability `epsilon * Delta_l`; the
/// remaining mass, which includes undecodable events, sits at the end of the
/// last block of the window.
pub fn snc_latency_dist(
    params: &CodeParams,
    eps: ErasureProb,
    p: usize,
) -> Result<LatencyDistribution, AnalyticError> {
    check_packet(p, params.k())?;
    let terms = snc_success_exact(params, eps)?;
    let (n, memory) = (params.n() as u64, params.memory());
    let e = eps.value();
    let p = p as u64;
    let mut masses = vec![(0, 1.0 - e)];
    let mut assigned = 0.0;
    for (l, &delta) in terms.terms.iter().take(memory).enumerate() {
        masses.push(((l as u64 + 1) * n - p, e * delta));
        assigned += delta;
    }
    masses.push(((memory as u64 + 1) * n - p, e * (1.0 - assigned)));
    Ok(LatencyDistribution::from_masses(masses))
}

/// Latency of data packet `p` of an `(n_bc, k_bc)` systematic RS block code.
pub fn bc_latency_dist(
    n_bc: usize,
    k_bc: usize,
    eps: ErasureProb,
    p: usize,
) -> Result<LatencyDistribution, AnalyticError> {
    if k_bc == 0 || k_bc > n_bc {
        return Err(AnalyticError::InvalidCode(format!("n={n_bc} k={k_bc}")));
    }
    check_packet(p, k_bc)?;
    let e = eps.value();
    Ok(LatencyDistribution::from_masses([
        (0, 1.0 - e),
        ((n_bc - p) as u64, e),
    ]))
}

/// Mean latency averaged over the data packets of a block.
pub fn avg_packet_latency(dists: &[LatencyDistribution]) -> Result<f64, AnalyticError> {
    if dists.is_empty() {
        return Err(AnalyticError::EmptyInput);
    }
    Ok(dists.iter().map(LatencyDistribution::mean).sum::<f64>() / dists.len() as f64)
}

/// Average packet latency of the RS-SNC, over `p = 1..=k`.
pub fn snc_avg_latency(params: &CodeParams, eps: ErasureProb) -> Result<f64, AnalyticError> {
    let dists = (1..=params.k())
        .map(|p| snc_latency_dist(params, eps, p))
        .collect::<Result<Vec<_>, _>>()?;
    avg_packet_latency(&dists)
}

/// Average packet latency of an `(n, k)` RS block code.
pub fn bc_avg_latency(n: usize, k: usize, eps: ErasureProb) -> Result<f64, AnalyticError> {
    let dists = (1..=k)
        .map(|p| bc_latency_dist(n, k, eps, p))
        .collect::<Result<Vec<_>, _>>()?;
    avg_packet_latency(&dists)
}
