use snc_core::analytic::{self, ErasureProb};
use snc_core::channel_sim::{self, SimReport};
use snc_core::code::{self, CodeParams};
use snc_core::modes::{self, Mode, ModeConfig};

const TRIALS: u64 = 200_000;

fn eps(v: f64) -> ErasureProb {
    ErasureProb::new(v).unwrap()
}

fn within(estimate: f64, stderr: f64, target: f64, what: &str) {
    let tol = 4.0 * stderr.max(1e-12);
    assert!(
        (estimate - target).abs() <= tol,
        "{what}: estimate {estimate} target {target} tolerance {tol}"
    );
}

fn choose(n: u64, r: u64) -> f64 {
    analytic::choose_exact(n, r) as f64
}

fn binom(r: u64, n: u64, e: f64) -> f64 {
    if r > n {
        return 0.0;
    }
    choose(n, r) * e.powi(r as i32) * (1.0 - e).powi((n - r) as i32)
}

/// Expected latency of packet `p` of an RS-SNC by enumerating every erasure
/// pattern of the window.
fn snc_latency_by_enumeration(n: usize, k: usize, memory: usize, e: f64, p: usize) -> f64 {
    let blocks = memory + 1;
    let bits = n * blocks;
    let mut mean = 0.0;
    for mask in 0u64..(1 << bits) {
        let lost = mask.count_ones() as i32;
        let prob = e.powi(lost) * (1.0 - e).powi(bits as i32 - lost);
        if mask & (1 << (p - 1)) == 0 {
            continue;
        }
        let mut cumulative = 0;
        let mut waited = blocks;
        for j in 0..blocks {
            cumulative += ((mask >> (j * n)) & ((1 << n) - 1)).count_ones() as usize;
            if cumulative <= (j + 1) * (n - k) {
                waited = j + 1;
                break;
            }
        }
        mean += prob * (waited * n - p) as f64;
    }
    mean
}

/// Expected latency of packet `p` under the mode protocols at `L = 0`:
/// the block completes at the end of its first transmission when nothing
/// has to be resent, otherwise at the end of the retransmission burst.
fn mode_latency_by_enumeration(cfg: &ModeConfig, e: f64, p: usize) -> f64 {
    let (k, d, n_re) = (cfg.k() as u64, cfg.extra() as u64, cfg.feedback_delay() as u64);
    let parity = if cfg.mode() == Mode::M3 { d } else { 0 };
    let mut mean = 0.0;
    for a in 0..k {
        for b in 0..=parity {
            let prob = e * binom(a, k - 1, e) * binom(b, parity, e);
            let lost = 1 + a + b;
            let slot = match cfg.mode() {
                Mode::M1 => k + n_re + lost,
                Mode::M2 => k + n_re + lost + d,
                Mode::M3 if lost <= d => k + d,
                Mode::M3 => k + d + n_re + (lost - d),
            };
            mean += prob * (slot - p as u64) as f64;
        }
    }
    mean
}

fn assert_per_packet(report: &SimReport, expected: impl Fn(usize) -> f64, what: &str) {
    for (i, (&m, &s)) in report
        .per_packet_latency
        .iter()
        .zip(&report.per_packet_latency_stderr)
        .enumerate()
    {
        within(m, s, expected(i + 1), &format!("{what} p={}", i + 1));
    }
}

#[test]
fn snc_error_rate_matches_exact_success() {
    for (n, k, memory) in [(3, 2, 1), (3, 2, 2), (12, 8, 1), (12, 8, 2)] {
        let params = CodeParams::over_gf256(n, k, memory).unwrap();
        for e in [0.1, 0.2, 0.3] {
            let r = channel_sim::sim_snc_first_block(&params, eps(e), TRIALS, 17).unwrap();
            let exact = analytic::snc_success_exact(&params, eps(e)).unwrap().total;
            within(r.error_rate, r.error_stderr, 1.0 - exact, &format!("({n},{k},{memory}) eps {e}"));
        }
    }
}

#[test]
fn snc_example_3_2_1() {
    let params = CodeParams::over_gf256(3, 2, 1).unwrap();
    let r = channel_sim::sim_snc_first_block(&params, eps(0.1), 1_000_000, 2024).unwrap();
    within(r.error_rate, r.error_stderr, 1.0 - 0.991683, "(3,2,1) eps 0.1");
}

#[test]
fn snc_latency_matches_enumeration() {
    for (n, k, memory, e) in [(3, 2, 1, 0.1), (3, 2, 2, 0.3), (4, 2, 1, 0.25)] {
        let params = CodeParams::over_gf256(n, k, memory).unwrap();
        let r = channel_sim::sim_snc_latency(&params, eps(e), TRIALS, 5).unwrap();
        assert_per_packet(&r, |p| snc_latency_by_enumeration(n, k, memory, e, p), &format!("({n},{k},{memory})"));
    }
}

#[test]
fn snc_latency_lies_between_block_codes() {
    let params = CodeParams::over_gf256(12, 8, 2).unwrap();
    let r = channel_sim::sim_snc_latency(&params, eps(0.25), TRIALS, 8).unwrap();
    let short = analytic::bc_avg_latency(12, 8, eps(0.25)).unwrap();
    let long = analytic::bc_avg_latency(36, 24, eps(0.25)).unwrap();
    assert!(r.avg_latency + 4.0 * r.latency_stderr >= short, "{} < {short}", r.avg_latency);
    assert!(r.avg_latency - 4.0 * r.latency_stderr <= long, "{} > {long}", r.avg_latency);
}

#[test]
fn mode_success_and_length_match_formulas() {
    let params = CodeParams::over_gf256(12, 8, 0).unwrap();
    for e in [0.15, 0.2, 0.3] {
        for (mode, extra) in [(Mode::M1, 0), (Mode::M2, 2), (Mode::M3, 2), (Mode::M2, 0), (Mode::M3, 0)] {
            let cfg = ModeConfig::new(mode, 8, extra, 3).unwrap();
            let r = channel_sim::sim_mode(&params, &cfg, eps(e), TRIALS, 31).unwrap();
            let what = format!("{mode} d={extra} eps {e}");
            within(r.success_rate(), r.error_stderr, modes::mode_success(&cfg, eps(e)), &what);
            within(r.avg_code_length, r.code_length_stderr, modes::mode_avg_code_length(&cfg, eps(e)), &what);
        }
    }
}

#[test]
fn mode_latency_matches_protocol_enumeration() {
    let params = CodeParams::over_gf256(12, 8, 0).unwrap();
    for (mode, extra, n_re) in [(Mode::M1, 0, 1), (Mode::M2, 2, 8), (Mode::M3, 2, 8), (Mode::M3, 3, 1)] {
        let cfg = ModeConfig::new(mode, 8, extra, n_re).unwrap();
        let r = channel_sim::sim_mode(&params, &cfg, eps(0.2), TRIALS, 77).unwrap();
        assert_per_packet(&r, |p| mode_latency_by_enumeration(&cfg, 0.2, p), &format!("{mode} d={extra}"));
    }
}

#[test]
fn published_latency_agrees_with_protocol_where_it_should() {
    // M1 and M2 at any delta, and M3 at delta = 0, follow the published pmfs.
    for (mode, extra) in [(Mode::M1, 0), (Mode::M2, 2), (Mode::M3, 0)] {
        let cfg = ModeConfig::new(mode, 8, extra, 8).unwrap();
        for p in 1..=8 {
            let published = modes::mode_latency_dist(&cfg, eps(0.2), p).unwrap().mean();
            let oracle = mode_latency_by_enumeration(&cfg, 0.2, p);
            assert!((published - oracle).abs() < 1e-12, "{mode} p={p}: {published} vs {oracle}");
        }
    }
}

#[test]
fn memory_lets_surplus_rescue_failed_blocks() {
    let e = eps(0.3);
    let m1 = ModeConfig::new(Mode::M1, 8, 0, 1).unwrap();
    let m2 = ModeConfig::new(Mode::M2, 8, 2, 1).unwrap();
    let l0 = CodeParams::over_gf256(12, 8, 0).unwrap();
    let l1 = CodeParams::over_gf256(12, 8, 1).unwrap();
    let run = |p: &CodeParams, c: &ModeConfig| channel_sim::sim_mode(p, c, e, TRIALS, 3).unwrap();
    // M1 never receives more than k packets, so later blocks carry no surplus.
    assert_eq!(run(&l0, &m1).failures, run(&l1, &m1).failures);
    assert!(run(&l1, &m2).failures < run(&l0, &m2).failures);
}

#[test]
fn simulated_error_grows_with_erasure_probability() {
    let params = CodeParams::over_gf256(12, 8, 1).unwrap();
    let reports: Vec<SimReport> = [0.1, 0.15, 0.2, 0.25, 0.3]
        .iter()
        .map(|&e| channel_sim::sim_snc_first_block(&params, eps(e), TRIALS, 12).unwrap())
        .collect();
    for w in reports.windows(2) {
        let slack = 4.0 * (w[0].error_stderr.powi(2) + w[1].error_stderr.powi(2)).sqrt();
        assert!(w[1].error_rate + slack >= w[0].error_rate);
    }
}

#[test]
fn decoder_cross_check_on_verified_generators() {
    for memory in [1, 2] {
        let params = CodeParams::new(3, 2, memory, 16).unwrap();
        let gens = code::build_generators(params, 0).unwrap();
        let r = channel_sim::sim_snc_first_block_checked(&params, eps(0.3), 50_000, 9, &gens, 5).unwrap();
        assert_eq!(r.decoder_checks, 10_000);
        assert_eq!(r.decoder_disagreements, 0);
    }
}

#[test]
fn report_serializes_with_config_echo() {
    let params = CodeParams::over_gf256(12, 8, 1).unwrap();
    let cfg = ModeConfig::new(Mode::M3, 8, 2, 8).unwrap();
    let r = channel_sim::sim_mode(&params, &cfg, eps(0.2), 1000, 1).unwrap();
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["config"]["kind"], "mode");
    assert_eq!(json["seed"], 1);
    assert!(json["config"]["window_convention"].as_str().unwrap().contains("surplus"));
}
