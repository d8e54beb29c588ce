//! Self-check suite behind `snc verify`.

use std::fmt;
use std::io::{self, Write};

use snc_core::analytic::{self, ErasureProb};
use snc_core::channel_sim;
use snc_core::code::{self, CodeParams, ErasurePattern, GeneratorSet, MdpVerdict};
use snc_core::modes::{self, Mode, ModeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Level {
    Quick,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status}  {:<44} {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Measured quantities that are reported but not gated.
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn print(&self, out: &mut impl Write) -> io::Result<()> {
        for c in &self.checks {
            writeln!(out, "{c}")?;
        }
        for n in &self.notes {
            writeln!(out, "NOTE  {n}")?;
        }
        let failed = self.failures().count();
        writeln!(out, "{} checks, {} failed", self.checks.len(), failed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    /// Records a check that passes when `max_dev <= tol`.
    fn deviation(&mut self, name: &str, max_dev: f64, tol: f64) {
        let passed = max_dev <= tol;
        self.push(name, passed, format!("max deviation {max_dev:.3e} (tolerance {tol:.0e})"));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub level: Level,
    pub trials: u64,
    pub seed: u64,
    /// Replaces the `(3,2,1)` generators with `P_1 = P_0` before the MDP check.
    pub tampered_generators: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            level: Level::Quick,
            trials: 100_000,
            seed: 1,
            tampered_generators: false,
        }
    }
}

fn eps(v: f64) -> ErasureProb {
    ErasureProb::new(v).expect("grid value in [0, 1]")
}

fn grid(lo: f64, hi: f64, steps: usize) -> Vec<ErasureProb> {
    (0..=steps)
        .map(|i| eps(lo + (hi - lo) * i as f64 / steps as f64))
        .collect()
}

fn gf256(n: usize, k: usize, memory: usize) -> CodeParams {
    CodeParams::over_gf256(n, k, memory).expect("valid code")
}

fn mode(m: Mode, k: usize, extra: usize, n_re: usize) -> ModeConfig {
    ModeConfig::new(m, k, extra, n_re).expect("valid mode")
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn run(opts: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport::default();
    quick_checks(&mut report);
    if opts.level == Level::Exhaustive {
        codec_checks(&mut report, opts.tampered_generators);
        simulation_checks(&mut report, opts.trials, opts.seed);
    }
    report
}

fn quick_checks(report: &mut VerifyReport) {
    let unit = grid(0.0, 1.0, 20);
    let figures = grid(0.1, 0.3, 8);

    let m1 = unit.iter().flat_map(|&e| {
        (1..=16).map(move |k| {
            // P(all r first-round losses are recovered by the r resent packets)
            let x = e.value();
            let direct: f64 = (0..=k)
                .map(|r| analytic::binom_pmf(r as i64, k as u64, e) * (1.0 - x).powi(r as i32))
                .sum();
            modes::mode_success(&mode(Mode::M1, k, 0, 1), e) - direct
        })
    });
    report.deviation("m1 success equals its definitional sum", max_abs(m1), 1e-12);

    let mut m3 = 0.0f64;
    for k in 1..=32 {
        for extra in 0..=8 {
            for &e in &unit[1..unit.len() - 1] {
                let direct = modes::mode_success(&mode(Mode::M3, k, extra, 1), e);
                let closed = modes::m3_success_closed_form(k, extra, e);
                m3 = m3.max((direct - closed).abs() / direct.abs().max(1e-300));
            }
        }
    }
    report.deviation("m3 closed form equals direct sum (relative)", m3, 1e-9);

    let mut collapse = 0.0f64;
    for &e in &unit {
        for n_re in [0, 1, 8] {
            let base = mode(Mode::M1, 8, 0, n_re);
            for m in [Mode::M2, Mode::M3] {
                let other = base.with_mode(m);
                collapse = collapse
                    .max((modes::mode_success(&other, e) - modes::mode_success(&base, e)).abs())
                    .max((modes::mode_avg_code_length(&other, e) - modes::mode_avg_code_length(&base, e)).abs())
                    .max((modes::mode_avg_latency(&other, e) - modes::mode_avg_latency(&base, e)).abs());
            }
        }
    }
    report.deviation("delta = 0 reduces m2 and m3 to m1", collapse, 1e-12);

    let mut norm = 0.0f64;
    for &e in &unit {
        for m in Mode::ALL {
            let cfg = mode(m, 8, if m == Mode::M1 { 0 } else { 2 }, 8);
            for p in 1..=8 {
                norm = norm.max((modes::mode_latency_dist(&cfg, e, p).unwrap().total() - 1.0).abs());
            }
        }
        for params in [gf256(3, 2, 1), gf256(12, 8, 2), gf256(18, 12, 2)] {
            for p in 1..=params.k() {
                norm = norm.max((analytic::snc_latency_dist(&params, e, p).unwrap().total() - 1.0).abs());
            }
        }
    }
    report.deviation("latency distributions sum to one", norm, 1e-12);

    let identity: Vec<_> = (0..=20).filter_map(|n| analytic::vandermonde_convolution_check(n).err()).collect();
    report.push(
        "vandermonde identity exact for n <= 20",
        identity.is_empty(),
        match identity.first() {
            None => "21 values of n, exact integer arithmetic".to_string(),
            Some((n, lhs, rhs)) => format!("n = {n}: {lhs} != {rhs}"),
        },
    );

    let tight = [gf256(12, 8, 1), gf256(3, 2, 1)].into_iter().flat_map(|params| {
        unit.iter().map(move |&e| {
            analytic::snc_success_exact(&params, e).unwrap().total - analytic::snc_success_lower_bound(&params, e)
        })
    });
    report.deviation("bound equals exact at L = 1", max_abs(tight), 1e-12);

    let mut worst = f64::INFINITY;
    let mut gap = 0.0f64;
    for params in [gf256(3, 2, 2), gf256(4, 2, 2), gf256(12, 8, 2), gf256(18, 12, 2)] {
        for &e in &unit {
            let d = analytic::snc_success_exact(&params, e).unwrap().total - analytic::snc_success_lower_bound(&params, e);
            worst = worst.min(d);
            gap = gap.max(d);
        }
    }
    report.push(
        "bound never exceeds exact at L = 2",
        worst >= -1e-12 && gap > 0.0,
        format!("min(exact - bound) {worst:.3e}, largest gap {gap:.3e}"),
    );

    let mut ordering = f64::INFINITY;
    let mut latency = f64::INFINITY;
    for params in [gf256(12, 8, 1), gf256(12, 8, 2), gf256(18, 12, 2)] {
        let (n, k, blocks) = (params.n(), params.k(), params.window_blocks());
        for &e in &figures {
            let exact = analytic::snc_success_exact(&params, e).unwrap().total;
            let long = analytic::comparable_long_bc_success(&params, e);
            let short = analytic::bc_success(n, k, e);
            ordering = ordering.min(exact - long).min(long - short);
            let snc = analytic::snc_avg_latency(&params, e).unwrap();
            let bc_short = analytic::bc_avg_latency(n, k, e).unwrap();
            let bc_long = analytic::bc_avg_latency(blocks * n, blocks * k, e).unwrap();
            latency = latency.min(snc - bc_short).min(bc_long - snc);
        }
    }
    report.push(
        "success: snc >= long block >= short block",
        ordering >= -1e-12,
        format!("smallest margin {ordering:.3e}"),
    );
    report.push(
        "latency: short block <= snc <= long block",
        latency >= -1e-12,
        format!("smallest margin {latency:.3e}"),
    );

    let refs = [
        (modes::mode_success(&mode(Mode::M1, 8, 0, 1), eps(0.2)), 0.721390, 5e-7),
        (modes::mode_avg_code_length(&mode(Mode::M2, 8, 2, 1), eps(0.2)), 11.264456, 5e-7),
        (modes::mode_success(&mode(Mode::M2, 8, 2, 1), eps(0.2)), 0.97468, 5e-6),
        (modes::mode_success(&mode(Mode::M3, 8, 2, 1), eps(0.2)), 0.91129, 5e-6),
        (analytic::snc_success_exact(&gf256(3, 2, 1), eps(0.1)).unwrap().total, 0.991683, 5e-7),
        (analytic::snc_success_lower_bound(&gf256(3, 2, 2), eps(0.1)), 0.996446, 5e-7),
    ];
    let worst_ref = refs.iter().map(|(v, r, t)| (v - r).abs() / t).fold(0.0, f64::max);
    report.push(
        "reference values",
        worst_ref <= 1.0,
        format!("worst deviation {worst_ref:.3} of the printed precision"),
    );
}

pub fn pattern_string(p: &ErasurePattern) -> String {
    (0..p.blocks())
        .map(|b| p.mask(b).iter().map(|&e| if e { 'x' } else { '.' }).collect::<String>())
        .collect::<Vec<_>>()
        .join("|")
}

/// The `(3,2,1)` GF(16) code with its second parity matrix replaced by the first.
pub fn tampered_generators() -> GeneratorSet {
    let params = CodeParams::new(3, 2, 1, 16).expect("valid code");
    let good = code::build_generators(params, 0).expect("generators exist");
    GeneratorSet::from_parity(
        params,
        vec![good.parity(0).clone(), good.parity(0).clone()],
        good.points().to_vec(),
        good.seed(),
    )
    .expect("shapes match")
}

fn codec_checks(report: &mut VerifyReport, tampered: bool) {
    for memory in [1, 2] {
        let params = CodeParams::new(3, 2, memory, 16).expect("valid code");
        let gens = if tampered && memory == 1 {
            Ok(tampered_generators())
        } else {
            code::build_generators(params, 0)
        };
        let name = format!("is_mdp (3,2,{memory}) over GF(16)");
        let gens = match gens {
            Ok(g) => g,
            Err(e) => {
                report.push(&name, false, e.to_string());
                continue;
            }
        };
        match code::is_mdp(&gens) {
            Ok(MdpVerdict::Mdp) => report.push(&name, true, format!("point seed {}", gens.seed())),
            Ok(MdpVerdict::Counterexample(d)) => report.push(
                &name,
                false,
                format!(
                    "counterexample pattern {} (x = erased): count rule {:?}, decoder {:?}",
                    pattern_string(&d.pattern),
                    d.by_count,
                    d.by_decoder
                ),
            ),
            Err(e) => report.push(&name, false, e.to_string()),
        }
        let name = format!("decoder agrees with count rule (3,2,{memory})");
        match code::check_decoder_agreement(&gens) {
            Ok(a) => report.push(
                &name,
                a.disagreements.is_empty(),
                format!("{} patterns, {} disagreements", a.patterns, a.disagreements.len()),
            ),
            Err(e) => report.push(&name, false, e.to_string()),
        }
    }
}

/// `|estimate - target| / stderr`; a zero stderr demands an exact match.
pub fn z_score(estimate: f64, stderr: f64, target: f64) -> f64 {
    let diff = (estimate - target).abs();
    if stderr > 0.0 {
        diff / stderr
    } else if diff <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// [`z_score`] for a rate, with the stderr floored at the binomial stderr of
/// the target so that a run with zero observed events is still comparable.
pub fn rate_z_score(estimate: f64, stderr: f64, target: f64, trials: u64) -> f64 {
    let null = (target * (1.0 - target) / trials as f64).sqrt();
    z_score(estimate, stderr.max(null), target)
}

fn simulation_checks(report: &mut VerifyReport, trials: u64, seed: u64) {
    let mut z = 0.0f64;
    for params in [gf256(3, 2, 1), gf256(12, 8, 1), gf256(12, 8, 2)] {
        for e in [0.1, 0.2, 0.3] {
            let r = channel_sim::sim_snc_first_block(&params, eps(e), trials, seed).expect("valid run");
            let exact = analytic::snc_success_exact(&params, eps(e)).unwrap().total;
            z = z.max(rate_z_score(r.error_rate, r.error_stderr, 1.0 - exact, trials));
        }
    }
    report.push(
        "snc error rate: simulation vs exact",
        z <= 4.0,
        format!("max |z| {z:.2} at {trials} trials"),
    );

    let params = gf256(10, 8, 0);
    let (mut zs, mut zl, mut zd) = (0.0f64, 0.0f64, 0.0f64);
    for e in [0.15, 0.2, 0.3] {
        for (m, extra) in [(Mode::M1, 0), (Mode::M2, 2), (Mode::M3, 2), (Mode::M3, 0)] {
            for n_re in [1, 8] {
                let cfg = mode(m, 8, extra, n_re);
                let r = channel_sim::sim_mode(&params, &cfg, eps(e), trials, seed).expect("valid run");
                zs = zs.max(rate_z_score(r.success_rate(), r.error_stderr, modes::mode_success(&cfg, eps(e)), trials));
                zl = zl.max(z_score(r.avg_code_length, r.code_length_stderr, modes::mode_avg_code_length(&cfg, eps(e))));
                let published = modes::mode_avg_latency(&cfg, eps(e));
                if m == Mode::M3 && extra > 0 {
                    report.notes.push(format!(
                        "m3 d={extra} N={n_re} eps={e}: published mean latency {published:.4}, simulated {:.4} +- {:.4}",
                        r.avg_latency, r.latency_stderr
                    ));
                } else {
                    zd = zd.max(z_score(r.avg_latency, r.latency_stderr, published));
                }
            }
        }
    }
    report.push("mode success: simulation vs formula", zs <= 4.0, format!("max |z| {zs:.2}"));
    report.push("mode code length: simulation vs formula", zl <= 4.0, format!("max |z| {zl:.2}"));
    report.push(
        "mode latency (m1, m2, m3 at d=0): sim vs formula",
        zd <= 4.0,
        format!("max |z| {zd:.2}"),
    );

    let mut disagreements = 0;
    let mut checks = 0;
    for memory in [1, 2] {
        let params = CodeParams::new(3, 2, memory, 16).expect("valid code");
        let gens = code::build_generators(params, 0).expect("generators exist");
        let r = channel_sim::sim_snc_first_block_checked(&params, eps(0.3), trials, seed, &gens, 10)
            .expect("valid run");
        disagreements += r.decoder_disagreements;
        checks += r.decoder_checks;
    }
    report.push(
        "simulated windows: decoder vs count rule",
        disagreements == 0,
        format!("{checks} decoded windows, {disagreements} disagreements"),
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let r = run(&VerifyOptions::default());
        assert!(r.passed(), "{:#?}", r.failures().collect::<Vec<_>>());
        assert!(r.checks.len() >= 10);
    }

    #[test]
    fn tampered_generators_fail_with_counterexample() {
        let mut r = VerifyReport::default();
        codec_checks(&mut r, true);
        let failed: Vec<_> = r.failures().collect();
        assert!(!failed.is_empty());
        assert!(failed.iter().any(|c| c.detail.contains("counterexample pattern")));
    }

    #[test]
    fn pattern_rendering() {
        let p = ErasurePattern::from_bits(3, 2, 0b100_011);
        assert_eq!(pattern_string(&p), "xx.|..x");
    }
}
