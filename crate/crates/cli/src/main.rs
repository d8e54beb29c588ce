use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snc_cli::config::{EpsilonGrid, Preset, SweepConfig, DEFAULT_TRIALS, OUT_DIR_ENV};
use snc_cli::verify::{self, Level, VerifyOptions};
use snc_cli::CliError;

#[derive(Parser)]
#[command(name = "snc", version = concat!("v", env!("CARGO_PKG_VERSION"), "-", env!("SNC_GIT_DESCRIBE")), about = "Sliding network coding experiments")]
struct Cli {
    /// Worker threads for Monte Carlo batches (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a JSON config, a preset, or flags.
    Run(RunArgs),
    /// Run the self-check suite.
    Verify(VerifyArgs),
    /// Reproduce one of the figure sweeps.
    Preset(PresetArgs),
}

#[derive(Args, Default)]
struct Overrides {
    /// Epsilon grid as min:max:step.
    #[arg(long)]
    epsilon: Option<String>,
    /// Monte Carlo trials per simulated point.
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Also write the generator matrices of each code as JSON.
    #[arg(long)]
    archive_generators: bool,
}

#[derive(Args)]
struct RunArgs {
    /// JSON sweep config; its keys override the preset or defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a figure preset.
    #[arg(long)]
    preset: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct PresetArgs {
    /// fig1, fig2, fig3 or fig4.
    name: String,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum, default_value = "quick")]
    level: Level,
    /// Trials per simulated check (exhaustive level).
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fault injection: swap in generators with P_1 = P_0.
    #[arg(long, hide = true)]
    inject_tampered_generators: bool,
}

fn apply(mut cfg: SweepConfig, o: &Overrides) -> Result<SweepConfig, CliError> {
    if let Some(grid) = &o.epsilon {
        cfg.epsilon = grid.parse::<EpsilonGrid>()?;
    }
    if let Some(t) = o.trials {
        cfg.trials = t;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(out) = &o.out {
        cfg.out = Some(out.clone());
    }
    if o.archive_generators {
        cfg.archive_generators = true;
    }
    Ok(cfg)
}

fn build_config(args: &RunArgs) -> Result<SweepConfig, CliError> {
    let base = match &args.preset {
        Some(name) => name.parse::<Preset>()?.config(),
        None => SweepConfig::default(),
    };
    let merged = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            base.merge_json(&text)?
        }
        None => base,
    };
    apply(merged, &args.overrides)
}

fn run_sweep(cfg: SweepConfig) -> Result<(), CliError> {
    let summary = snc_cli::run(&cfg)?;
    let mut out = io::stdout().lock();
    for path in summary.csv.iter().chain(&summary.sidecar).chain(&summary.archives) {
        writeln!(out, "wrote {}", path.display()).ok();
    }
    writeln!(out, "{} rows", summary.rows).ok();
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Run(args) => run_sweep(build_config(&args)?),
        Command::Preset(args) => {
            let cfg = apply(args.name.parse::<Preset>()?.config(), &args.overrides)?;
            run_sweep(cfg)
        }
        Command::Verify(args) => {
            let report = verify::run(&VerifyOptions {
                level: args.level,
                trials: args.trials,
                seed: args.seed,
                tampered_generators: args.inject_tampered_generators,
            });
            report.print(&mut io::stdout().lock()).ok();
            if report.passed() {
                Ok(())
            } else {
                let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
                Err(CliError::Check(names.join("; ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
