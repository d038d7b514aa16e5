use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lineage_cli::acceptance::run_selftest;
use lineage_cli::config::ExperimentConfig;
use lineage_cli::error::{CliError, Result};
use lineage_cli::runners;

/// Simulate Bellman-Harris branching trees, sample ancestral lineages under
/// the uniform-marker, Palm and leftmost rules, and verify the exact lineage
/// laws numerically and by Monte Carlo.
#[derive(Parser)]
#[command(name = "lineage", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the worker thread count (never changes results).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate F_t(s) = E[s^{N_t}] and export it as CSV.
    Genfun,
    /// Simulate replicates and write lineage records plus a summary.
    Simulate,
    /// Emit theoretical rate-bias, rate and marker-density curves as CSV.
    Predict,
    /// Compare simulated lineage statistics against the exact laws.
    Compare,
    /// Exhaustively enumerate the exact lattice law (lifetime = delta_1).
    Enumerate,
    /// Run the full acceptance suite.
    Selftest,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32> {
    match cli.command {
        Command::Genfun => {
            let cfg = load_config(cli)?;
            let path = runners::run_genfun(&cfg)?;
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Simulate => {
            let cfg = load_config(cli)?;
            let summary = runners::run_simulate(&cfg, cli.threads)?;
            println!(
                "replicates {}, survivors {} ({:.4}), mean alive {:.4}, records {}",
                summary.replicates,
                summary.survivors,
                summary.survival_fraction,
                summary.mean_alive,
                summary.records_written
            );
            Ok(0)
        }
        Command::Predict => {
            let cfg = load_config(cli)?;
            let path = runners::run_predict(&cfg)?;
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Compare => {
            let cfg = load_config(cli)?;
            let report = runners::run_compare(&cfg, cli.threads)?;
            for check in &report.checks {
                println!("[{}] {}", check.verdict, check.test);
            }
            println!("verdict: {}", report.verdict);
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Enumerate => {
            let cfg = load_config(cli)?;
            let report = runners::run_enumerate(&cfg)?;
            println!(
                "enumerated {} genealogies to depth {}; survival = {}",
                report.genealogies, report.horizon, report.survival.value
            );
            Ok(0)
        }
        Command::Selftest => {
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("selftest-out"));
            let results = run_selftest(&out, cli.threads)?;
            let all = results.iter().all(|r| r.passed);
            println!(
                "selftest: {}/{} criteria passed",
                results.iter().filter(|r| r.passed).count(),
                results.len()
            );
            Ok(if all { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
