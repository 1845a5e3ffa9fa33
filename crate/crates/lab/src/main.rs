//! `rwde-lab`: runs the named experiments, prints exponent tables and
//! summarizes stored results.
//!
//! Exit codes: 0 every gate passed, 1 a statistical gate failed, 2 the
//! configuration is invalid, 3 the run failed or exhausted a budget.

mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};
use rwde_core::experiments::{exponents_table, EXPERIMENTS};

use crate::config::LabConfig;
use crate::error::LabError;

const DEFAULT_SEED: u64 = 1;
const DEFAULT_OUT: &str = "results";

#[derive(Parser)]
#[command(
    name = "rwde-lab",
    version,
    about = "Experiments on random walks in Dirichlet environment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (default 1).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the main sample count of the experiment.
    #[arg(long, global = true)]
    replicas: Option<u64>,
    /// Output directory (default "results").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; the default uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Prints κ, the drift and box κ^Λ for the configured weights.
    Exponents,
    /// Runs one experiment and writes its summary, ledger rows and series.
    Run {
        #[arg(value_parser = PossibleValuesParser::new(EXPERIMENTS))]
        experiment: String,
    },
    /// Summarizes the stored results of the output directory.
    Report,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = LabError::Config(e.kind().to_string());
            let _ = e.print();
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(cli: Cli) -> Result<u8, LabError> {
    let g = cli.global;
    let file = match &g.config {
        Some(path) => LabConfig::load(path)?,
        None => LabConfig::default(),
    };
    if let Some(n) = g.threads.or(file.threads) {
        if n == 0 {
            return Err(LabError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::Config(e.to_string()))?;
    }
    let seed = g.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let out = g.out.clone().or_else(|| file.out.clone());

    match cli.command {
        Command::Exponents => {
            let table = exponents_table(&file.exponent_weights())?;
            println!("{table}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
                let path = dir.join("exponents.json");
                let mut text = serde_json::to_string_pretty(&table).map_err(|e| LabError::data(&path, e))?;
                text.push('\n');
                std::fs::write(&path, text).map_err(|e| LabError::io(&path, e))?;
            }
            Ok(0)
        }
        Command::Run { experiment } => {
            let mut cfg = file.experiment(&experiment)?;
            if let Some(n) = g.replicas {
                if n == 0 {
                    return Err(LabError::Config("--replicas must be at least 1".into()));
                }
                cfg.set_replicas(n);
            }
            let out = out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            let outcome = cfg.run(seed)?;
            let written = output::write_outcome(&out, &cfg, &outcome)?;
            for c in &outcome.checks {
                println!(
                    "{} {} = {:?} (requires {})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.requirement
                );
            }
            println!(
                "{experiment}: {} (seed {seed}, config {})",
                if outcome.passed() { "PASS" } else { "FAIL" },
                cfg.config_hash()
            );
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(if outcome.passed() { 0 } else { 1 })
        }
        Command::Report => {
            let out = out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            let summaries = output::read_summaries(&out)?;
            if summaries.is_empty() {
                return Err(LabError::Config(format!("no summaries in {}", out.display())));
            }
            let mut failed = 0;
            for (_, s) in &summaries {
                let passing = s.checks.iter().filter(|c| c.passed).count();
                println!(
                    "{} {:<16} seed {:<6} config {}  {passing}/{} gates",
                    if s.passed { "PASS" } else { "FAIL" },
                    s.experiment,
                    s.seed,
                    s.config_hash,
                    s.checks.len()
                );
                for c in s.checks.iter().filter(|c| !c.passed) {
                    println!("       failed gate {}", c.name);
                }
                failed += usize::from(!s.passed);
            }
            println!("{} of {} experiments passed", summaries.len() - failed, summaries.len());
            Ok(if failed == 0 { 0 } else { 1 })
        }
    }
}
