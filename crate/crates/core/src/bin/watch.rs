use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use watch_core::error::ErrorClass;
use watch_core::pipeline::{self, RunConfig};
use watch_core::WatchError;

#[derive(Parser)]
#[command(name = "watch", version, about = "Treatment-effect heterogeneity workflow for randomized trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON configuration (analysis config for ida/analyze, scenario for simulate).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if needed.
    #[arg(long)]
    out: PathBuf,
    /// Override the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Initial data analysis: summaries, missingness, association, clustering.
    Ida(Common),
    /// Pseudo-outcomes, global test, importance, displays and findings report.
    Analyze(Common),
    /// Generate a synthetic trial with known treatment effects.
    Simulate(Common),
}

fn load(c: &Common) -> Result<RunConfig, WatchError> {
    let mut cfg = RunConfig::from_file(&c.config)?;
    if let Some(s) = c.seed {
        cfg.plan.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, WatchError> {
    match cli.command {
        Command::Ida(c) => {
            let r = pipeline::run_ida(&load(&c)?, &c.out)?;
            Ok(format!("ida: {} rows, report in {}", r.n_rows, c.out.display()))
        }
        Command::Analyze(c) => {
            let r = pipeline::run_analyze(&load(&c)?, &c.out)?;
            Ok(format!(
                "analyze: global p = {} ({} evidence against homogeneity), report in {}",
                r.het_test.p_value,
                r.het_test.verbal,
                c.out.display()
            ))
        }
        Command::Simulate(c) => {
            let mut spec = pipeline::read_scenario(&c.config)?;
            if let Some(s) = c.seed {
                spec.seed = s;
            }
            pipeline::run_simulate(&spec, &c.out)?;
            Ok(format!("simulate: {} rows written to {}", spec.n, c.out.display()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(msg) => {
            eprintln!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Io | ErrorClass::Numerical => 1,
            })
        }
    }
}
