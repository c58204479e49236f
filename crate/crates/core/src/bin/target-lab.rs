use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stochastic_target::experiment::{run_with_workers, ExperimentConfig, Kind};

/// Experiment runner for stochastic target problems.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Spot-check growth and Lipschitz assumptions.
    Validate,
    /// Simulate controlled paths.
    Simulate,
    /// Dump operator evaluations at random points.
    Operators,
    /// Solve the HJB equation on a grid.
    Solve,
    /// Target value and DP expectation on a scenario tree.
    Tree,
    /// Certify the explicit super- and sub-solutions and check the sandwich.
    Certify,
    /// Compare the embedded target value with the control problem.
    Embed,
    /// Truncation-radius sensitivity.
    Sweep,
}

impl From<Command> for Kind {
    fn from(c: Command) -> Kind {
        match c {
            Command::Validate => Kind::Validate,
            Command::Simulate => Kind::Simulate,
            Command::Operators => Kind::Operators,
            Command::Solve => Kind::Solve,
            Command::Tree => Kind::Tree,
            Command::Certify => Kind::Certify,
            Command::Embed => Kind::EmbedEquivalence,
            Command::Sweep => Kind::RadiusSweep,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    let mut cfg = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    cfg.kind = Some(cli.command.into());
    if let Some(out) = cli.out {
        cfg.out = Some(out);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match run_with_workers(&cfg, cli.workers) {
        Ok(report) => {
            for (k, v) in &report.summary {
                println!("{k} = {v}");
            }
            println!("output: {}", report.out.display());
            ExitCode::from(report.status as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
