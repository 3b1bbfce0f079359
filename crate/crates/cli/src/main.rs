//! `timebin`: run simulated time-bin entanglement experiments from a TOML
//! config and write CSV results.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::CurveKind;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "timebin",
    version,
    about = "Monte Carlo simulator for time-bin entangled photon pairs"
)]
struct Cli {
    /// Directory receiving the CSV outputs (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for the simulation (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one setting; writes summary.csv and histogram.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Phase scan with fits; writes scan.csv and fit_report.csv.
    Scan {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Analytic theory curve.
    Curve {
        kind: Kind,
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// v_vs_e: also write visibility scaled to this maximum.
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        mu_min: f64,
        #[arg(long, default_value_t = 1.0)]
        mu_max: f64,
        #[arg(long, default_value_t = 1.0)]
        v_max: f64,
    },
    /// Fit an existing scan CSV (columns phase_rad, raw, accidental).
    Fit { input: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Kind {
    VVsE,
    VVsMu,
}

fn execute(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Run { config, seed } => commands::run(&config, &cli.out, seed),
        Command::Scan { config, seed } => commands::scan(&config, &cli.out, seed),
        Command::Curve {
            kind,
            points,
            scale,
            mu_min,
            mu_max,
            v_max,
        } => {
            let kind = match kind {
                Kind::VVsE => CurveKind::VersusEntanglement { points, scale },
                Kind::VVsMu => CurveKind::VersusMu {
                    points,
                    mu_min,
                    mu_max,
                    v_max,
                },
            };
            commands::curve(kind, &cli.out)
        }
        Command::Fit { input } => commands::fit(&input, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
