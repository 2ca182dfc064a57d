//! `newsamp`: generate data, run optimizers, compare them and report
//! convergence coefficients.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "newsamp", version, about = "Sub-sampled Newton with eigenvalue thresholding")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set method.rank=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a spiked-covariance dataset to CSV.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Output path (overrides output.dataset).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run one method; writes a JSONL trace and a JSON summary.
    Optimize {
        #[command(flatten)]
        common: Common,
    },
    /// Run several methods against a shared reference solution.
    Benchmark {
        #[command(flatten)]
        common: Common,
    },
    /// Report convergence coefficients at the reference solution.
    Coeffs {
        #[command(flatten)]
        common: Common,
        /// Output path (overrides output.report).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let load = |c: &Common| config::load(c.config.as_deref(), &c.overrides);
    match cli.command {
        Command::Generate { common, out } => commands::generate(&load(&common)?, out),
        Command::Optimize { common } => commands::optimize(&load(&common)?),
        Command::Benchmark { common } => commands::benchmark(&load(&common)?),
        Command::Coeffs { common, out } => commands::coeffs(&load(&common)?, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e
                .chain()
                .find_map(|c| {
                    c.downcast_ref::<newsamp_core::Error>()
                        .map(newsamp_core::Error::kind)
                        .or_else(|| c.downcast_ref::<std::io::Error>().map(|_| "io"))
                })
                .unwrap_or("config");
            let msg = serde_json::json!({ "error": kind, "message": format!("{e:#}") });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
